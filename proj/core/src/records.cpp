#include "ntkeval/records.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "ntkeval/hash.hpp"

namespace ntkeval::data {

using nlohmann::json;

uint64_t ProblemRecord::stable_id(const Category& category, std::string_view question) {
    uint64_t h = fnv1a(category.to_string());
    h = fnv1a("\x1f", h);
    return fnv1a(question, h);
}

ProblemRecord ProblemRecord::make(Category category, std::string question, Numeral answer,
                                  std::optional<Category> category2,
                                  std::optional<std::string> solution) {
    ProblemRecord r{std::move(category), std::move(category2), std::move(question),
                    std::move(answer), std::move(solution), 0};
    r.id = stable_id(r.category, r.question);
    return r;
}

namespace {

std::map<std::string, int> count_by_category(const std::vector<ProblemRecord>& records) {
    std::map<std::string, int> counts;
    for (const auto& r : records) ++counts[r.category.to_string()];
    return counts;
}

json record_to_json(const ProblemRecord& r, const char* split) {
    json j;
    j["category"] = r.category.to_string();
    if (r.category2) j["category2"] = r.category2->to_string();
    j["question"] = r.question;
    j["answer"] = r.answer.str();
    if (r.solution) j["solution"] = *r.solution;
    j["split"] = split;
    return j;
}

ProblemRecord record_from_json(const json& j, const std::filesystem::path& path, size_t line) {
    auto fail = [&](const std::string& msg) -> LoadError { return LoadError(path, line, msg); };
    if (!j.is_object()) throw fail("record is not a JSON object");
    if (!j.contains("category")) throw fail("missing field 'category'");
    if (!j.contains("question")) throw fail("missing field 'question'");
    if (!j.contains("answer")) throw fail("missing field 'answer'");

    auto category = Category::from_string(j.at("category").get<std::string>());
    if (!category) throw fail("unparseable category");
    std::optional<Category> category2;
    if (j.contains("category2")) {
        category2 = Category::from_string(j.at("category2").get<std::string>());
        if (!category2) throw fail("unparseable category2");
    }
    auto answer = Numeral::parse(j.at("answer").get<std::string>());
    if (!answer) throw fail("answer does not parse as a number");
    std::optional<std::string> solution;
    if (j.contains("solution")) solution = j.at("solution").get<std::string>();

    return ProblemRecord::make(*category, j.at("question").get<std::string>(), *answer,
                               std::move(category2), std::move(solution));
}

}  // namespace

std::map<std::string, int> DatasetSplit::train_counts() const { return count_by_category(train); }
std::map<std::string, int> DatasetSplit::test_counts() const { return count_by_category(test); }

bool DatasetSplit::disjoint_by_id() const {
    std::set<uint64_t> train_ids;
    for (const auto& r : train) train_ids.insert(r.id);
    for (const auto& r : test) {
        if (train_ids.count(r.id)) return false;
    }
    return true;
}

uint64_t DatasetSplit::content_hash() const {
    uint64_t h = kFnvOffset;
    auto mix_record = [&](const ProblemRecord& r, const char* split) {
        h = fnv1a(split, h);
        h = fnv1a(r.category.to_string(), h);
        if (r.category2) h = fnv1a(r.category2->to_string(), h);
        h = fnv1a(r.question, h);
        h = fnv1a(r.answer.str(), h);
        if (r.solution) h = fnv1a(*r.solution, h);
    };
    for (const auto& r : train) mix_record(r, "t");
    for (const auto& r : test) mix_record(r, "e");
    return h;
}

LoadError::LoadError(const std::filesystem::path& path, size_t line_no, const std::string& message)
    : std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + message),
      line(line_no) {}

void write_records(const DatasetSplit& split, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const auto& r : split.train) out << record_to_json(r, "train").dump() << '\n';
    for (const auto& r : split.test) out << record_to_json(r, "test").dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

DatasetSplit read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    DatasetSplit split;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw LoadError(path, line_no, "invalid JSON");
        ProblemRecord record = record_from_json(j, path, line_no);
        std::string which = j.value("split", "train");
        if (which == "train") {
            split.train.push_back(std::move(record));
        } else if (which == "test") {
            split.test.push_back(std::move(record));
        } else {
            throw LoadError(path, line_no, "unknown split '" + which + "'");
        }
    }
    return split;
}

}  // namespace ntkeval::data
