#include "ntkeval/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "ntkeval/hash.hpp"

namespace ntkeval::data {

using nlohmann::json;

namespace {

// Draws expressions until the rendered question is unseen; the id space is
// (category, question), so uniqueness here guarantees split disjointness.
ProblemRecord fresh_record(expr::Skill skill, expr::SurfaceFormat fmt,
                           const expr::GenConfig& cfg, expr::Rng& rng,
                           std::set<uint64_t>& used, bool dual_labels) {
    Category primary = Category::deep(skill);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        expr::Expr e = expr::gen_expr(skill, cfg, rng);
        std::string question = expr::render(e, fmt, rng);
        uint64_t id = ProblemRecord::stable_id(primary, question);
        if (!used.insert(id).second) continue;
        Numeral answer = expr::to_numeral(expr::eval_expr(e));
        std::optional<Category> secondary;
        if (dual_labels) secondary = Category::surface(fmt);
        return ProblemRecord::make(primary, std::move(question), std::move(answer),
                                   std::move(secondary));
    }
    throw std::runtime_error(std::string("question space exhausted for category ") +
                             std::string(expr::skill_name(skill)));
}

}  // namespace

DatasetSplit build_synthetic_v1(const expr::GenConfig& cfg, int n_train_per_cell,
                                int n_test_per_cell, uint64_t seed) {
    if (n_train_per_cell < 0 || n_test_per_cell < 0 || n_train_per_cell + n_test_per_cell < 1) {
        throw std::invalid_argument("per-cell counts must be nonnegative and sum to >= 1");
    }
    DatasetSplit split;
    std::set<uint64_t> used;
    for (expr::Skill skill : expr::kElementarySkills) {
        for (expr::SurfaceFormat fmt : expr::kAllFormats) {
            expr::Rng rng(derive_seed(seed, "v1-cell",
                                      std::string(expr::skill_name(skill)) + "/" +
                                          std::string(expr::format_name(fmt))));
            for (int i = 0; i < n_train_per_cell; ++i) {
                split.train.push_back(fresh_record(skill, fmt, cfg, rng, used, true));
            }
            for (int i = 0; i < n_test_per_cell; ++i) {
                split.test.push_back(fresh_record(skill, fmt, cfg, rng, used, true));
            }
        }
    }
    return split;
}

DatasetSplit build_synthetic_v2(const expr::GenConfig& cfg, int n_train_per_skill, uint64_t seed,
                                int n_test_per_skill) {
    if (n_train_per_skill < 0 || n_test_per_skill < 0 ||
        n_train_per_skill + n_test_per_skill < 1) {
        throw std::invalid_argument("per-skill counts must be nonnegative and sum to >= 1");
    }
    DatasetSplit split;
    std::set<uint64_t> used;
    for (expr::Skill skill : expr::kAllSkills) {
        expr::Rng rng(derive_seed(seed, "v2-skill", expr::skill_name(skill)));
        for (int i = 0; i < n_train_per_skill; ++i) {
            split.train.push_back(
                fresh_record(skill, expr::SurfaceFormat::Question, cfg, rng, used, false));
        }
        for (int i = 0; i < n_test_per_skill; ++i) {
            split.test.push_back(
                fresh_record(skill, expr::SurfaceFormat::Question, cfg, rng, used, false));
        }
    }
    return split;
}

DatasetSplit build_random_baseline(const DatasetSplit& src, uint64_t seed) {
    expr::Rng rng(derive_seed(seed, "random-baseline"));
    std::uniform_int_distribution<int> dist(1, 1000);
    auto randomize = [&](const std::vector<ProblemRecord>& records) {
        std::vector<ProblemRecord> out;
        out.reserve(records.size());
        for (const auto& r : records) {
            ProblemRecord copy = r;
            copy.answer = Numeral::from_int(dist(rng));
            copy.solution.reset();
            out.push_back(std::move(copy));
        }
        return out;
    };
    return DatasetSplit{randomize(src.train), randomize(src.test)};
}

DatasetSplit load_khanskill(const std::filesystem::path& path, uint64_t split_seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());

    std::map<std::string, std::vector<ProblemRecord>> by_skill;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw LoadError(path, line_no, "invalid JSON");
        if (!j.is_object()) throw LoadError(path, line_no, "record is not a JSON object");

        std::string skill;
        if (j.contains("category")) {
            skill = j.at("category").get<std::string>();
        } else if (j.contains("skill")) {
            skill = j.at("skill").get<std::string>();
        } else {
            throw LoadError(path, line_no, "missing field 'category'");
        }
        if (!j.contains("question")) throw LoadError(path, line_no, "missing field 'question'");
        if (!j.contains("solution")) throw LoadError(path, line_no, "missing field 'solution'");
        std::string solution = j.at("solution").get<std::string>();
        if (solution.find('#') == std::string::npos) {
            throw LoadError(path, line_no, "solution has no '#' answer marker");
        }
        auto answer = extract_answer(solution);
        if (!answer) throw LoadError(path, line_no, "no parseable answer after '#' marker");

        auto category = Category::from_string(skill);
        if (!category) throw LoadError(path, line_no, "unparseable category");
        by_skill[category->to_string()].push_back(
            ProblemRecord::make(*category, j.at("question").get<std::string>(), *answer,
                                std::nullopt, std::move(solution)));
    }

    size_t total = 0;
    for (const auto& [_, records] : by_skill) total += records.size();
    // Exact global 2:1 train/test; floor(2n/3) per skill, extras assigned in
    // sorted skill order.
    size_t train_target = (2 * total + 1) / 3;
    size_t floor_sum = 0;
    for (const auto& [_, records] : by_skill) floor_sum += records.size() * 2 / 3;
    size_t extras = train_target > floor_sum ? train_target - floor_sum : 0;

    DatasetSplit split;
    for (auto& [_, records] : by_skill) {
        std::sort(records.begin(), records.end(),
                  [](const ProblemRecord& a, const ProblemRecord& b) { return a.id < b.id; });
        expr::Rng rng(derive_seed(split_seed, "khanskill", records.front().category.to_string()));
        std::shuffle(records.begin(), records.end(), rng);
        size_t n_train = records.size() * 2 / 3;
        if (extras > 0 && n_train < records.size()) {
            ++n_train;
            --extras;
        }
        for (size_t i = 0; i < records.size(); ++i) {
            (i < n_train ? split.train : split.test).push_back(std::move(records[i]));
        }
    }
    return split;
}

}  // namespace ntkeval::data
