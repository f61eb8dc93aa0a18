#include "ntkeval/lm_cache.hpp"

#include <bit>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ntkeval/hash.hpp"

namespace ntkeval::lm {

using nlohmann::json;

CachedLm::CachedLm(const LmApi& inner, std::filesystem::path cache_path)
    : inner_(inner), path_(std::move(cache_path)) {
    model_id_ = inner_.model_id();
    tokenizer_id_ = inner_.tokenizer_id();

    std::ifstream in(path_);
    if (!in) return;  // fresh cache
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw std::runtime_error(path_.string() + ":" + std::to_string(line_no) +
                                     ": invalid cache line");
        }
        const std::string kind = j.value("kind", "");
        if (kind == "completion") {
            CompletionRecord rec;
            rec.text = j.at("text").get<std::string>();
            rec.logp_base = j.at("logp_base").get<double>();
            if (j.contains("logp_tuned")) rec.logp_tuned = j.at("logp_tuned").get<double>();
            rec.sample_index = j.at("sample_index").get<int>();
            rec.extracted_answer = extract_answer(rec.text);
            generations_[j.at("key").get<std::string>()].push_back(std::move(rec));
        } else if (kind == "score") {
            scores_[j.at("key").get<std::string>()] = j.at("logp").get<double>();
        }
        // Unknown kinds (e.g. "info") are informational; skip.
    }
}

std::string CachedLm::gen_key(const std::string& prompt, const GenParams& params) const {
    uint64_t h = fnv1a(model_id_);
    h = fnv1a(prompt, h);
    h = fnv1a_u64(static_cast<uint64_t>(params.n), h);
    h = fnv1a_u64(std::bit_cast<uint64_t>(params.temperature), h);
    h = fnv1a_u64(static_cast<uint64_t>(params.max_new_tokens), h);
    h = fnv1a_u64(params.seed, h);
    return "g" + hex64(h);
}

std::string CachedLm::score_key(const std::string& prompt, const std::string& completion,
                                double temperature) const {
    uint64_t h = fnv1a(model_id_);
    h = fnv1a(prompt, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(completion, h);
    h = fnv1a_u64(std::bit_cast<uint64_t>(temperature), h);
    return "s" + hex64(h);
}

void CachedLm::append_line(const std::string& line) const {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to cache: " + path_.string());
    out << line << '\n';
}

std::vector<CompletionRecord> CachedLm::generate(const std::string& prompt,
                                                 const GenParams& params) const {
    const std::string key = gen_key(prompt, params);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = generations_.find(key);
        if (it != generations_.end() && it->second.size() == static_cast<size_t>(params.n)) {
            ++hits_;
            return it->second;
        }
    }
    auto fresh = inner_.generate(prompt, params);
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = generations_.emplace(key, fresh);
    if (inserted) {
        ++misses_;
        const uint64_t prompt_hash = fnv1a(prompt);
        for (const auto& rec : fresh) {
            json j;
            j["kind"] = "completion";
            j["key"] = key;
            j["model"] = model_id_;
            j["prompt_hash"] = hex64(prompt_hash);
            j["question"] = prompt;
            j["text"] = rec.text;
            if (rec.extracted_answer) j["answer"] = rec.extracted_answer->str();
            j["logp_base"] = rec.logp_base;
            j["sample_index"] = rec.sample_index;
            append_line(j.dump());
        }
    }
    return it->second;
}

double CachedLm::score(const std::string& prompt, const std::string& completion,
                       double temperature) const {
    if (completion.empty()) return 0.0;
    const std::string key = score_key(prompt, completion, temperature);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = scores_.find(key);
        if (it != scores_.end()) {
            ++hits_;
            return it->second;
        }
    }
    double value = inner_.score(prompt, completion, temperature);
    std::lock_guard<std::mutex> lock(mutex_);
    if (scores_.emplace(key, value).second) {
        ++misses_;
        json j;
        j["kind"] = "score";
        j["key"] = key;
        j["model"] = model_id_;
        j["logp"] = value;
        append_line(j.dump());
    }
    return value;
}

size_t CachedLm::hits() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return hits_;
}

size_t CachedLm::misses() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return misses_;
}

}  // namespace ntkeval::lm
