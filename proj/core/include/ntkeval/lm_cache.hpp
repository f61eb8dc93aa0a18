#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "ntkeval/lm.hpp"

namespace ntkeval::lm {

// Write-through completion cache keyed by (model id, prompt hash, sampling
// params). Generations are sampled once and reused; scores of the same text
// under other models are appended, never trigger resampling. Entries persist
// as one JSON line per completion (record-file style with logp fields), so a
// cache hit is served byte-identically with no network I/O.
class CachedLm final : public LmApi {
public:
    // Loads any existing entries from cache_path and appends new ones to it.
    // The inner model must be reachable at construction (its identity is
    // pinned into the cache); afterwards cached calls work offline.
    CachedLm(const LmApi& inner, std::filesystem::path cache_path);

    std::vector<CompletionRecord> generate(const std::string& prompt,
                                           const GenParams& params) const override;
    double score(const std::string& prompt, const std::string& completion,
                 double temperature) const override;
    std::string model_id() const override { return model_id_; }
    std::string tokenizer_id() const override { return tokenizer_id_; }

    size_t hits() const;
    size_t misses() const;

private:
    std::string gen_key(const std::string& prompt, const GenParams& params) const;
    std::string score_key(const std::string& prompt, const std::string& completion,
                          double temperature) const;
    void append_line(const std::string& line) const;

    const LmApi& inner_;
    std::filesystem::path path_;
    std::string model_id_;
    std::string tokenizer_id_;

    mutable std::mutex mutex_;
    mutable std::map<std::string, std::vector<CompletionRecord>> generations_;
    mutable std::map<std::string, double> scores_;
    mutable size_t hits_ = 0;
    mutable size_t misses_ = 0;
};

}  // namespace ntkeval::lm
