#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntkeval/numeral.hpp"

namespace ntkeval::lm {

struct GenParams {
    int n = 1;
    double temperature = 1.0;
    int max_new_tokens = 16;
    uint64_t seed = 0;
};

// One sampled completion. logp_base is the log-probability of the text under
// the model that generated it, on the same temperature-scaled measure that
// score() uses; logp_tuned is filled in later when a second model rescores
// the same text (counterfactual rescoring).
struct CompletionRecord {
    std::string text;
    std::optional<Numeral> extracted_answer;
    double logp_base = 0.0;
    std::optional<double> logp_tuned;
    int sample_index = 0;

    bool operator==(const CompletionRecord&) const = default;
};

// What the estimator needs from any language model: sampling, and
// teacher-forced scoring of arbitrary text. Implementations must be
// deterministic given (seed, temperature) and safe to call concurrently.
class LmApi {
public:
    virtual ~LmApi() = default;

    virtual std::vector<CompletionRecord> generate(const std::string& prompt,
                                                   const GenParams& params) const = 0;

    // Total log-probability (nats) of `completion` given `prompt`,
    // temperature-adjusted identically to generate. Empty completion -> 0.
    virtual double score(const std::string& prompt, const std::string& completion,
                         double temperature) const = 0;

    virtual std::string model_id() const = 0;

    // Completions are stored as text and re-tokenized under teacher forcing;
    // probability ratios only make sense between models that tokenize
    // identically, so pairs are rejected unless these ids match.
    virtual std::string tokenizer_id() const = 0;
};

// One supervised tuning pair, already serialized to prompt/target text.
// The loss covers the target tokens only.
struct TuneExample {
    std::string prompt;
    std::string target;
};

struct ScoringError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ntkeval::lm
