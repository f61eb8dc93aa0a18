#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ntkeval/lm.hpp"

namespace ntkeval::lm {

// Character-level autoregressive model, small enough that exhaustive
// completion enumeration and finite-difference gradient checks stay cheap.
//
// Next-token distribution: softmax(W2 tanh(W1 f + b1) + b2), where the
// feature f concatenates the mean embedding of the whole prefix with the
// embeddings of the last `window` tokens. With all parameters zero the
// distribution is exactly uniform.
//
// Token 0 is a reserved stop character (kStopChar); sampled completions end
// with it unless truncated at max_new_tokens, and it scores like any other
// token, so exp(score) is the exact probability of the completion event.
struct ToyLmConfig {
    std::string charset;  // data characters; folded to lowercase, no duplicates
    int embed_dim = 12;
    int hidden_dim = 32;
    int window = 16;
    double init_scale = 0.4;  // 0 -> the uniform model
    uint64_t init_seed = 0;

    static std::string default_charset();
};

struct EnumeratedCompletion {
    std::string text;  // ends with kStopChar iff terminated
    double prob = 0.0;
    bool terminated = false;
};

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ToyLm final : public LmApi {
public:
    static constexpr char kStopChar = '\x03';

    explicit ToyLm(ToyLmConfig cfg);

    // LmApi
    std::vector<CompletionRecord> generate(const std::string& prompt,
                                           const GenParams& params) const override;
    double score(const std::string& prompt, const std::string& completion,
                 double temperature) const override;
    std::string model_id() const override;
    std::string tokenizer_id() const override;

    // All completions of length <= max_len that end in the stop token, with
    // exact probabilities under the temperature-scaled measure. With
    // include_unterminated, the length-max_len prefixes are appended so the
    // probabilities sum to 1 within rounding. Refuses when vocab^max_len
    // exceeds 1e7.
    std::vector<EnumeratedCompletion> enumerate_completions(
        const std::string& prompt, int max_len, double temperature,
        bool include_unterminated = false) const;

    // Exact p(model answers `truth` | prompt) over the full sampling space
    // used by generate(prompt, {max_new_tokens = max_len}).
    double exact_correct_probability(const std::string& prompt, const Numeral& truth,
                                     int max_len, double temperature) const;

    // Accumulates weight * d log p(completion | prompt) / d theta into grad
    // and returns log p(completion | prompt).
    double add_logprob_grad(const std::string& prompt, const std::string& completion,
                            double temperature, double weight, std::vector<double>& grad) const;

    // d exact_correct_probability / d theta, via enumeration.
    std::vector<double> correct_probability_grad(const std::string& prompt, const Numeral& truth,
                                                 int max_len, double temperature) const;

    const std::vector<double>& params() const { return params_; }
    void set_params(std::vector<double> params);
    // params += alpha * direction (SGD steps, NTK probe points).
    void axpy_params(double alpha, std::span<const double> direction);
    size_t param_count() const { return params_.size(); }
    const ToyLmConfig& config() const { return cfg_; }
    int vocab_size() const { return vocab_size_; }

    void save(const std::filesystem::path& path) const;
    static ToyLm load(const std::filesystem::path& path);

private:
    struct PrefixState {
        std::vector<int> ids;
        std::vector<double> embed_sum;
    };

    std::vector<int> tokenize(std::string_view text) const;
    PrefixState make_state(std::string_view text) const;
    void push_token(PrefixState& state, int token) const;
    void build_feature(const PrefixState& state, std::vector<double>& feat) const;
    // log-probabilities of the next token at temperature T; fills work
    // buffers and returns them by reference for reuse in hot loops.
    void next_logprobs(const PrefixState& state, double temperature, std::vector<double>& feat,
                       std::vector<double>& hidden, std::vector<double>& logits,
                       std::vector<double>& logp) const;

    ToyLmConfig cfg_;
    int vocab_size_ = 0;
    int feature_dim_ = 0;
    std::array<int, 256> char_to_token_{};  // -1 = unknown
    std::string token_to_char_;             // index 0 = stop
    std::vector<double> params_;

    size_t off_embed_ = 0, off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;

    friend class ToyLmBackprop;
};

struct TuneConfig {
    double lr = 2e-3;
    int batch_size = 8;
    int epochs = 1;
    double warmup_ratio = 0.03;
    enum class Schedule { Cosine, Constant } schedule = Schedule::Cosine;
    uint64_t seed = 0;

    void validate() const;  // lr >= 0 (0 = no-op pass), 0 <= warmup_ratio < 1
};

struct TrainingError : std::runtime_error {
    TrainingError(int step, const std::string& message);
    int step;
};

// Mean over examples of the negative log-likelihood of the target tokens
// given the prompt (unit temperature).
double toy_loss(const ToyLm& model, std::span<const TuneExample> batch);
std::vector<double> toy_loss_grad(const ToyLm& model, std::span<const TuneExample> batch);

// SGD with seed-shuffled order and linear-warmup + cosine-decay schedule.
// Returns the tuned model; `model` itself is untouched. Identical seeds give
// bitwise-identical parameters. Non-finite loss aborts with TrainingError.
ToyLm finetune(const ToyLm& model, std::span<const TuneExample> dataset, const TuneConfig& cfg);

}  // namespace ntkeval::lm
