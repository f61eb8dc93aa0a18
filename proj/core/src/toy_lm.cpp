#include "ntkeval/toy_lm.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "ntkeval/hash.hpp"

namespace ntkeval::lm {

using nlohmann::json;

std::string ToyLmConfig::default_charset() {
    return "abcdefghijklmnopqrstuvwxyz0123456789 \n.,:?!#$%()*+-/=";
}

ToyLm::ToyLm(ToyLmConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.embed_dim < 1 || cfg_.hidden_dim < 1 || cfg_.window < 1) {
        throw std::invalid_argument("toy model dimensions must be positive");
    }
    if (cfg_.charset.empty()) throw std::invalid_argument("charset must be nonempty");

    char_to_token_.fill(-1);
    token_to_char_.push_back(kStopChar);
    char_to_token_[static_cast<unsigned char>(kStopChar)] = 0;
    for (char raw : cfg_.charset) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (c == kStopChar) throw std::invalid_argument("charset may not contain the stop char");
        auto idx = static_cast<unsigned char>(c);
        if (char_to_token_[idx] != -1) {
            throw std::invalid_argument(std::string("duplicate charset character '") + c + "'");
        }
        char_to_token_[idx] = static_cast<int>(token_to_char_.size());
        token_to_char_.push_back(c);
    }
    // Keep the canonical folded charset so tokenizer ids compare correctly.
    cfg_.charset = token_to_char_.substr(1);

    vocab_size_ = static_cast<int>(token_to_char_.size());
    if (vocab_size_ > 64) throw std::invalid_argument("toy vocabulary larger than 64 tokens");
    feature_dim_ = cfg_.embed_dim * (cfg_.window + 1);

    const size_t V = static_cast<size_t>(vocab_size_);
    const size_t E = static_cast<size_t>(cfg_.embed_dim);
    const size_t H = static_cast<size_t>(cfg_.hidden_dim);
    const size_t F = static_cast<size_t>(feature_dim_);
    off_embed_ = 0;
    off_w1_ = off_embed_ + V * E;
    off_b1_ = off_w1_ + H * F;
    off_w2_ = off_b1_ + H;
    off_b2_ = off_w2_ + V * H;
    params_.assign(off_b2_ + V, 0.0);
    if (params_.size() > 100000) throw std::invalid_argument("toy model too large");

    if (cfg_.init_scale != 0.0) {
        std::mt19937_64 rng(derive_seed(cfg_.init_seed, "toy-init"));
        std::normal_distribution<double> dist(0.0, 1.0);
        auto fill = [&](size_t begin, size_t count, double scale) {
            for (size_t i = 0; i < count; ++i) params_[begin + i] = scale * dist(rng);
        };
        fill(off_embed_, V * E, cfg_.init_scale);
        fill(off_w1_, H * F, cfg_.init_scale / std::sqrt(static_cast<double>(F)));
        fill(off_w2_, V * H, cfg_.init_scale / std::sqrt(static_cast<double>(H)));
        // biases stay zero
    }
}

std::vector<int> ToyLm::tokenize(std::string_view text) const {
    std::vector<int> out;
    out.reserve(text.size());
    for (char raw : text) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        int id = char_to_token_[static_cast<unsigned char>(c)];
        if (id < 0) {
            throw ScoringError("character not in toy vocabulary: 0x" +
                               hex64(static_cast<unsigned char>(raw)).substr(14));
        }
        out.push_back(id);
    }
    return out;
}

ToyLm::PrefixState ToyLm::make_state(std::string_view text) const {
    PrefixState state;
    state.embed_sum.assign(static_cast<size_t>(cfg_.embed_dim), 0.0);
    for (int id : tokenize(text)) push_token(state, id);
    return state;
}

void ToyLm::push_token(PrefixState& state, int token) const {
    state.ids.push_back(token);
    const double* row = params_.data() + off_embed_ + static_cast<size_t>(token) * cfg_.embed_dim;
    for (int e = 0; e < cfg_.embed_dim; ++e) state.embed_sum[static_cast<size_t>(e)] += row[e];
}

void ToyLm::build_feature(const PrefixState& state, std::vector<double>& feat) const {
    const int E = cfg_.embed_dim;
    const int K = cfg_.window;
    feat.assign(static_cast<size_t>(feature_dim_), 0.0);
    const size_t n = state.ids.size();
    if (n > 0) {
        const double inv = 1.0 / static_cast<double>(n);
        for (int e = 0; e < E; ++e) feat[static_cast<size_t>(e)] = state.embed_sum[static_cast<size_t>(e)] * inv;
    }
    for (int k = 0; k < K; ++k) {
        long long pos = static_cast<long long>(n) - K + k;
        if (pos < 0) continue;
        int id = state.ids[static_cast<size_t>(pos)];
        const double* row = params_.data() + off_embed_ + static_cast<size_t>(id) * E;
        double* dst = feat.data() + static_cast<size_t>(E) * (1 + k);
        for (int e = 0; e < E; ++e) dst[e] = row[e];
    }
}

void ToyLm::next_logprobs(const PrefixState& state, double temperature, std::vector<double>& feat,
                          std::vector<double>& hidden, std::vector<double>& logits,
                          std::vector<double>& logp) const {
    const int V = vocab_size_;
    const int H = cfg_.hidden_dim;
    const int F = feature_dim_;
    build_feature(state, feat);

    hidden.resize(static_cast<size_t>(H));
    const double* w1 = params_.data() + off_w1_;
    const double* b1 = params_.data() + off_b1_;
    for (int h = 0; h < H; ++h) {
        double acc = b1[h];
        const double* row = w1 + static_cast<size_t>(h) * F;
        for (int j = 0; j < F; ++j) acc += row[j] * feat[static_cast<size_t>(j)];
        hidden[static_cast<size_t>(h)] = std::tanh(acc);
    }

    logits.resize(static_cast<size_t>(V));
    const double* w2 = params_.data() + off_w2_;
    const double* b2 = params_.data() + off_b2_;
    for (int v = 0; v < V; ++v) {
        double acc = b2[v];
        const double* row = w2 + static_cast<size_t>(v) * H;
        for (int h = 0; h < H; ++h) acc += row[h] * hidden[static_cast<size_t>(h)];
        logits[static_cast<size_t>(v)] = acc / temperature;
    }

    logp.resize(static_cast<size_t>(V));
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (int v = 0; v < V; ++v) sum += std::exp(logits[static_cast<size_t>(v)] - max_logit);
    double lse = max_logit + std::log(sum);
    for (int v = 0; v < V; ++v) logp[static_cast<size_t>(v)] = logits[static_cast<size_t>(v)] - lse;
}

std::vector<CompletionRecord> ToyLm::generate(const std::string& prompt,
                                              const GenParams& params) const {
    if (params.n < 1) throw std::invalid_argument("generate: n must be >= 1");
    if (!(params.temperature > 0)) throw std::invalid_argument("generate: temperature must be > 0");
    if (params.max_new_tokens < 0) throw std::invalid_argument("generate: negative max_new_tokens");

    const PrefixState base = make_state(prompt);
    std::mt19937_64 rng(derive_seed(params.seed, "toy-generate"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<double> feat, hidden, logits, logp;
    std::vector<CompletionRecord> out;
    out.reserve(static_cast<size_t>(params.n));
    for (int i = 0; i < params.n; ++i) {
        PrefixState state = base;
        std::string text;
        double total_logp = 0.0;
        for (int t = 0; t < params.max_new_tokens; ++t) {
            next_logprobs(state, params.temperature, feat, hidden, logits, logp);
            double u = unif(rng);
            int chosen = vocab_size_ - 1;
            double cum = 0.0;
            for (int v = 0; v < vocab_size_; ++v) {
                cum += std::exp(logp[static_cast<size_t>(v)]);
                if (u < cum) {
                    chosen = v;
                    break;
                }
            }
            total_logp += logp[static_cast<size_t>(chosen)];
            text += token_to_char_[static_cast<size_t>(chosen)];
            if (chosen == 0) break;
            push_token(state, chosen);
        }
        CompletionRecord rec;
        rec.text = std::move(text);
        rec.extracted_answer = extract_answer(rec.text);
        rec.logp_base = total_logp;
        rec.sample_index = i;
        out.push_back(std::move(rec));
    }
    return out;
}

double ToyLm::score(const std::string& prompt, const std::string& completion,
                    double temperature) const {
    if (!(temperature > 0)) throw std::invalid_argument("score: temperature must be > 0");
    if (completion.empty()) return 0.0;
    PrefixState state = make_state(prompt);
    std::vector<double> feat, hidden, logits, logp;
    double total = 0.0;
    for (int id : tokenize(completion)) {
        next_logprobs(state, temperature, feat, hidden, logits, logp);
        total += logp[static_cast<size_t>(id)];
        push_token(state, id);
    }
    return total;
}

std::string ToyLm::model_id() const {
    uint64_t h = fnv1a(cfg_.charset);
    h = fnv1a_u64(static_cast<uint64_t>(cfg_.embed_dim), h);
    h = fnv1a_u64(static_cast<uint64_t>(cfg_.hidden_dim), h);
    h = fnv1a_u64(static_cast<uint64_t>(cfg_.window), h);
    for (double p : params_) h = fnv1a_u64(std::bit_cast<uint64_t>(p), h);
    return "toy-" + hex64(h);
}

std::string ToyLm::tokenizer_id() const {
    return "chars-" + hex64(fnv1a(cfg_.charset));
}

std::vector<EnumeratedCompletion> ToyLm::enumerate_completions(const std::string& prompt,
                                                               int max_len, double temperature,
                                                               bool include_unterminated) const {
    if (max_len < 1) throw std::invalid_argument("enumerate_completions: max_len must be >= 1");
    double budget = std::pow(static_cast<double>(vocab_size_), max_len);
    if (budget > 1e7) {
        throw BudgetError("enumeration budget exceeded: vocab^max_len = " +
                          std::to_string(budget) + " > 1e7");
    }

    std::vector<EnumeratedCompletion> out;
    PrefixState state = make_state(prompt);
    std::string text;

    auto rec = [&](auto&& self, double logp_sum, int remaining) -> void {
        std::vector<double> feat, hidden, logits, logp;
        next_logprobs(state, temperature, feat, hidden, logits, logp);
        for (int v = 0; v < vocab_size_; ++v) {
            double child = logp_sum + logp[static_cast<size_t>(v)];
            if (v == 0) {
                out.push_back({text + kStopChar, std::exp(child), true});
                continue;
            }
            if (remaining == 1) {
                if (include_unterminated) {
                    out.push_back({text + token_to_char_[static_cast<size_t>(v)], std::exp(child),
                                   false});
                }
                continue;
            }
            text += token_to_char_[static_cast<size_t>(v)];
            push_token(state, v);
            self(self, child, remaining - 1);
            // pop
            const double* row =
                params_.data() + off_embed_ + static_cast<size_t>(v) * cfg_.embed_dim;
            for (int e = 0; e < cfg_.embed_dim; ++e) state.embed_sum[static_cast<size_t>(e)] -= row[e];
            state.ids.pop_back();
            text.pop_back();
        }
    };
    rec(rec, 0.0, max_len);
    return out;
}

double ToyLm::exact_correct_probability(const std::string& prompt, const Numeral& truth,
                                        int max_len, double temperature) const {
    double total = 0.0;
    for (const auto& c : enumerate_completions(prompt, max_len, temperature, true)) {
        auto extracted = extract_answer(c.text);
        if (extracted && *extracted == truth) total += c.prob;
    }
    return total;
}

double ToyLm::add_logprob_grad(const std::string& prompt, const std::string& completion,
                               double temperature, double weight,
                               std::vector<double>& grad) const {
    if (grad.size() != params_.size()) {
        throw std::invalid_argument("gradient buffer has wrong size");
    }
    const int V = vocab_size_;
    const int H = cfg_.hidden_dim;
    const int F = feature_dim_;
    const int E = cfg_.embed_dim;
    const int K = cfg_.window;

    PrefixState state = make_state(prompt);
    std::vector<double> feat, hidden, logits, logp;
    std::vector<double> g_z(static_cast<size_t>(V));
    std::vector<double> g_pre(static_cast<size_t>(H));
    std::vector<double> g_feat(static_cast<size_t>(F));

    double total_logp = 0.0;
    for (int y : tokenize(completion)) {
        next_logprobs(state, temperature, feat, hidden, logits, logp);
        total_logp += logp[static_cast<size_t>(y)];

        // d logp[y] / d logits_raw = (onehot - softmax) / T
        for (int v = 0; v < V; ++v) {
            double p = std::exp(logp[static_cast<size_t>(v)]);
            g_z[static_cast<size_t>(v)] = weight * (((v == y) ? 1.0 : 0.0) - p) / temperature;
        }

        double* g = grad.data();
        const double* w2 = params_.data() + off_w2_;
        for (int v = 0; v < V; ++v) {
            double gz = g_z[static_cast<size_t>(v)];
            double* g_w2_row = g + off_w2_ + static_cast<size_t>(v) * H;
            for (int h = 0; h < H; ++h) g_w2_row[h] += gz * hidden[static_cast<size_t>(h)];
            g[off_b2_ + static_cast<size_t>(v)] += gz;
        }
        for (int h = 0; h < H; ++h) {
            double acc = 0.0;
            for (int v = 0; v < V; ++v) acc += g_z[static_cast<size_t>(v)] * w2[static_cast<size_t>(v) * H + h];
            double hv = hidden[static_cast<size_t>(h)];
            g_pre[static_cast<size_t>(h)] = acc * (1.0 - hv * hv);
        }
        const double* w1 = params_.data() + off_w1_;
        for (int h = 0; h < H; ++h) {
            double gp = g_pre[static_cast<size_t>(h)];
            double* g_w1_row = g + off_w1_ + static_cast<size_t>(h) * F;
            for (int j = 0; j < F; ++j) g_w1_row[j] += gp * feat[static_cast<size_t>(j)];
            g[off_b1_ + static_cast<size_t>(h)] += gp;
        }
        for (int j = 0; j < F; ++j) {
            double acc = 0.0;
            for (int h = 0; h < H; ++h) acc += g_pre[static_cast<size_t>(h)] * w1[static_cast<size_t>(h) * F + j];
            g_feat[static_cast<size_t>(j)] = acc;
        }

        // mean-of-prefix block
        const size_t n = state.ids.size();
        if (n > 0) {
            const double inv = 1.0 / static_cast<double>(n);
            for (int id : state.ids) {
                double* g_row = g + off_embed_ + static_cast<size_t>(id) * E;
                for (int e = 0; e < E; ++e) g_row[e] += g_feat[static_cast<size_t>(e)] * inv;
            }
        }
        // window blocks
        for (int k = 0; k < K; ++k) {
            long long pos = static_cast<long long>(n) - K + k;
            if (pos < 0) continue;
            int id = state.ids[static_cast<size_t>(pos)];
            double* g_row = g + off_embed_ + static_cast<size_t>(id) * E;
            const double* src = g_feat.data() + static_cast<size_t>(E) * (1 + k);
            for (int e = 0; e < E; ++e) g_row[e] += src[e];
        }

        push_token(state, y);
    }
    return total_logp;
}

std::vector<double> ToyLm::correct_probability_grad(const std::string& prompt,
                                                    const Numeral& truth, int max_len,
                                                    double temperature) const {
    std::vector<double> grad(params_.size(), 0.0);
    for (const auto& c : enumerate_completions(prompt, max_len, temperature, true)) {
        auto extracted = extract_answer(c.text);
        if (extracted && *extracted == truth) {
            add_logprob_grad(prompt, c.text, temperature, c.prob, grad);
        }
    }
    return grad;
}

void ToyLm::set_params(std::vector<double> params) {
    if (params.size() != params_.size()) {
        throw std::invalid_argument("parameter vector has wrong size");
    }
    params_ = std::move(params);
}

void ToyLm::axpy_params(double alpha, std::span<const double> direction) {
    if (direction.size() != params_.size()) {
        throw std::invalid_argument("direction vector has wrong size");
    }
    for (size_t i = 0; i < params_.size(); ++i) params_[i] += alpha * direction[i];
}

void ToyLm::save(const std::filesystem::path& path) const {
    json j;
    j["kind"] = "toy-lm";
    j["charset"] = cfg_.charset;
    j["embed_dim"] = cfg_.embed_dim;
    j["hidden_dim"] = cfg_.hidden_dim;
    j["window"] = cfg_.window;
    j["init_scale"] = cfg_.init_scale;
    j["init_seed"] = cfg_.init_seed;
    j["params"] = params_;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ToyLm ToyLm::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw std::runtime_error("not a toy model file: " + path.string());
    }
    ToyLmConfig cfg;
    cfg.charset = j.at("charset").get<std::string>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.window = j.at("window").get<int>();
    cfg.init_scale = j.value("init_scale", 0.0);
    cfg.init_seed = j.value("init_seed", uint64_t{0});
    // Avoid re-running random init; params come from the file.
    ToyLmConfig build_cfg = cfg;
    build_cfg.init_scale = 0.0;
    ToyLm model(build_cfg);
    model.cfg_.init_scale = cfg.init_scale;
    model.cfg_.init_seed = cfg.init_seed;
    model.set_params(j.at("params").get<std::vector<double>>());
    return model;
}

void TuneConfig::validate() const {
    if (lr < 0) throw std::invalid_argument("learning rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (warmup_ratio < 0 || warmup_ratio >= 1) {
        throw std::invalid_argument("warmup ratio must be in [0, 1)");
    }
}

TrainingError::TrainingError(int step_index, const std::string& message)
    : std::runtime_error("training failed at step " + std::to_string(step_index) + ": " + message),
      step(step_index) {}

double toy_loss(const ToyLm& model, std::span<const TuneExample> batch) {
    if (batch.empty()) throw std::invalid_argument("toy_loss: empty batch");
    double total = 0.0;
    for (const auto& ex : batch) total -= model.score(ex.prompt, ex.target, 1.0);
    return total / static_cast<double>(batch.size());
}

std::vector<double> toy_loss_grad(const ToyLm& model, std::span<const TuneExample> batch) {
    if (batch.empty()) throw std::invalid_argument("toy_loss_grad: empty batch");
    std::vector<double> grad(model.param_count(), 0.0);
    const double w = -1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) model.add_logprob_grad(ex.prompt, ex.target, 1.0, w, grad);
    return grad;
}

ToyLm finetune(const ToyLm& model, std::span<const TuneExample> dataset, const TuneConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("finetune: empty dataset");

    ToyLm tuned = model;
    const size_t n = dataset.size();
    const long steps_per_epoch =
        static_cast<long>((n + static_cast<size_t>(cfg.batch_size) - 1) / cfg.batch_size);
    const long total_steps = steps_per_epoch * cfg.epochs;
    const long warmup_steps = static_cast<long>(cfg.warmup_ratio * static_cast<double>(total_steps));

    auto lr_at = [&](long step) {
        if (cfg.schedule == TuneConfig::Schedule::Constant) return cfg.lr;
        if (step < warmup_steps) {
            return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
        }
        const long decay_span = std::max<long>(1, total_steps - warmup_steps);
        const double t = static_cast<double>(step - warmup_steps) / static_cast<double>(decay_span);
        return cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
    };

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, "finetune"));
    std::vector<double> grad(tuned.param_count());

    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t begin = 0; begin < n; begin += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(n, begin + static_cast<size_t>(cfg.batch_size));
            const double w = -1.0 / static_cast<double>(end - begin);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (size_t i = begin; i < end; ++i) {
                const TuneExample& ex = dataset[order[i]];
                batch_loss += w * tuned.add_logprob_grad(ex.prompt, ex.target, 1.0, w, grad);
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainingError(static_cast<int>(step), "non-finite loss");
            }
            const double lr = lr_at(step);
            if (lr != 0.0) tuned.axpy_params(-lr, grad);
            ++step;
        }
    }
    return tuned;
}

}  // namespace ntkeval::lm
