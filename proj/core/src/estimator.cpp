#include "ntkeval/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

#include "ntkeval/hash.hpp"

namespace ntkeval::est {

using nlohmann::json;

int sign_score(const std::optional<Numeral>& extracted, const Numeral& truth) {
    return (extracted && *extracted == truth) ? 1 : -1;
}

EstimateError::EstimateError(const std::string& qid, const std::string& message)
    : std::runtime_error("estimate aborted on question " + qid + ": " + message),
      question_id(qid) {}

namespace {

void require_same_tokenizer(const lm::LmApi& model0, const lm::LmApi& model1) {
    if (model0.tokenizer_id() != model1.tokenizer_id()) {
        throw std::invalid_argument("tokenizer mismatch between models: " + model0.tokenizer_id() +
                                    " vs " + model1.tokenizer_id());
    }
}

void finalize(KernelEstimate& est, int bootstrap_replicates) {
    const size_t n = est.per_question.size();
    est.n_questions = static_cast<int>(n);
    if (n == 0) return;
    double mean = std::accumulate(est.per_question.begin(), est.per_question.end(), 0.0) /
                  static_cast<double>(n);
    est.value = mean;
    if (n < 2) return;
    if (bootstrap_replicates > 0) {
        // resample questions with replacement; std of the replicate means
        std::mt19937_64 rng(derive_seed(est.seed, "bootstrap"));
        std::uniform_int_distribution<size_t> pick(0, n - 1);
        double rep_sum = 0.0, rep_sq = 0.0;
        for (int rep = 0; rep < bootstrap_replicates; ++rep) {
            double acc = 0.0;
            for (size_t i = 0; i < n; ++i) acc += est.per_question[pick(rng)];
            double rep_mean = acc / static_cast<double>(n);
            rep_sum += rep_mean;
            rep_sq += rep_mean * rep_mean;
        }
        const double b = static_cast<double>(bootstrap_replicates);
        double var = std::max(0.0, (rep_sq - rep_sum * rep_sum / b) / (b - 1));
        est.std_error = std::sqrt(var);
        return;
    }
    double ss = 0.0;
    for (double v : est.per_question) ss += (v - mean) * (v - mean);
    est.std_error = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

}  // namespace

KernelEstimate ntkeval_pair(const lm::LmApi& model0, const lm::LmApi& model1,
                            std::span<const EvalItem> evalset, const EstimatorParams& params) {
    if (evalset.empty()) throw std::invalid_argument("ntkeval_pair: empty evalset");
    if (params.n_generations < 1) throw std::invalid_argument("n_generations must be >= 1");
    require_same_tokenizer(model0, model1);

    KernelEstimate est;
    est.n_generations = params.n_generations;
    est.temperature = params.temperature;
    est.seed = params.seed;

    for (const EvalItem& item : evalset) {
        try {
            lm::GenParams gen;
            gen.n = params.n_generations;
            gen.temperature = params.temperature;
            gen.max_new_tokens = params.max_new_tokens;
            gen.seed = derive_seed(params.seed, "gen", item.id);
            auto completions = model0.generate(item.prompt, gen);

            double sum = 0.0, sum_sq = 0.0;
            for (const auto& c : completions) {
                const int s = sign_score(c.extracted_answer, item.truth);
                double log_ratio = model1.score(item.prompt, c.text, params.temperature) -
                                   c.logp_base;
                if (params.clamp_log_ratio) {
                    const double cap = *params.clamp_log_ratio;
                    if (log_ratio > cap || log_ratio < -cap) {
                        ++est.clamped_terms;
                        log_ratio = std::clamp(log_ratio, -cap, cap);
                    }
                }
                // (p1/p0 - 1) * s / 2: unbiased for p1(y|x) - p0(y|x).
                const double term = (std::exp(log_ratio) - 1.0) * s * 0.5;
                sum += term;
                sum_sq += term * term;
            }
            const double n = static_cast<double>(params.n_generations);
            const double mean = sum / n;
            est.per_question.push_back(mean);
            double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
            est.per_question_se.push_back(std::sqrt(var / n));
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw EstimateError(item.id, e.what());
        }
    }
    finalize(est, params.bootstrap_replicates);
    return est;
}

KernelEstimate accuracy_diff(const lm::LmApi& model0, const lm::LmApi& model1,
                             std::span<const EvalItem> evalset, const AccuracyParams& params) {
    if (evalset.empty()) throw std::invalid_argument("accuracy_diff: empty evalset");
    if (params.n_generations < 1) throw std::invalid_argument("n_generations must be >= 1");
    require_same_tokenizer(model0, model1);

    KernelEstimate est;
    est.n_generations = params.n_generations;
    est.temperature = params.temperature;
    est.seed = params.seed0;

    auto fraction_correct = [&](const lm::LmApi& model, const EvalItem& item, uint64_t seed) {
        lm::GenParams gen;
        gen.n = params.n_generations;
        gen.temperature = params.temperature;
        gen.max_new_tokens = params.max_new_tokens;
        gen.seed = derive_seed(seed, "acc", item.id);
        int correct = 0;
        for (const auto& c : model.generate(item.prompt, gen)) {
            if (sign_score(c.extracted_answer, item.truth) > 0) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(params.n_generations);
    };

    for (const EvalItem& item : evalset) {
        try {
            double acc1 = fraction_correct(model1, item, params.seed1);
            double acc0 = fraction_correct(model0, item, params.seed0);
            est.per_question.push_back(acc1 - acc0);
            const double n = static_cast<double>(params.n_generations);
            const double correction = n > 1 ? n / (n - 1) : 1.0;
            est.per_question_se.push_back(
                std::sqrt(correction * (acc1 * (1 - acc1) + acc0 * (1 - acc0)) / n));
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw EstimateError(item.id, e.what());
        }
    }
    finalize(est, params.bootstrap_replicates);
    return est;
}

KernelEstimate& KernelMatrix::at(size_t row, size_t col) {
    return cells.at(row * col_labels.size() + col);
}

const KernelEstimate& KernelMatrix::at(size_t row, size_t col) const {
    return cells.at(row * col_labels.size() + col);
}

bool KernelMatrix::complete() const {
    return std::all_of(cell_done.begin(), cell_done.end(), [](uint8_t b) { return b != 0; });
}

std::vector<double> KernelMatrix::values() const {
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(c.value);
    return out;
}

namespace {

// Shared grid scaffolding: cells are independent, each gets its own derived
// seed, results merge under one lock so scheduling cannot change them.
template <class CellFn>
KernelMatrix run_matrix(const lm::LmApi& model0,
                        const std::vector<std::pair<std::string, const lm::LmApi*>>& tuned_columns,
                        const std::vector<std::pair<std::string, std::vector<EvalItem>>>& eval_rows,
                        int workers, const MatrixCheckpoint& checkpoint, KernelMatrix m,
                        CellFn&& cell_fn) {
    if (tuned_columns.empty() || eval_rows.empty()) {
        throw std::invalid_argument("matrix: empty rows or columns");
    }
    for (const auto& [label, _] : eval_rows) m.row_labels.push_back(label);
    for (const auto& [label, _] : tuned_columns) m.col_labels.push_back(label);
    m.cells.assign(m.row_labels.size() * m.col_labels.size(), KernelEstimate{});
    m.cell_done.assign(m.cells.size(), 0);
    m.model0_id = model0.model_id();

    const size_t n_cells = m.cells.size();
    const size_t n_cols = m.col_labels.size();
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex done_mutex;
    std::exception_ptr failure;

    auto worker = [&]() {
        for (;;) {
            if (failed.load()) return;
            size_t idx = next.fetch_add(1);
            if (idx >= n_cells) return;
            size_t row = idx / n_cols;
            size_t col = idx % n_cols;
            try {
                KernelEstimate e = cell_fn(row, col);
                std::lock_guard<std::mutex> lock(done_mutex);
                m.cells[idx] = std::move(e);
                m.cell_done[idx] = 1;
                if (checkpoint) checkpoint(m);
            } catch (...) {
                std::lock_guard<std::mutex> lock(done_mutex);
                if (!failure) failure = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };

    int n_workers = std::max(1, workers);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return m;
}

std::string cell_tag(const std::vector<std::pair<std::string, std::vector<EvalItem>>>& rows,
                     const std::vector<std::pair<std::string, const lm::LmApi*>>& cols, size_t row,
                     size_t col) {
    return rows[row].first + "|" + cols[col].first;
}

}  // namespace

KernelMatrix kernel_matrix(
    const lm::LmApi& model0,
    const std::vector<std::pair<std::string, const lm::LmApi*>>& tuned_columns,
    const std::vector<std::pair<std::string, std::vector<EvalItem>>>& eval_rows,
    const EstimatorParams& params, int workers, const MatrixCheckpoint& checkpoint) {
    KernelMatrix meta;
    meta.metric = "ntkeval";
    meta.n_generations = params.n_generations;
    meta.temperature = params.temperature;
    meta.seed = params.seed;
    return run_matrix(model0, tuned_columns, eval_rows, workers, checkpoint, std::move(meta),
                      [&](size_t row, size_t col) {
                          EstimatorParams cell = params;
                          cell.seed = derive_seed(params.seed, "cell",
                                                  cell_tag(eval_rows, tuned_columns, row, col));
                          return ntkeval_pair(model0, *tuned_columns[col].second,
                                              eval_rows[row].second, cell);
                      });
}

KernelMatrix accuracy_matrix(
    const lm::LmApi& model0,
    const std::vector<std::pair<std::string, const lm::LmApi*>>& tuned_columns,
    const std::vector<std::pair<std::string, std::vector<EvalItem>>>& eval_rows,
    const AccuracyParams& params, int workers, const MatrixCheckpoint& checkpoint) {
    KernelMatrix meta;
    meta.metric = "accuracy_diff";
    meta.n_generations = params.n_generations;
    meta.temperature = params.temperature;
    meta.seed = params.seed0;
    return run_matrix(model0, tuned_columns, eval_rows, workers, checkpoint, std::move(meta),
                      [&](size_t row, size_t col) {
                          AccuracyParams cell = params;
                          const std::string tag = cell_tag(eval_rows, tuned_columns, row, col);
                          cell.seed0 = derive_seed(params.seed0, "cell", tag);
                          cell.seed1 = derive_seed(params.seed1, "cell", tag);
                          return accuracy_diff(model0, *tuned_columns[col].second,
                                               eval_rows[row].second, cell);
                      });
}

KernelMatrix kernel_matrix_toy(
    const lm::ToyLm& base,
    const std::vector<std::pair<std::string, std::vector<lm::TuneExample>>>& train_columns,
    const std::vector<std::pair<std::string, std::vector<EvalItem>>>& eval_rows,
    const lm::TuneConfig& tune, const EstimatorParams& params, const lm::LmApi* control,
    int workers, const MatrixCheckpoint& checkpoint) {
    std::vector<lm::ToyLm> tuned;
    tuned.reserve(train_columns.size());
    for (const auto& [label, examples] : train_columns) {
        lm::TuneConfig col_cfg = tune;
        col_cfg.seed = derive_seed(tune.seed, "tune-column", label);
        tuned.push_back(lm::finetune(base, examples, col_cfg));
    }
    std::vector<std::pair<std::string, const lm::LmApi*>> columns;
    for (size_t i = 0; i < tuned.size(); ++i) {
        columns.emplace_back(train_columns[i].first, &tuned[i]);
    }
    const lm::LmApi& model0 = control ? *control : static_cast<const lm::LmApi&>(base);
    return kernel_matrix(model0, columns, eval_rows, params, workers, checkpoint);
}

void save_matrix(const KernelMatrix& m, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + csv_path.string());
    out << "row,col,value,std_error,n_questions,n_generations,temperature,seed,clamped,done\n";
    out.precision(17);
    for (size_t r = 0; r < m.row_labels.size(); ++r) {
        for (size_t c = 0; c < m.col_labels.size(); ++c) {
            const KernelEstimate& e = m.at(r, c);
            out << m.row_labels[r] << ',' << m.col_labels[c] << ',' << e.value << ','
                << e.std_error << ',' << e.n_questions << ',' << e.n_generations << ','
                << e.temperature << ',' << e.seed << ',' << e.clamped_terms << ','
                << int(m.cell_done[r * m.col_labels.size() + c]) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + csv_path.string());

    json meta;
    meta["model0_id"] = m.model0_id;
    meta["metric"] = m.metric;
    meta["n_generations"] = m.n_generations;
    meta["temperature"] = m.temperature;
    meta["seed"] = m.seed;
    meta["rows"] = m.row_labels;
    meta["cols"] = m.col_labels;
    meta["complete"] = m.complete();
    std::ofstream meta_out(csv_path.string() + ".meta.json");
    meta_out << meta.dump(2) << '\n';
}

KernelMatrix load_matrix(const std::filesystem::path& csv_path) {
    std::ifstream meta_in(csv_path.string() + ".meta.json");
    if (!meta_in) throw std::runtime_error("cannot open matrix sidecar for " + csv_path.string());
    json meta = json::parse(meta_in);

    KernelMatrix m;
    m.row_labels = meta.at("rows").get<std::vector<std::string>>();
    m.col_labels = meta.at("cols").get<std::vector<std::string>>();
    m.model0_id = meta.value("model0_id", "");
    m.metric = meta.value("metric", "ntkeval");
    m.n_generations = meta.value("n_generations", 0);
    m.temperature = meta.value("temperature", 0.0);
    m.seed = meta.value("seed", uint64_t{0});
    m.cells.assign(m.row_labels.size() * m.col_labels.size(), KernelEstimate{});
    m.cell_done.assign(m.cells.size(), 0);

    std::map<std::string, size_t> row_index, col_index;
    for (size_t i = 0; i < m.row_labels.size(); ++i) row_index[m.row_labels[i]] = i;
    for (size_t i = 0; i < m.col_labels.size(); ++i) col_index[m.col_labels[i]] = i;

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open: " + csv_path.string());
    std::string line;
    std::getline(in, line);  // header
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 10) {
            throw std::runtime_error(csv_path.string() + ":" + std::to_string(line_no) +
                                     ": expected 10 fields");
        }
        auto row_it = row_index.find(fields[0]);
        auto col_it = col_index.find(fields[1]);
        if (row_it == row_index.end() || col_it == col_index.end()) {
            throw std::runtime_error(csv_path.string() + ":" + std::to_string(line_no) +
                                     ": unknown row/col label");
        }
        KernelEstimate e;
        e.value = std::stod(fields[2]);
        e.std_error = std::stod(fields[3]);
        e.n_questions = std::stoi(fields[4]);
        e.n_generations = std::stoi(fields[5]);
        e.temperature = std::stod(fields[6]);
        e.seed = std::stoull(fields[7]);
        e.clamped_terms = std::stol(fields[8]);
        size_t idx = row_it->second * m.col_labels.size() + col_it->second;
        m.cell_done[idx] = fields[9] == "1" ? 1 : 0;
        m.cells[idx] = std::move(e);
    }
    return m;
}

DeepSurfaceMeans aggregate_deep_surface(
    const std::vector<std::pair<data::Category, double>>& results) {
    double deep_sum = 0.0, surface_sum = 0.0;
    int deep_n = 0, surface_n = 0;
    for (const auto& [category, value] : results) {
        switch (category.kind()) {
            case data::Category::Kind::Deep:
                deep_sum += value;
                ++deep_n;
                break;
            case data::Category::Kind::Surface:
                surface_sum += value;
                ++surface_n;
                break;
            case data::Category::Kind::Named: break;
        }
    }
    if (deep_n == 0 || surface_n == 0) {
        throw std::invalid_argument("aggregate_deep_surface: missing deep or surface entries");
    }
    return {deep_sum / deep_n, surface_sum / surface_n};
}

std::vector<TargetedRow> targeted_vs_offdiagonal(const KernelMatrix& m) {
    return targeted_vs_offdiagonal(m, {});
}

std::vector<TargetedRow> targeted_vs_offdiagonal(
    const KernelMatrix& m, const std::map<std::string, double>& difficulty) {
    if (m.row_labels.size() != m.col_labels.size() || m.row_labels != m.col_labels) {
        throw std::invalid_argument("targeted_vs_offdiagonal: matrix is not square over matching "
                                    "categories");
    }
    const size_t n = m.row_labels.size();
    if (n < 2) throw std::invalid_argument("targeted_vs_offdiagonal: need at least 2 categories");

    std::vector<TargetedRow> out;
    for (size_t r = 0; r < n; ++r) {
        TargetedRow row;
        row.label = m.row_labels[r];
        row.targeted = m.at(r, r).value;
        double sum = 0.0;
        for (size_t c = 0; c < n; ++c) {
            if (c != r) sum += m.at(r, c).value;
        }
        row.offdiag_mean = sum / static_cast<double>(n - 1);
        auto it = difficulty.find(row.label);
        row.difficulty = it != difficulty.end() ? it->second
                                                : std::numeric_limits<double>::quiet_NaN();
        out.push_back(std::move(row));
    }
    return out;
}

double matrix_pearson(const KernelMatrix& a, const KernelMatrix& b) {
    if (a.cells.size() != b.cells.size() || a.cells.empty()) {
        throw std::invalid_argument("matrix_pearson: shape mismatch");
    }
    const auto va = a.values();
    const auto vb = b.values();
    const double n = static_cast<double>(va.size());
    double ma = std::accumulate(va.begin(), va.end(), 0.0) / n;
    double mb = std::accumulate(vb.begin(), vb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < va.size(); ++i) {
        double da = va[i] - ma;
        double db = vb[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace ntkeval::est
