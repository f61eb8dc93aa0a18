#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntkeval/category.hpp"
#include "ntkeval/lm.hpp"
#include "ntkeval/toy_lm.hpp"

namespace ntkeval::est {

// One evaluation question: prompt text as the model sees it plus the
// ground-truth answer.
struct EvalItem {
    std::string id;
    std::string prompt;
    Numeral truth;
};

// +1 iff the extracted answer exists and equals the ground truth, else -1.
// A missing extraction counts as wrong: an absent answer cannot match a
// deterministic solution.
int sign_score(const std::optional<Numeral>& extracted, const Numeral& truth);

struct EstimatorParams {
    int n_generations = 200;
    double temperature = 0.1;
    int max_new_tokens = 16;
    uint64_t seed = 0;
    // When set, log probability ratios are clamped to +-clamp_log_ratio
    // before exponentiation (safety on served models). Off by default so
    // oracle tests see the raw estimator.
    std::optional<double> clamp_log_ratio;
    // 0 = normal-approximation std_error over per-question contributions;
    // > 0 resamples the questions that many times instead (small-n option).
    int bootstrap_replicates = 0;
};

struct KernelEstimate {
    double value = 0.0;      // probability-difference units
    double std_error = 0.0;  // sample std of per-question contributions / sqrt(n)
    int n_generations = 0;
    int n_questions = 0;
    std::vector<double> per_question;
    std::vector<double> per_question_se;  // Monte-Carlo error of each contribution
    long clamped_terms = 0;
    double temperature = 0.0;
    uint64_t seed = 0;
};

struct EstimateError : std::runtime_error {
    EstimateError(const std::string& question_id, const std::string& message);
    std::string question_id;
};

// Importance-sampling estimate of p1(correct|x) - p0(correct|x): sample N
// completions from model0 per question, rescore each under model1, and
// average (p1/p0 - 1) * s / 2 where s is the sign score. The wrong-answer
// half acts as a control variate; the 1/2 makes the estimator unbiased for
// the probability difference (the signed sum alone has expectation
// 2*(p1-p0) because total probability movement is zero).
// model0 == model1 yields exactly zero, not just in expectation.
KernelEstimate ntkeval_pair(const lm::LmApi& model0, const lm::LmApi& model1,
                            std::span<const EvalItem> evalset, const EstimatorParams& params);

struct AccuracyParams {
    int n_generations = 200;
    double temperature = 0.1;
    int max_new_tokens = 16;
    uint64_t seed0 = 0;  // arm sampling from model0
    uint64_t seed1 = 0;  // arm sampling from model1; equal seeds pair the arms
    int bootstrap_replicates = 0;  // as in EstimatorParams
};

// Plain accuracy difference: fraction correct over n_generations samples from
// model1 minus the same under model0, per question, then averaged.
KernelEstimate accuracy_diff(const lm::LmApi& model0, const lm::LmApi& model1,
                             std::span<const EvalItem> evalset, const AccuracyParams& params);

// Skills-by-skills grid: columns are the training skills (the tuned models),
// rows are the evaluation skills.
struct KernelMatrix {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<KernelEstimate> cells;  // row-major
    std::vector<uint8_t> cell_done;

    std::string model0_id;
    std::string metric = "ntkeval";  // or "accuracy_diff"
    int n_generations = 0;
    double temperature = 0.0;
    uint64_t seed = 0;

    KernelEstimate& at(size_t row, size_t col);
    const KernelEstimate& at(size_t row, size_t col) const;
    bool complete() const;
    std::vector<double> values() const;  // row-major cell values
};

using MatrixCheckpoint = std::function<void(const KernelMatrix&)>;

// Evaluates every (row eval set, column model) pair with ntkeval_pair.
// Cells get independent derived seeds, so results do not depend on worker
// scheduling; the checkpoint callback (if any) runs after each finished cell
// under a lock, for incremental persistence.
KernelMatrix kernel_matrix(
    const lm::LmApi& model0,
    const std::vector<std::pair<std::string, const lm::LmApi*>>& tuned_columns,
    const std::vector<std::pair<std::string, std::vector<EvalItem>>>& eval_rows,
    const EstimatorParams& params, int workers = 1, const MatrixCheckpoint& checkpoint = {});

// Same grid with accuracy_diff cells (metric "accuracy_diff"). Cell seeds
// derive from seed0/seed1, so runs differing only in n_generations share
// their sampling streams.
KernelMatrix accuracy_matrix(
    const lm::LmApi& model0,
    const std::vector<std::pair<std::string, const lm::LmApi*>>& tuned_columns,
    const std::vector<std::pair<std::string, std::vector<EvalItem>>>& eval_rows,
    const AccuracyParams& params, int workers = 1, const MatrixCheckpoint& checkpoint = {});

// Toy-model convenience: fine-tunes one column model per training set, then
// delegates to kernel_matrix. control = nullptr compares against `base`.
KernelMatrix kernel_matrix_toy(
    const lm::ToyLm& base,
    const std::vector<std::pair<std::string, std::vector<lm::TuneExample>>>& train_columns,
    const std::vector<std::pair<std::string, std::vector<EvalItem>>>& eval_rows,
    const lm::TuneConfig& tune, const EstimatorParams& params, const lm::LmApi* control = nullptr,
    int workers = 1, const MatrixCheckpoint& checkpoint = {});

// Long-form tabular persistence: one CSV row per cell (value, std_error, and
// the cell's own seed/N/temperature) plus a JSON sidecar with matrix
// metadata and completeness flags.
void save_matrix(const KernelMatrix& m, const std::filesystem::path& csv_path);
KernelMatrix load_matrix(const std::filesystem::path& csv_path);

struct DeepSurfaceMeans {
    double deep = 0.0;
    double surface = 0.0;
};

// Arithmetic means over the deep-category entries and the surface-category
// entries. Throws if either class is missing.
DeepSurfaceMeans aggregate_deep_surface(
    const std::vector<std::pair<data::Category, double>>& results);

struct TargetedRow {
    std::string label;
    double targeted = 0.0;       // diagonal entry
    double offdiag_mean = 0.0;   // mean of the row's other entries
    double difficulty = 0.0;     // baseline accuracy axis; NaN when not joined
};

// Splits a square matrix into per-row (diagonal, off-diagonal mean) pairs,
// joined with a per-skill difficulty axis when provided.
std::vector<TargetedRow> targeted_vs_offdiagonal(const KernelMatrix& m);
std::vector<TargetedRow> targeted_vs_offdiagonal(const KernelMatrix& m,
                                                 const std::map<std::string, double>& difficulty);

// Element-wise Pearson correlation of cell values between two same-shape
// matrices (sample-efficiency comparisons).
double matrix_pearson(const KernelMatrix& a, const KernelMatrix& b);

}  // namespace ntkeval::est
