#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntkeval/dataset.hpp"
#include "ntkeval/estimator.hpp"
#include "ntkeval/prompt.hpp"

namespace ntkeval::harness {

// Knobs shared by the experiment drivers. Defaults follow the evaluation
// protocol used throughout: in-context runs sample 10 generations at
// temperature 0.1; instruction-tuned model evaluation uses 100 generations
// at temperature 1 (see the per-experiment factories).
struct ExperimentConfig {
    PromptSpec prompt;
    int n_generations = 10;
    double temperature = 0.1;
    int max_new_tokens = 16;
    uint64_t seed = 0;
    int workers = 1;
    std::optional<double> clamp_log_ratio;
    int bootstrap_replicates = 0;  // 0 = normal-approximation std errors
    enum class ControlKind { RawBase, RandomTuned } control = ControlKind::RawBase;
    lm::TuneConfig tune;

    static ExperimentConfig icl_defaults();   // 10 generations @ 0.1
    static ExperimentConfig tuned_defaults(); // 100 generations @ 1.0, lr 2e-3
    static ExperimentConfig convergence_defaults();  // 200 @ 0.1, lr 2e-5
};

enum class GroupBy { Primary, Secondary };

std::string group_label(const data::ProblemRecord& r, GroupBy by);

// Records grouped by category label in canonical category order.
std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>> group_records(
    std::span<const data::ProblemRecord> records, GroupBy by = GroupBy::Primary);

// First n records of each group, preserving group order ("the first k rounds"
// question subset of the convergence protocol).
std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>> take_per_group(
    std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>> groups, int n);

struct IclResult {
    std::vector<std::string> row_labels;  // evaluated-on categories
    std::vector<std::string> col_labels;  // prompted-with categories
    std::vector<double> diff;             // row-major: acc(grouped) - acc(standard)
    std::vector<double> standard_accuracy;  // per row

    std::string model_id;
    int n_generations = 0;
    double temperature = 0.0;
    uint64_t seed = 0;
    uint64_t pool_hash = 0;
    uint64_t test_hash = 0;

    double at(size_t row, size_t col) const { return diff.at(row * col_labels.size() + col); }
    est::KernelMatrix as_matrix() const;  // for report/targeted summaries
};

// Skill-prompting matrix: for each column category, prompts carry k examples
// from that category's pool; every cell is paired against standard prompting
// (k examples from the whole pool) with the same per-question seeds, so the
// difference is attributable to the grouping alone.
IclResult icl_experiment(const lm::LmApi& model, std::span<const data::ProblemRecord> pool,
                         std::span<const data::ProblemRecord> tests, GroupBy grouping,
                         const ExperimentConfig& cfg);

// Per-category accuracy of standard (random-pool) k-shot prompting; the
// difficulty axis of the targeted/off-diagonal summaries.
std::map<std::string, double> standard_prompting_accuracy(
    const lm::LmApi& model, std::span<const data::ProblemRecord> pool,
    std::span<const data::ProblemRecord> tests, GroupBy grouping, const ExperimentConfig& cfg);

// Instruction-tuning kernel matrix on the toy model: one fine-tune per
// training category, estimates against the configured control (raw base or
// a model tuned on the random-answer control set).
est::KernelMatrix it_experiment(
    const lm::ToyLm& base,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& train_sets,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& eval_sets,
    std::span<const data::ProblemRecord> control_train, const ExperimentConfig& cfg);

struct DeepSurfaceResult {
    std::vector<std::pair<data::Category, double>> per_category;
    double deep_mean = 0.0;
    double surface_mean = 0.0;
};

// Same-structure comparisons over the 4 deep and 4 surface categories of a
// dual-labeled pool: each category trains/prompts and evaluates within its
// own slice, then the per-class means are reported side by side.
DeepSurfaceResult deep_surface_icl(const lm::LmApi& model, const data::DatasetSplit& v1,
                                   const ExperimentConfig& cfg);
DeepSurfaceResult deep_surface_it(const lm::ToyLm& base, const data::DatasetSplit& v1,
                                  std::span<const data::ProblemRecord> control_train,
                                  const ExperimentConfig& cfg);

struct SampleEfficiencyResult {
    est::KernelMatrix accuracy_small;  // accuracy_diff @ n_small
    est::KernelMatrix ntkeval_small;   // ntkeval @ n_small
    est::KernelMatrix accuracy_large;  // accuracy_diff @ n_large (converged reference)
};

// Three matrices over the same tuned columns and the same question subset
// (first `rounds` questions per evaluation category).
SampleEfficiencyResult sample_efficiency_experiment(
    const lm::ToyLm& base,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& train_sets,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& eval_sets,
    std::span<const data::ProblemRecord> control_train, int n_small, int n_large,
    const ExperimentConfig& cfg, int rounds = 2);

struct AccuracyTable {
    struct Row {
        std::string label;
        double accuracy = 0.0;
        int n_questions = 0;
    };
    std::vector<Row> rows;
    double overall = 0.0;
    int total_questions = 0;

    std::string model_id;
    int n_generations = 0;
    double temperature = 0.0;
    uint64_t seed = 0;
};

// Fraction of generations whose extracted answer matches ground truth, per
// category group plus overall.
AccuracyTable evaluate_accuracy(
    const lm::LmApi& model,
    const std::vector<std::pair<std::string, std::vector<est::EvalItem>>>& groups,
    const ExperimentConfig& cfg);

}  // namespace ntkeval::harness
