#include "ntkeval/harness.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "ntkeval/hash.hpp"

namespace ntkeval::harness {

ExperimentConfig ExperimentConfig::icl_defaults() {
    ExperimentConfig cfg;
    cfg.n_generations = 10;
    cfg.temperature = 0.1;
    return cfg;
}

ExperimentConfig ExperimentConfig::tuned_defaults() {
    ExperimentConfig cfg;
    cfg.n_generations = 100;
    cfg.temperature = 1.0;
    cfg.tune.lr = 2e-3;
    return cfg;
}

ExperimentConfig ExperimentConfig::convergence_defaults() {
    ExperimentConfig cfg;
    cfg.n_generations = 200;
    cfg.temperature = 0.1;
    cfg.tune.lr = 2e-5;
    return cfg;
}

std::string group_label(const data::ProblemRecord& r, GroupBy by) {
    if (by == GroupBy::Secondary && r.category2) return r.category2->to_string();
    return r.category.to_string();
}

std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>> group_records(
    std::span<const data::ProblemRecord> records, GroupBy by) {
    std::map<data::Category, std::vector<data::ProblemRecord>> grouped;
    for (const auto& r : records) {
        const data::Category& key =
            (by == GroupBy::Secondary && r.category2) ? *r.category2 : r.category;
        grouped[key].push_back(r);
    }
    std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>> out;
    for (auto& [category, group] : grouped) {
        out.emplace_back(category.to_string(), std::move(group));
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>> take_per_group(
    std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>> groups, int n) {
    for (auto& [_, records] : groups) {
        if (records.size() > static_cast<size_t>(n)) {
            records.erase(records.begin() + n, records.end());
        }
    }
    return groups;
}

namespace {

uint64_t records_hash(std::span<const data::ProblemRecord> records) {
    uint64_t h = kFnvOffset;
    for (const auto& r : records) {
        h = fnv1a_u64(r.id, h);
        h = fnv1a(r.answer.str(), h);
    }
    return h;
}

// k examples without replacement from candidates (already excludes the test
// question), by partial Fisher-Yates on a copy. Deterministic given rng.
std::vector<data::ProblemRecord> sample_examples(
    const std::vector<const data::ProblemRecord*>& candidates, int k, expr::Rng& rng) {
    std::vector<const data::ProblemRecord*> pool = candidates;
    std::vector<data::ProblemRecord> out;
    out.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(std::uniform_int_distribution<size_t>(
                           0, pool.size() - 1 - static_cast<size_t>(i))(rng));
        std::swap(pool[static_cast<size_t>(i)], pool[j]);
        out.push_back(*pool[static_cast<size_t>(i)]);
    }
    return out;
}

std::vector<const data::ProblemRecord*> excluding(
    const std::vector<data::ProblemRecord>& records, uint64_t excluded_id) {
    std::vector<const data::ProblemRecord*> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.id != excluded_id) out.push_back(&r);
    }
    return out;
}

double prompt_accuracy(const lm::LmApi& model, const std::string& prompt, const Numeral& truth,
                       const ExperimentConfig& cfg, uint64_t gen_seed) {
    lm::GenParams params;
    params.n = cfg.n_generations;
    params.temperature = cfg.temperature;
    params.max_new_tokens = cfg.max_new_tokens;
    params.seed = gen_seed;
    int correct = 0;
    for (const auto& c : model.generate(prompt, params)) {
        if (est::sign_score(c.extracted_answer, truth) > 0) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(cfg.n_generations);
}

// Accuracy of one test question under k examples drawn from `candidates`.
// Selection and generation streams derive only from (seed, question id), so
// arms sharing a question share seeds no matter which pool they draw from.
double arm_accuracy(const lm::LmApi& model, const std::vector<data::ProblemRecord>& pool,
                    const data::ProblemRecord& q, const ExperimentConfig& cfg,
                    const std::string& pool_name) {
    auto candidates = excluding(pool, q.id);
    if (candidates.size() < static_cast<size_t>(cfg.prompt.k)) {
        throw std::invalid_argument("insufficient in-context pool for category " + pool_name +
                                    ": need " + std::to_string(cfg.prompt.k) + ", have " +
                                    std::to_string(candidates.size()));
    }
    expr::Rng sel_rng(derive_seed(cfg.seed, "sel", hex64(q.id)));
    auto examples = sample_examples(candidates, cfg.prompt.k, sel_rng);
    std::string prompt = build_icl_prompt(cfg.prompt, examples, q);
    return prompt_accuracy(model, prompt, q.answer, cfg, derive_seed(cfg.seed, "gen", hex64(q.id)));
}

}  // namespace

est::KernelMatrix IclResult::as_matrix() const {
    est::KernelMatrix m;
    m.row_labels = row_labels;
    m.col_labels = col_labels;
    m.metric = "icl_accuracy_diff";
    m.model0_id = model_id;
    m.n_generations = n_generations;
    m.temperature = temperature;
    m.seed = seed;
    m.cells.resize(diff.size());
    m.cell_done.assign(diff.size(), 1);
    for (size_t i = 0; i < diff.size(); ++i) {
        m.cells[i].value = diff[i];
        m.cells[i].n_generations = n_generations;
        m.cells[i].temperature = temperature;
        m.cells[i].seed = seed;
    }
    return m;
}

IclResult icl_experiment(const lm::LmApi& model, std::span<const data::ProblemRecord> pool,
                         std::span<const data::ProblemRecord> tests, GroupBy grouping,
                         const ExperimentConfig& cfg) {
    if (cfg.prompt.k < 1) throw std::invalid_argument("icl_experiment: prompt.k must be >= 1");
    auto pool_groups = group_records(pool, grouping);
    auto test_groups = group_records(tests, grouping);
    if (pool_groups.empty() || test_groups.empty()) {
        throw std::invalid_argument("icl_experiment: empty pool or test set");
    }
    std::vector<data::ProblemRecord> whole_pool(pool.begin(), pool.end());

    IclResult result;
    for (const auto& [label, _] : test_groups) result.row_labels.push_back(label);
    for (const auto& [label, _] : pool_groups) result.col_labels.push_back(label);
    result.model_id = model.model_id();
    result.n_generations = cfg.n_generations;
    result.temperature = cfg.temperature;
    result.seed = cfg.seed;
    result.pool_hash = records_hash(pool);
    result.test_hash = records_hash(tests);
    result.diff.assign(result.row_labels.size() * result.col_labels.size(), 0.0);

    // Standard arm once per question; it does not depend on the column.
    std::map<uint64_t, double> standard_acc;
    for (const auto& [row_label, row_tests] : test_groups) {
        double sum = 0.0;
        for (const auto& q : row_tests) {
            double acc = arm_accuracy(model, whole_pool, q, cfg, "standard pool");
            standard_acc[q.id] = acc;
            sum += acc;
        }
        result.standard_accuracy.push_back(sum / static_cast<double>(row_tests.size()));
    }

    for (size_t col = 0; col < pool_groups.size(); ++col) {
        const auto& col_pool = pool_groups[col].second;
        for (size_t row = 0; row < test_groups.size(); ++row) {
            const auto& row_tests = test_groups[row].second;
            double sum = 0.0;
            for (const auto& q : row_tests) {
                double acc = arm_accuracy(model, col_pool, q, cfg, pool_groups[col].first);
                sum += acc - standard_acc.at(q.id);
            }
            result.diff[row * result.col_labels.size() + col] =
                sum / static_cast<double>(row_tests.size());
        }
    }
    return result;
}

std::map<std::string, double> standard_prompting_accuracy(
    const lm::LmApi& model, std::span<const data::ProblemRecord> pool,
    std::span<const data::ProblemRecord> tests, GroupBy grouping, const ExperimentConfig& cfg) {
    auto test_groups = group_records(tests, grouping);
    std::vector<data::ProblemRecord> whole_pool(pool.begin(), pool.end());
    std::map<std::string, double> out;
    for (const auto& [label, row_tests] : test_groups) {
        double sum = 0.0;
        for (const auto& q : row_tests) {
            sum += arm_accuracy(model, whole_pool, q, cfg, "standard pool");
        }
        out[label] = sum / static_cast<double>(row_tests.size());
    }
    return out;
}

namespace {

est::EstimatorParams estimator_params(const ExperimentConfig& cfg) {
    est::EstimatorParams params;
    params.n_generations = cfg.n_generations;
    params.temperature = cfg.temperature;
    params.max_new_tokens = cfg.max_new_tokens;
    params.seed = cfg.seed;
    params.clamp_log_ratio = cfg.clamp_log_ratio;
    params.bootstrap_replicates = cfg.bootstrap_replicates;
    return params;
}

std::optional<lm::ToyLm> make_control(const lm::ToyLm& base,
                                      std::span<const data::ProblemRecord> control_train,
                                      const ExperimentConfig& cfg) {
    if (cfg.control == ExperimentConfig::ControlKind::RawBase) return std::nullopt;
    if (control_train.empty()) {
        throw std::invalid_argument("random-tuned control requested but control set is empty");
    }
    auto examples = make_tune_examples(cfg.prompt, control_train);
    lm::TuneConfig tune = cfg.tune;
    tune.seed = derive_seed(cfg.tune.seed, "tune-control");
    return lm::finetune(base, examples, tune);
}

}  // namespace

est::KernelMatrix it_experiment(
    const lm::ToyLm& base,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& train_sets,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& eval_sets,
    std::span<const data::ProblemRecord> control_train, const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<lm::TuneExample>>> train_columns;
    for (const auto& [label, records] : train_sets) {
        train_columns.emplace_back(label, make_tune_examples(cfg.prompt, records));
    }
    std::vector<std::pair<std::string, std::vector<est::EvalItem>>> eval_rows;
    for (const auto& [label, records] : eval_sets) {
        eval_rows.emplace_back(label, make_eval_items(cfg.prompt, records));
    }
    std::optional<lm::ToyLm> control = make_control(base, control_train, cfg);
    return est::kernel_matrix_toy(base, train_columns, eval_rows, cfg.tune,
                                  estimator_params(cfg), control ? &*control : nullptr,
                                  cfg.workers);
}

DeepSurfaceResult deep_surface_icl(const lm::LmApi& model, const data::DatasetSplit& v1,
                                   const ExperimentConfig& cfg) {
    DeepSurfaceResult result;
    std::vector<data::Category> categories;
    for (expr::Skill s : expr::kElementarySkills) categories.push_back(data::Category::deep(s));
    for (expr::SurfaceFormat f : expr::kAllFormats) categories.push_back(data::Category::surface(f));

    for (const data::Category& category : categories) {
        GroupBy by = category.kind() == data::Category::Kind::Surface ? GroupBy::Secondary
                                                                      : GroupBy::Primary;
        std::vector<data::ProblemRecord> group_pool, group_tests;
        for (const auto& r : v1.train) {
            if (group_label(r, by) == category.to_string()) group_pool.push_back(r);
        }
        for (const auto& r : v1.test) {
            if (group_label(r, by) == category.to_string()) group_tests.push_back(r);
        }
        if (group_tests.empty()) {
            throw std::invalid_argument("deep_surface_icl: no test records for " +
                                        category.to_string());
        }
        double sum = 0.0;
        for (const auto& q : group_tests) {
            double grouped = arm_accuracy(model, group_pool, q, cfg, category.to_string());
            double standard = arm_accuracy(model, v1.train, q, cfg, "standard pool");
            sum += grouped - standard;
        }
        result.per_category.emplace_back(category, sum / static_cast<double>(group_tests.size()));
    }
    auto means = est::aggregate_deep_surface(result.per_category);
    result.deep_mean = means.deep;
    result.surface_mean = means.surface;
    return result;
}

DeepSurfaceResult deep_surface_it(const lm::ToyLm& base, const data::DatasetSplit& v1,
                                  std::span<const data::ProblemRecord> control_train,
                                  const ExperimentConfig& cfg) {
    DeepSurfaceResult result;
    std::optional<lm::ToyLm> control = make_control(base, control_train, cfg);
    const lm::LmApi& model0 = control ? static_cast<const lm::LmApi&>(*control) : base;

    std::vector<data::Category> categories;
    for (expr::Skill s : expr::kElementarySkills) categories.push_back(data::Category::deep(s));
    for (expr::SurfaceFormat f : expr::kAllFormats) categories.push_back(data::Category::surface(f));

    for (const data::Category& category : categories) {
        GroupBy by = category.kind() == data::Category::Kind::Surface ? GroupBy::Secondary
                                                                      : GroupBy::Primary;
        std::vector<data::ProblemRecord> group_train, group_tests;
        for (const auto& r : v1.train) {
            if (group_label(r, by) == category.to_string()) group_train.push_back(r);
        }
        for (const auto& r : v1.test) {
            if (group_label(r, by) == category.to_string()) group_tests.push_back(r);
        }
        if (group_train.empty() || group_tests.empty()) {
            throw std::invalid_argument("deep_surface_it: empty slice for " + category.to_string());
        }
        lm::TuneConfig tune = cfg.tune;
        tune.seed = derive_seed(cfg.tune.seed, "tune-column", category.to_string());
        lm::ToyLm tuned = lm::finetune(base, make_tune_examples(cfg.prompt, group_train), tune);

        est::EstimatorParams params = estimator_params(cfg);
        params.seed = derive_seed(cfg.seed, "cell", category.to_string());
        auto items = make_eval_items(cfg.prompt, group_tests);
        result.per_category.emplace_back(category,
                                         est::ntkeval_pair(model0, tuned, items, params).value);
    }
    auto means = est::aggregate_deep_surface(result.per_category);
    result.deep_mean = means.deep;
    result.surface_mean = means.surface;
    return result;
}

SampleEfficiencyResult sample_efficiency_experiment(
    const lm::ToyLm& base,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& train_sets,
    const std::vector<std::pair<std::string, std::vector<data::ProblemRecord>>>& eval_sets,
    std::span<const data::ProblemRecord> control_train, int n_small, int n_large,
    const ExperimentConfig& cfg, int rounds) {
    if (n_small > n_large) {
        throw std::invalid_argument("sample_efficiency: n_small must be <= n_large");
    }

    // One fine-tune per column, shared across all three matrices.
    std::vector<lm::ToyLm> tuned;
    std::vector<std::pair<std::string, const lm::LmApi*>> columns;
    tuned.reserve(train_sets.size());
    for (const auto& [label, records] : train_sets) {
        lm::TuneConfig tune = cfg.tune;
        tune.seed = derive_seed(cfg.tune.seed, "tune-column", label);
        tuned.push_back(lm::finetune(base, make_tune_examples(cfg.prompt, records), tune));
    }
    for (size_t i = 0; i < tuned.size(); ++i) columns.emplace_back(train_sets[i].first, &tuned[i]);

    auto questions = take_per_group(eval_sets, rounds);
    std::vector<std::pair<std::string, std::vector<est::EvalItem>>> eval_rows;
    for (const auto& [label, records] : questions) {
        eval_rows.emplace_back(label, make_eval_items(cfg.prompt, records));
    }

    std::optional<lm::ToyLm> control = make_control(base, control_train, cfg);
    const lm::LmApi& model0 = control ? static_cast<const lm::LmApi&>(*control) : base;

    est::EstimatorParams ntk_params = estimator_params(cfg);
    ntk_params.n_generations = n_small;

    est::AccuracyParams acc_params;
    acc_params.temperature = cfg.temperature;
    acc_params.max_new_tokens = cfg.max_new_tokens;
    acc_params.seed0 = derive_seed(cfg.seed, "acc-arm0");
    acc_params.seed1 = derive_seed(cfg.seed, "acc-arm1");

    SampleEfficiencyResult result;
    acc_params.n_generations = n_small;
    result.accuracy_small = est::accuracy_matrix(model0, columns, eval_rows, acc_params,
                                                 cfg.workers);
    result.ntkeval_small = est::kernel_matrix(model0, columns, eval_rows, ntk_params, cfg.workers);
    acc_params.n_generations = n_large;
    result.accuracy_large = est::accuracy_matrix(model0, columns, eval_rows, acc_params,
                                                 cfg.workers);
    return result;
}

AccuracyTable evaluate_accuracy(
    const lm::LmApi& model,
    const std::vector<std::pair<std::string, std::vector<est::EvalItem>>>& groups,
    const ExperimentConfig& cfg) {
    AccuracyTable table;
    table.model_id = model.model_id();
    table.n_generations = cfg.n_generations;
    table.temperature = cfg.temperature;
    table.seed = cfg.seed;

    double weighted_sum = 0.0;
    for (const auto& [label, items] : groups) {
        if (items.empty()) continue;
        double sum = 0.0;
        for (const auto& item : items) {
            lm::GenParams params;
            params.n = cfg.n_generations;
            params.temperature = cfg.temperature;
            params.max_new_tokens = cfg.max_new_tokens;
            params.seed = derive_seed(cfg.seed, "acc", item.id);
            int correct = 0;
            for (const auto& c : model.generate(item.prompt, params)) {
                if (est::sign_score(c.extracted_answer, item.truth) > 0) ++correct;
            }
            sum += static_cast<double>(correct) / static_cast<double>(cfg.n_generations);
        }
        AccuracyTable::Row row;
        row.label = label;
        row.n_questions = static_cast<int>(items.size());
        row.accuracy = sum / static_cast<double>(items.size());
        weighted_sum += sum;
        table.total_questions += row.n_questions;
        table.rows.push_back(std::move(row));
    }
    if (table.total_questions > 0) {
        table.overall = weighted_sum / static_cast<double>(table.total_questions);
    }
    return table;
}

}  // namespace ntkeval::harness
