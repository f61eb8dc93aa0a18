// Command-line entry point: dataset builds, toy-model tuning, accuracy
// evaluation, kernel/ICL experiment matrices, and report rendering.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "ntkeval/dataset.hpp"
#include "ntkeval/estimator.hpp"
#include "ntkeval/harness.hpp"
#include "ntkeval/hash.hpp"
#include "ntkeval/lm_cache.hpp"
#include "ntkeval/remote_lm.hpp"
#include "ntkeval/report.hpp"
#include "ntkeval/toy_lm.hpp"

namespace fs = std::filesystem;
using namespace ntkeval;

namespace {

struct RunDir {
    fs::path dir;
    std::map<std::string, std::string> input_hashes;
    std::vector<std::string> outputs;

    explicit RunDir(const std::string& out) : dir(out) { fs::create_directories(dir); }

    fs::path path(const std::string& name) {
        outputs.push_back(name);
        return dir / name;
    }

    void note_input(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) return;
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        input_hashes[p.string()] = hex64(fnv1a(bytes));
    }

    void finalize(const CLI::App& app, const std::string& command, uint64_t seed) {
        {
            std::ofstream cfg(dir / "resolved_config.ini");
            cfg << app.config_to_str(true, true);
        }
        nlohmann::json manifest;
        manifest["command"] = command;
        manifest["seed"] = seed;
        manifest["inputs"] = input_hashes;
        manifest["outputs"] = outputs;
        std::ofstream out(dir / "run_manifest.json");
        out << manifest.dump(2) << '\n';
    }
};

// Model references: "toy:<path>", "remote:<url>", or a bare path to a toy
// model file. Remote endpoints read the auth token from NTKEVAL_AUTH_TOKEN.
struct LoadedModel {
    std::unique_ptr<lm::ToyLm> toy;
    std::unique_ptr<lm::RemoteLm> remote;
    std::unique_ptr<lm::CachedLm> cached;
    lm::LmApi* api = nullptr;
    bool is_toy() const { return toy != nullptr; }
};

LoadedModel load_model(const std::string& ref, const std::string& cache_path,
                       double timeout_seconds) {
    LoadedModel m;
    if (ref.rfind("remote:", 0) == 0) {
        lm::RemoteConfig cfg;
        cfg.endpoint = ref.substr(7);
        cfg.timeout_seconds = timeout_seconds;
        if (const char* token = std::getenv("NTKEVAL_AUTH_TOKEN")) cfg.auth_token = token;
        m.remote = std::make_unique<lm::RemoteLm>(cfg);
        m.api = m.remote.get();
    } else {
        std::string path = ref.rfind("toy:", 0) == 0 ? ref.substr(4) : ref;
        m.toy = std::make_unique<lm::ToyLm>(lm::ToyLm::load(path));
        m.api = m.toy.get();
    }
    if (!cache_path.empty()) {
        m.cached = std::make_unique<lm::CachedLm>(*m.api, cache_path);
        m.api = m.cached.get();
    }
    return m;
}

harness::PromptSpec prompt_spec(const std::string& name, int k) {
    harness::PromptSpec spec;
    if (name == "bare") {
        spec = harness::PromptSpec::bare(k);
    } else if (name == "standard") {
        spec.k = k;
    } else {
        throw CLI::ValidationError("--prompt", "expected 'standard' or 'bare'");
    }
    return spec;
}

std::vector<data::ProblemRecord> pick_split(const data::DatasetSplit& split,
                                            const std::string& which) {
    if (which == "train") return split.train;
    if (which == "test") return split.test;
    throw CLI::ValidationError("--split", "expected 'train' or 'test'");
}

std::map<std::string, double> read_difficulty(const fs::path& path) {
    std::map<std::string, double> out;
    for (const auto& row : report::read_table_csv(path)) {
        if (row.size() < 2 || row[0] == "category") continue;
        out[row[0]] = std::stod(row[1]);
    }
    return out;
}

void write_difficulty(const std::map<std::string, double>& difficulty, const fs::path& path) {
    std::ofstream out(path);
    out << "# baseline accuracy per category (difficulty axis)\n";
    out << "category,accuracy\n";
    out.precision(17);
    for (const auto& [label, acc] : difficulty) out << label << ',' << acc << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skill-kernel evaluation engine"};
    app.set_version_flag("--version", "ntkeval 0.1.0");
    app.set_config("--config", "", "key = value config file with [subcommand] sections");
    app.require_subcommand(1);

    // ---------------------------------------------------------------- gen-data
    auto* gen = app.add_subcommand("gen-data", "build synthetic datasets or load skill files");
    std::string gen_kind, gen_out, gen_src, gen_name;
    int gen_train = 100, gen_test = 100;
    uint64_t gen_seed = 0;
    long long max_abs = 1'000'000;
    gen->add_option("--kind", gen_kind, "v1 | v2 | random | khanskill")->required();
    gen->add_option("--out", gen_out, "run directory")->required();
    gen->add_option("--name", gen_name, "output file name (default <kind>.jsonl)");
    gen->add_option("--n-train", gen_train, "train records per cell (v1) or per skill (v2)");
    gen->add_option("--n-test", gen_test, "test records per cell (v1) or per skill (v2)");
    gen->add_option("--src", gen_src, "source file (random: record file; khanskill: skill file)");
    gen->add_option("--seed", gen_seed, "generation / split seed");
    gen->add_option("--max-abs", max_abs, "bound on intermediate values");

    // -------------------------------------------------------------------- tune
    auto* tune = app.add_subcommand("tune", "fine-tune a toy model on a record file");
    std::string tune_base, tune_data, tune_out, tune_prompt = "bare", tune_schedule = "cosine";
    std::string tune_init_charset = "default";
    bool tune_init = false;
    int tune_embed = 12, tune_hidden = 32, tune_window = 16;
    double tune_init_scale = 0.4;
    uint64_t tune_init_seed = 0;
    lm::TuneConfig tune_cfg;
    tune->add_option("--base", tune_base, "toy model file to start from");
    tune->add_flag("--init", tune_init, "start from a freshly initialized toy model");
    tune->add_option("--charset", tune_init_charset, "charset for --init ('default' or literal)");
    tune->add_option("--embed", tune_embed, "embedding dim for --init");
    tune->add_option("--hidden", tune_hidden, "hidden dim for --init");
    tune->add_option("--window", tune_window, "context window for --init");
    tune->add_option("--init-scale", tune_init_scale, "init scale for --init (0 = uniform)");
    tune->add_option("--init-seed", tune_init_seed, "init seed for --init");
    tune->add_option("--data", tune_data, "record file; its train split is used")->required();
    tune->add_option("--out", tune_out, "run directory")->required();
    tune->add_option("--lr", tune_cfg.lr, "learning rate");
    tune->add_option("--batch-size", tune_cfg.batch_size, "batch size");
    tune->add_option("--epochs", tune_cfg.epochs, "epochs");
    tune->add_option("--warmup-ratio", tune_cfg.warmup_ratio, "warmup fraction of steps");
    tune->add_option("--schedule", tune_schedule, "cosine | constant");
    tune->add_option("--seed", tune_cfg.seed, "shuffle seed");
    tune->add_option("--prompt", tune_prompt, "standard | bare prompt serialization");

    // -------------------------------------------------------------------- eval
    auto* eval = app.add_subcommand("eval", "per-category accuracy of a model on a record file");
    std::string eval_model, eval_data, eval_baseline, eval_out, eval_split = "test";
    std::string eval_prompt = "standard", eval_cache;
    harness::ExperimentConfig eval_cfg;
    eval->add_option("--model", eval_model, "toy:<path> or remote:<url>")->required();
    eval->add_option("--data", eval_data, "record file")->required();
    eval->add_option("--baseline", eval_baseline, "random-answer record file -> 'rand' column");
    eval->add_option("--out", eval_out, "run directory")->required();
    eval->add_option("--split", eval_split, "train | test (default test)");
    eval->add_option("--n", eval_cfg.n_generations, "generations per question");
    eval->add_option("--temperature", eval_cfg.temperature, "sampling temperature");
    eval->add_option("--max-new-tokens", eval_cfg.max_new_tokens, "generation length cap");
    eval->add_option("--seed", eval_cfg.seed, "sampling seed");
    eval->add_option("--prompt", eval_prompt, "standard | bare");
    eval->add_option("--cache", eval_cache, "completion cache file");

    // ------------------------------------------------------------------ kernel
    auto* kernel = app.add_subcommand(
        "kernel", "instruction-tuning kernel matrices and the sample-efficiency study");
    std::string k_mode = "it", k_base, k_train, k_eval, k_control = "raw", k_control_data,
                k_out, k_prompt = "bare", k_cache;
    std::vector<std::string> k_tuned;
    harness::ExperimentConfig k_cfg = harness::ExperimentConfig::tuned_defaults();
    int k_small = 200, k_large = 5000, k_rounds = 2;
    double k_clamp = 0.0;
    uint64_t k_control_seed = 0;
    kernel->add_option("--mode", k_mode, "it | sample-efficiency | deep-surface");
    kernel->add_option("--base", k_base, "base model (toy:<path>; columns are fine-tuned)");
    kernel->add_option("--tuned", k_tuned,
                       "label=model reference for pre-tuned columns (repeatable; skips "
                       "fine-tuning, works with remote models)");
    kernel->add_option("--train-data", k_train, "record file; train split groups the columns");
    kernel->add_option("--eval-data", k_eval, "record file; test split groups the rows");
    kernel->add_option("--control", k_control, "raw | random-tuned");
    kernel->add_option("--control-data", k_control_data,
                       "control record file (default: random baseline of --train-data)");
    kernel->add_option("--control-seed", k_control_seed, "seed for the built-in random baseline");
    kernel->add_option("--out", k_out, "run directory")->required();
    kernel->add_option("--n", k_cfg.n_generations, "generations per question (it mode)");
    kernel->add_option("--n-small", k_small, "small generation count (sample-efficiency)");
    kernel->add_option("--n-large", k_large, "converged generation count (sample-efficiency)");
    kernel->add_option("--rounds", k_rounds, "question rounds per skill (sample-efficiency)");
    kernel->add_option("--temperature", k_cfg.temperature, "sampling temperature");
    kernel->add_option("--max-new-tokens", k_cfg.max_new_tokens, "generation length cap");
    kernel->add_option("--seed", k_cfg.seed, "estimator seed");
    kernel->add_option("--workers", k_cfg.workers, "parallel cells");
    kernel->add_option("--clamp", k_clamp, "clamp |log ratio| (0 = off)");
    kernel->add_option("--bootstrap", k_cfg.bootstrap_replicates,
                       "bootstrap replicates for std errors (0 = normal approximation)");
    kernel->add_option("--lr", k_cfg.tune.lr, "column fine-tune learning rate");
    kernel->add_option("--batch-size", k_cfg.tune.batch_size, "column fine-tune batch size");
    kernel->add_option("--epochs", k_cfg.tune.epochs, "column fine-tune epochs");
    kernel->add_option("--warmup-ratio", k_cfg.tune.warmup_ratio, "column warmup ratio");
    kernel->add_option("--tune-seed", k_cfg.tune.seed, "column fine-tune seed");
    kernel->add_option("--prompt", k_prompt, "standard | bare");
    kernel->add_option("--cache", k_cache, "completion cache file (remote columns)");

    // --------------------------------------------------------------------- icl
    auto* icl = app.add_subcommand("icl", "in-context skill-prompting matrices");
    std::string icl_mode = "matrix", icl_model, icl_pool, icl_test, icl_out,
                icl_prompt = "standard", icl_group = "primary", icl_cache;
    harness::ExperimentConfig icl_cfg = harness::ExperimentConfig::icl_defaults();
    icl->add_option("--mode", icl_mode, "matrix | deep-surface");
    icl->add_option("--model", icl_model, "toy:<path> or remote:<url>")->required();
    icl->add_option("--pool", icl_pool, "record file; train split is the example pool")
        ->required();
    icl->add_option("--test", icl_test, "record file; test split is evaluated");
    icl->add_option("--out", icl_out, "run directory")->required();
    icl->add_option("--group-by", icl_group, "primary | secondary category labels");
    icl->add_option("--k", icl_cfg.prompt.k, "in-context examples per prompt");
    icl->add_option("--n", icl_cfg.n_generations, "generations per question");
    icl->add_option("--temperature", icl_cfg.temperature, "sampling temperature");
    icl->add_option("--max-new-tokens", icl_cfg.max_new_tokens, "generation length cap");
    icl->add_option("--seed", icl_cfg.seed, "selection/sampling seed");
    icl->add_option("--prompt", icl_prompt, "standard | bare");
    icl->add_option("--cache", icl_cache, "completion cache file");

    // ------------------------------------------------------------------ report
    auto* rep = app.add_subcommand("report", "render matrices into heatmaps and tables");
    std::string r_matrix, r_out, r_title = "kernel matrix", r_difficulty;
    bool r_heatmap = false, r_table = false, r_scatter = false;
    rep->add_option("--matrix", r_matrix, "matrix csv produced by kernel/icl")->required();
    rep->add_option("--out", r_out, "run directory")->required();
    rep->add_option("--title", r_title, "heatmap title");
    rep->add_flag("--heatmap", r_heatmap, "write <matrix>.svg");
    rep->add_flag("--table", r_table, "write wide-format csv");
    rep->add_flag("--scatter", r_scatter, "write targeted/off-diagonal scatter data");
    rep->add_option("--difficulty", r_difficulty, "category,accuracy csv for the scatter x-axis");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            RunDir run(gen_out);
            expr::GenConfig cfg;
            cfg.max_abs_value = max_abs;
            cfg.seed = gen_seed;
            data::DatasetSplit split;
            if (gen_kind == "v1") {
                split = data::build_synthetic_v1(cfg, gen_train, gen_test, gen_seed);
            } else if (gen_kind == "v2") {
                split = data::build_synthetic_v2(cfg, gen_train, gen_seed, gen_test);
            } else if (gen_kind == "random") {
                if (gen_src.empty()) throw CLI::ValidationError("--src", "required for random");
                run.note_input(gen_src);
                split = data::build_random_baseline(data::read_records(gen_src), gen_seed);
            } else if (gen_kind == "khanskill") {
                if (gen_src.empty()) {
                    throw CLI::ValidationError("--src", "required for khanskill");
                }
                run.note_input(gen_src);
                split = data::load_khanskill(gen_src, gen_seed);
            } else {
                throw CLI::ValidationError("--kind", "expected v1|v2|random|khanskill");
            }
            std::string name = gen_name.empty() ? gen_kind + ".jsonl" : gen_name;
            data::write_records(split, run.path(name));
            std::cout << "wrote " << split.train.size() << " train / " << split.test.size()
                      << " test records to " << (run.dir / name).string() << "\n";
            run.finalize(app, "gen-data", gen_seed);
        } else if (*tune) {
            RunDir run(tune_out);
            if (tune_init && !tune_base.empty()) {
                throw CLI::ValidationError("--base", "give either --base or --init, not both");
            }
            if (!tune_init && tune_base.empty()) {
                throw CLI::ValidationError("--base", "give --base or --init");
            }
            std::optional<lm::ToyLm> base;
            if (tune_init) {
                lm::ToyLmConfig cfg;
                cfg.charset = tune_init_charset == "default"
                                  ? lm::ToyLmConfig::default_charset()
                                  : tune_init_charset;
                cfg.embed_dim = tune_embed;
                cfg.hidden_dim = tune_hidden;
                cfg.window = tune_window;
                cfg.init_scale = tune_init_scale;
                cfg.init_seed = tune_init_seed;
                base.emplace(cfg);
            } else {
                run.note_input(tune_base);
                base.emplace(lm::ToyLm::load(tune_base));
            }
            run.note_input(tune_data);
            data::DatasetSplit split = data::read_records(tune_data);
            if (split.train.empty()) throw std::runtime_error("no train records in " + tune_data);
            tune_cfg.schedule = tune_schedule == "constant" ? lm::TuneConfig::Schedule::Constant
                                                            : lm::TuneConfig::Schedule::Cosine;
            auto examples = harness::make_tune_examples(prompt_spec(tune_prompt, 0), split.train);
            double before = lm::toy_loss(*base, examples);
            lm::ToyLm tuned = lm::finetune(*base, examples, tune_cfg);
            double after = lm::toy_loss(tuned, examples);
            tuned.save(run.path("model.json"));
            std::cout << "loss " << before << " -> " << after << "; model id "
                      << tuned.model_id() << "\n";
            run.finalize(app, "tune", tune_cfg.seed);
        } else if (*eval) {
            RunDir run(eval_out);
            run.note_input(eval_data);
            LoadedModel model = load_model(eval_model, eval_cache, 60.0);
            data::DatasetSplit split = data::read_records(eval_data);
            harness::PromptSpec spec = prompt_spec(eval_prompt, 0);
            eval_cfg.prompt = spec;

            std::vector<std::pair<std::string, std::vector<est::EvalItem>>> groups;
            if (!eval_baseline.empty()) {
                run.note_input(eval_baseline);
                data::DatasetSplit baseline = data::read_records(eval_baseline);
                groups.emplace_back("rand", harness::make_eval_items(
                                                spec, pick_split(baseline, eval_split)));
            }
            for (auto& [label, records] :
                 harness::group_records(pick_split(split, eval_split))) {
                groups.emplace_back(label, harness::make_eval_items(spec, records));
            }
            harness::AccuracyTable table = harness::evaluate_accuracy(*model.api, groups,
                                                                      eval_cfg);
            report::write_accuracy_table(table, run.path("accuracy.csv"));
            std::cout << "overall accuracy " << table.overall << " over "
                      << table.total_questions << " questions\n";
            run.finalize(app, "eval", eval_cfg.seed);
        } else if (*kernel) {
            RunDir run(k_out);
            if (k_clamp > 0) k_cfg.clamp_log_ratio = k_clamp;
            k_cfg.prompt = prompt_spec(k_prompt, 0);
            k_cfg.control = k_control == "random-tuned"
                                ? harness::ExperimentConfig::ControlKind::RandomTuned
                                : harness::ExperimentConfig::ControlKind::RawBase;

            run.note_input(k_eval);
            data::DatasetSplit eval_split_data = data::read_records(k_eval);
            auto eval_sets = harness::group_records(eval_split_data.test);

            if (!k_tuned.empty()) {
                // Pre-tuned columns (typically remote endpoints).
                LoadedModel model0 = load_model(k_base, k_cache, 120.0);
                std::vector<LoadedModel> columns_storage;
                std::vector<std::pair<std::string, const lm::LmApi*>> columns;
                for (const auto& entry : k_tuned) {
                    auto pos = entry.find('=');
                    if (pos == std::string::npos) {
                        throw CLI::ValidationError("--tuned", "expected label=model");
                    }
                    columns_storage.push_back(
                        load_model(entry.substr(pos + 1), k_cache, 120.0));
                    columns.emplace_back(entry.substr(0, pos), columns_storage.back().api);
                }
                std::vector<std::pair<std::string, std::vector<est::EvalItem>>> rows;
                for (auto& [label, records] : eval_sets) {
                    rows.emplace_back(label, harness::make_eval_items(k_cfg.prompt, records));
                }
                est::EstimatorParams params;
                params.n_generations = k_cfg.n_generations;
                params.temperature = k_cfg.temperature;
                params.max_new_tokens = k_cfg.max_new_tokens;
                params.seed = k_cfg.seed;
                params.clamp_log_ratio = k_cfg.clamp_log_ratio;
                params.bootstrap_replicates = k_cfg.bootstrap_replicates;
                fs::path matrix_path = run.path("kernel_matrix.csv");
                est::KernelMatrix m = est::kernel_matrix(
                    *model0.api, columns, rows, params, k_cfg.workers,
                    [&](const est::KernelMatrix& partial) {
                        est::save_matrix(partial, matrix_path);
                    });
                est::save_matrix(m, matrix_path);
                std::cout << "kernel matrix " << m.row_labels.size() << "x"
                          << m.col_labels.size() << " written\n";
                run.finalize(app, "kernel", k_cfg.seed);
                return 0;
            }

            run.note_input(k_train);
            data::DatasetSplit train_split_data = data::read_records(k_train);
            auto train_sets = harness::group_records(train_split_data.train);

            std::vector<data::ProblemRecord> control_train;
            if (k_cfg.control == harness::ExperimentConfig::ControlKind::RandomTuned) {
                if (!k_control_data.empty()) {
                    run.note_input(k_control_data);
                    control_train = data::read_records(k_control_data).train;
                } else {
                    control_train =
                        data::build_random_baseline(train_split_data, k_control_seed).train;
                }
            }

            LoadedModel base = load_model(k_base, "", 120.0);
            if (!base.is_toy()) {
                throw std::runtime_error(
                    "kernel fine-tuning needs a toy base model; use --tuned for remote columns");
            }

            if (k_mode == "it") {
                fs::path matrix_path = run.path("kernel_matrix.csv");
                est::KernelMatrix m = harness::it_experiment(*base.toy, train_sets, eval_sets,
                                                             control_train, k_cfg);
                est::save_matrix(m, matrix_path);
                auto summary = est::targeted_vs_offdiagonal(m);
                double gap = 0.0;
                for (const auto& row : summary) gap += row.targeted - row.offdiag_mean;
                std::cout << "kernel matrix written; mean targeted - offdiagonal gap "
                          << gap / static_cast<double>(summary.size()) << "\n";
            } else if (k_mode == "sample-efficiency") {
                harness::SampleEfficiencyResult r = harness::sample_efficiency_experiment(
                    *base.toy, train_sets, eval_sets, control_train, k_small, k_large, k_cfg,
                    k_rounds);
                est::save_matrix(r.accuracy_small, run.path("accuracy_small.csv"));
                est::save_matrix(r.ntkeval_small, run.path("ntkeval_small.csv"));
                est::save_matrix(r.accuracy_large, run.path("accuracy_large.csv"));
                double c_ntk = est::matrix_pearson(r.ntkeval_small, r.accuracy_large);
                double c_acc = est::matrix_pearson(r.accuracy_small, r.accuracy_large);
                std::ofstream summary(run.path("efficiency_summary.csv"));
                summary << "# element-wise Pearson correlation against the converged matrix\n";
                summary << "estimator,n,correlation\n";
                summary.precision(17);
                summary << "ntkeval," << k_small << ',' << c_ntk << '\n';
                summary << "accuracy_diff," << k_small << ',' << c_acc << '\n';
                std::cout << "correlation vs converged: ntkeval " << c_ntk << ", accuracy "
                          << c_acc << "\n";
            } else if (k_mode == "deep-surface") {
                harness::DeepSurfaceResult r = harness::deep_surface_it(
                    *base.toy, train_split_data, control_train, k_cfg);
                report::write_deep_surface_table({{base.toy->model_id(), {r.deep_mean,
                                                                          r.surface_mean}}},
                                                 run.path("deep_surface.csv"));
                std::cout << "deep mean " << r.deep_mean << ", surface mean " << r.surface_mean
                          << "\n";
            } else {
                throw CLI::ValidationError("--mode", "expected it|sample-efficiency|deep-surface");
            }
            run.finalize(app, "kernel", k_cfg.seed);
        } else if (*icl) {
            RunDir run(icl_out);
            run.note_input(icl_pool);
            LoadedModel model = load_model(icl_model, icl_cache, 60.0);
            icl_cfg.prompt = prompt_spec(icl_prompt, icl_cfg.prompt.k);
            data::DatasetSplit pool = data::read_records(icl_pool);

            if (icl_mode == "matrix") {
                if (icl_test.empty()) throw CLI::ValidationError("--test", "required for matrix");
                run.note_input(icl_test);
                data::DatasetSplit tests = data::read_records(icl_test);
                harness::GroupBy by = icl_group == "secondary" ? harness::GroupBy::Secondary
                                                               : harness::GroupBy::Primary;
                harness::IclResult result = harness::icl_experiment(*model.api, pool.train,
                                                                    tests.test, by, icl_cfg);
                est::save_matrix(result.as_matrix(), run.path("icl_matrix.csv"));
                std::map<std::string, double> difficulty;
                for (size_t r = 0; r < result.row_labels.size(); ++r) {
                    difficulty[result.row_labels[r]] = result.standard_accuracy[r];
                }
                write_difficulty(difficulty, run.path("standard_accuracy.csv"));
                std::cout << "icl matrix " << result.row_labels.size() << "x"
                          << result.col_labels.size() << " written\n";
            } else if (icl_mode == "deep-surface") {
                harness::DeepSurfaceResult r = harness::deep_surface_icl(*model.api, pool,
                                                                         icl_cfg);
                report::write_deep_surface_table(
                    {{model.api->model_id(), {r.deep_mean, r.surface_mean}}},
                    run.path("deep_surface.csv"));
                std::cout << "deep mean " << r.deep_mean << ", surface mean " << r.surface_mean
                          << "\n";
            } else {
                throw CLI::ValidationError("--mode", "expected matrix|deep-surface");
            }
            run.finalize(app, "icl", icl_cfg.seed);
        } else if (*rep) {
            RunDir run(r_out);
            run.note_input(r_matrix);
            est::KernelMatrix m = est::load_matrix(r_matrix);
            if (r_heatmap) report::render_heatmap(m, run.path("heatmap.svg"), r_title);
            if (r_table) report::write_matrix_table(m, run.path("matrix_table.csv"));
            if (r_scatter) {
                if (r_difficulty.empty()) {
                    throw CLI::ValidationError("--difficulty", "required for --scatter");
                }
                run.note_input(r_difficulty);
                auto rows = est::targeted_vs_offdiagonal(m, read_difficulty(r_difficulty));
                report::write_scatter_data(rows, run.path("scatter.csv"));
            }
            std::cout << "report artifacts written to " << run.dir.string() << "\n";
            run.finalize(app, "report", 0);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
