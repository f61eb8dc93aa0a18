#include <benchmark/benchmark.h>

#include "ntkeval/estimator.hpp"
#include "ntkeval/expr.hpp"
#include "ntkeval/toy_lm.hpp"

using namespace ntkeval;

namespace {

lm::ToyLm bench_model(std::string charset, int embed, int hidden, int window) {
    lm::ToyLmConfig cfg;
    cfg.charset = std::move(charset);
    cfg.embed_dim = embed;
    cfg.hidden_dim = hidden;
    cfg.window = window;
    cfg.init_scale = 0.4;
    cfg.init_seed = 1;
    return lm::ToyLm(cfg);
}

void BM_gen_expr(benchmark::State& state) {
    expr::GenConfig cfg;
    expr::Rng rng(7);
    auto skill = static_cast<expr::Skill>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(expr::gen_expr(skill, cfg, rng));
    }
}
BENCHMARK(BM_gen_expr)->DenseRange(0, 5)->Unit(benchmark::kMicrosecond);

void BM_render_parse_roundtrip(benchmark::State& state) {
    expr::GenConfig cfg;
    expr::Rng rng(7);
    std::vector<std::string> questions;
    for (int i = 0; i < 256; ++i) {
        questions.push_back(
            expr::render(expr::gen_expr(expr::Skill::Cplex, cfg, rng),
                         expr::SurfaceFormat::Question, rng));
    }
    size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(expr::eval_expr(expr::parse_question(questions[i++ % 256])));
    }
}
BENCHMARK(BM_render_parse_roundtrip)->Unit(benchmark::kMicrosecond);

void BM_toy_score(benchmark::State& state) {
    lm::ToyLm model = bench_model(lm::ToyLmConfig::default_charset(), 12, 32, 16);
    const std::string prompt = "Instruction: What is 28 + 134?\nResponse:";
    const std::string completion = " 162";
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.score(prompt, completion, 1.0));
    }
}
BENCHMARK(BM_toy_score)->Unit(benchmark::kMicrosecond);

void BM_toy_generate(benchmark::State& state) {
    lm::ToyLm model = bench_model(lm::ToyLmConfig::default_charset(), 12, 32, 16);
    const std::string prompt = "Instruction: What is 28 + 134?\nResponse:";
    lm::GenParams params;
    params.n = static_cast<int>(state.range(0));
    params.temperature = 1.0;
    params.max_new_tokens = 8;
    uint64_t seed = 0;
    for (auto _ : state) {
        params.seed = ++seed;
        benchmark::DoNotOptimize(model.generate(prompt, params));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_toy_generate)->Arg(10)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_toy_loss_grad(benchmark::State& state) {
    lm::ToyLm model = bench_model(lm::ToyLmConfig::default_charset(), 12, 32, 16);
    std::vector<lm::TuneExample> batch;
    for (int i = 0; i < 8; ++i) {
        batch.push_back({"Instruction: What is 1" + std::to_string(i) + " + 7?\nResponse:",
                         " 2" + std::to_string(i) + std::string(1, lm::ToyLm::kStopChar)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(lm::toy_loss_grad(model, batch));
    }
}
BENCHMARK(BM_toy_loss_grad)->Unit(benchmark::kMillisecond);

void BM_enumerate_completions(benchmark::State& state) {
    lm::ToyLm model = bench_model("01234+=", 4, 6, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            model.enumerate_completions("1+2=", static_cast<int>(state.range(0)), 1.0, true));
    }
}
BENCHMARK(BM_enumerate_completions)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_ntkeval_pair(benchmark::State& state) {
    lm::ToyLm m0 = bench_model("01234+=", 4, 6, 4);
    lm::ToyLm m1 = bench_model("01234+=", 4, 6, 4);
    std::vector<double> nudged = m1.params();
    for (auto& p : nudged) p += 1e-3;
    m1.set_params(nudged);

    std::vector<est::EvalItem> items;
    for (const char* q : {"1+1=", "2+2=", "1+2="}) {
        items.push_back({q, q, *Numeral::parse("4")});
    }
    est::EstimatorParams params;
    params.n_generations = static_cast<int>(state.range(0));
    params.temperature = 1.0;
    params.max_new_tokens = 3;
    for (auto _ : state) {
        ++params.seed;
        benchmark::DoNotOptimize(est::ntkeval_pair(m0, m1, items, params));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * items.size());
}
BENCHMARK(BM_ntkeval_pair)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
