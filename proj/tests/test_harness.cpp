#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "ntkeval/dataset.hpp"
#include "ntkeval/harness.hpp"
#include "ntkeval/hash.hpp"

using namespace ntkeval;
using namespace ntkeval::harness;
using data::Category;
using data::DatasetSplit;
using data::ProblemRecord;
using lm::CompletionRecord;
using lm::GenParams;
using lm::LmApi;

namespace {

std::string last_instruction(const std::string& prompt) {
    size_t pos = prompt.rfind("Instruction: ");
    REQUIRE(pos != std::string::npos);
    pos += 13;
    size_t end = prompt.find('\n', pos);
    return prompt.substr(pos, end - pos);
}

std::vector<std::string> example_instructions(const std::string& prompt) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        size_t hit = prompt.find("Instruction: ", pos);
        if (hit == std::string::npos) break;
        size_t start = hit + 13;
        size_t end = prompt.find('\n', start);
        out.push_back(prompt.substr(start, end - start));
        pos = end;
    }
    if (!out.empty()) out.pop_back();  // last block is the test question
    return out;
}

char question_op(const std::string& question) {
    for (const char* pat : {" + ", " - ", " * ", " / "}) {
        if (question.find(pat) != std::string::npos) return pat[1];
    }
    return '?';
}

std::string question_format(const std::string& question) {
    if (question.rfind("What is ", 0) == 0) return "question";
    if (question.find(". A") != std::string::npos && question.find("=?") != std::string::npos) {
        return "symbolic";
    }
    for (const char* head : {"Add ", "Subtract ", "Multiply ", "Divide "}) {
        if (question.rfind(head, 0) == 0) return "instruction";
    }
    return "word";
}

// Answers the test question correctly with probability p_match when the
// majority feature of the in-context examples matches the test question's
// feature, else p_other. Feature = operator or surface format. Ground truth
// comes from a lookup of question text -> answer supplied by the test, or
// from parsing the question when no map is given.
class FeatureSensitiveStub : public LmApi {
public:
    enum class Feature { Operator, Format };
    FeatureSensitiveStub(Feature feature, double p_match, double p_other,
                         std::map<std::string, std::string> truths = {})
        : feature_(feature), p_match_(p_match), p_other_(p_other), truths_(std::move(truths)) {}

    std::vector<CompletionRecord> generate(const std::string& prompt,
                                           const GenParams& params) const override {
        const std::string test_q = last_instruction(prompt);
        auto examples = example_instructions(prompt);

        std::map<std::string, int> votes;
        for (const auto& q : examples) ++votes[feature_of(q)];
        std::string majority;
        int best = -1;
        for (const auto& [feature, count] : votes) {
            if (count > best) {
                best = count;
                majority = feature;
            }
        }
        const double p = (!examples.empty() && majority == feature_of(test_q)) ? p_match_
                                                                               : p_other_;
        std::string correct;
        if (auto it = truths_.find(test_q); it != truths_.end()) {
            correct = " " + it->second;
        } else {
            correct = " " + expr::to_numeral(expr::eval_expr(expr::parse_question(test_q))).str();
        }
        std::mt19937_64 rng(derive_seed(params.seed, "stub", fnv1a(prompt)));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<CompletionRecord> out;
        for (int i = 0; i < params.n; ++i) {
            CompletionRecord rec;
            rec.text = unif(rng) < p ? correct : " pass";
            rec.extracted_answer = extract_answer(rec.text);
            rec.logp_base = -1.0;
            rec.sample_index = i;
            out.push_back(std::move(rec));
        }
        return out;
    }

    double score(const std::string&, const std::string&, double) const override { return -1.0; }
    std::string model_id() const override { return "stub-feature"; }
    std::string tokenizer_id() const override { return "stub-tok"; }

private:
    std::string feature_of(const std::string& q) const {
        return feature_ == Feature::Operator ? std::string(1, question_op(q))
                                             : question_format(q);
    }

    Feature feature_;
    double p_match_;
    double p_other_;
    std::map<std::string, std::string> truths_;
};

// Ignores the prompt entirely; generations depend only on the seed.
class PromptBlindStub : public LmApi {
public:
    std::vector<CompletionRecord> generate(const std::string&,
                                           const GenParams& params) const override {
        std::mt19937_64 rng(derive_seed(params.seed, "blind"));
        std::vector<CompletionRecord> out;
        for (int i = 0; i < params.n; ++i) {
            CompletionRecord rec;
            rec.text = " " + std::to_string(rng() % 1000 + 1);
            rec.extracted_answer = extract_answer(rec.text);
            rec.logp_base = -1.0;
            rec.sample_index = i;
            out.push_back(std::move(rec));
        }
        return out;
    }
    double score(const std::string&, const std::string&, double) const override { return -1.0; }
    std::string model_id() const override { return "stub-blind"; }
    std::string tokenizer_id() const override { return "stub-tok"; }
};

// Always emits the ground-truth answer of the test question.
class EchoTruthStub : public LmApi {
public:
    std::vector<CompletionRecord> generate(const std::string& prompt,
                                           const GenParams& params) const override {
        std::string answer = " " + expr::to_numeral(expr::eval_expr(expr::parse_question(
                                       last_instruction(prompt)))).str();
        std::vector<CompletionRecord> out;
        for (int i = 0; i < params.n; ++i) {
            CompletionRecord rec;
            rec.text = answer;
            rec.extracted_answer = extract_answer(rec.text);
            rec.logp_base = -0.5;
            rec.sample_index = i;
            out.push_back(std::move(rec));
        }
        return out;
    }
    double score(const std::string&, const std::string&, double) const override { return -0.5; }
    std::string model_id() const override { return "stub-echo"; }
    std::string tokenizer_id() const override { return "stub-tok"; }
};

ProblemRecord make_record(const std::string& question, const std::string& answer,
                          Category category,
                          std::optional<Category> category2 = std::nullopt) {
    return ProblemRecord::make(std::move(category), question, *Numeral::parse(answer),
                               std::move(category2));
}

DatasetSplit elementary_question_pool(int n_train_per_skill, int n_test_per_skill,
                                      uint64_t seed) {
    DatasetSplit split;
    expr::GenConfig cfg;
    for (expr::Skill skill : expr::kElementarySkills) {
        expr::Rng rng(derive_seed(seed, "pool", expr::skill_name(skill)));
        std::set<uint64_t> seen;
        auto emit = [&](std::vector<ProblemRecord>& dst) {
            while (true) {
                expr::Expr e = expr::gen_expr(skill, cfg, rng);
                std::string q = expr::render(e, expr::SurfaceFormat::Question, rng);
                ProblemRecord rec = make_record(q, expr::to_numeral(expr::eval_expr(e)).str(),
                                                Category::deep(skill));
                if (!seen.insert(rec.id).second) continue;
                dst.push_back(std::move(rec));
                return;
            }
        };
        for (int i = 0; i < n_train_per_skill; ++i) emit(split.train);
        for (int i = 0; i < n_test_per_skill; ++i) emit(split.test);
    }
    return split;
}

}  // namespace

TEST_CASE("default prompt spec reproduces the reference template bytes") {
    std::vector<ProblemRecord> examples;
    examples.push_back(make_record("What is 712 - 486 ?", "226", Category::deep(expr::Skill::Sub)));
    examples.push_back(make_record("What is 434 - 363 ?", "71", Category::deep(expr::Skill::Sub)));
    for (int i = 0; i < 6; ++i) {
        int a = 900 - i * 17;
        int b = 123 + i * 31;
        examples.push_back(make_record("What is " + std::to_string(a) + " - " + std::to_string(b) +
                                           " ?",
                                       std::to_string(a - b), Category::deep(expr::Skill::Sub)));
    }

    // test question rendered from a fixed expression tree
    using expr::BinOp;
    using expr::Expr;
    Expr test_expr = Expr::node(
        BinOp::Sub,
        Expr::node(BinOp::Sub, Expr::node(BinOp::Mul, Expr::leaf(10), Expr::leaf(84)),
                   Expr::leaf(25)),
        Expr::node(BinOp::Div, Expr::leaf(0),
                   Expr::node(BinOp::Add, Expr::leaf(91), Expr::leaf(47))));
    expr::Rng rng(1);
    std::string test_text = expr::render(test_expr, expr::SurfaceFormat::Question, rng);
    CHECK(test_text == "What is 10*84-25-(0 / (91 + 47))?");
    ProblemRecord test_q = make_record(test_text, "815", Category::deep(expr::Skill::Cplex));

    PromptSpec spec;
    std::string prompt = build_icl_prompt(spec, examples, test_q);

    const std::string expected_prefix =
        "Below is an instruction that describes a task. Write a response that appropriately "
        "completes the request.\n"
        "Instruction: What is 712 - 486 ?\n"
        "Response: 226\n"
        "\n"
        "Instruction: What is 434 - 363 ?\n"
        "Response: 71\n"
        "\n";
    CHECK(prompt.substr(0, expected_prefix.size()) == expected_prefix);
    const std::string expected_suffix =
        "Instruction: What is 10*84-25-(0 / (91 + 47))?\n"
        "Response:";
    CHECK(prompt.substr(prompt.size() - expected_suffix.size()) == expected_suffix);

    PromptSpec zero = spec;
    zero.k = 0;
    std::string bare = build_icl_prompt(zero, {}, test_q);
    CHECK(bare == spec.header + "\n" + expected_suffix);
}

TEST_CASE("prompt construction rejects duplicates and wrong counts") {
    auto r1 = make_record("What is 1 + 1?", "2", Category::deep(expr::Skill::Add));
    auto r2 = make_record("What is 2 + 2?", "4", Category::deep(expr::Skill::Add));
    PromptSpec spec;
    spec.k = 2;
    CHECK_THROWS_AS((void)build_icl_prompt(spec, std::vector<ProblemRecord>{r1, r1}, r2),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)build_icl_prompt(spec, std::vector<ProblemRecord>{r1, r2}, r2),
                    std::invalid_argument);
    spec.k = 3;
    CHECK_THROWS_AS((void)build_icl_prompt(spec, std::vector<ProblemRecord>{r1, r2}, r2),
                    std::invalid_argument);
}

TEST_CASE("tune examples prefer worked solutions and end with the stop token") {
    PromptSpec spec = PromptSpec::bare(0);
    auto plain = make_record("What is 1 + 1?", "2", Category::deep(expr::Skill::Add));
    lm::TuneExample ex = make_tune_example(spec, plain);
    CHECK(ex.prompt == "Instruction: What is 1 + 1?\nResponse:");
    CHECK(ex.target == std::string(" 2") + lm::ToyLm::kStopChar);

    ProblemRecord with_solution = plain;
    with_solution.solution = "work work # 2";
    lm::TuneExample ex2 = make_tune_example(spec, with_solution);
    CHECK(ex2.target == std::string(" work work # 2") + lm::ToyLm::kStopChar);
}

TEST_CASE("icl matrix: operator-sensitive model shows a positive diagonal") {
    DatasetSplit pool = elementary_question_pool(16, 3, 31);
    FeatureSensitiveStub model(FeatureSensitiveStub::Feature::Operator, 0.8, 0.2);

    ExperimentConfig cfg = ExperimentConfig::icl_defaults();
    cfg.n_generations = 25;
    cfg.seed = 17;
    IclResult result = icl_experiment(model, pool.train, pool.test, GroupBy::Primary, cfg);

    REQUIRE(result.row_labels.size() == 4);
    REQUIRE(result.col_labels.size() == 4);
    CHECK(result.row_labels == result.col_labels);
    // canonical skill order
    CHECK(result.row_labels[0] == "deep:add");
    CHECK(result.row_labels[1] == "deep:sub");

    double diag = 0.0, off = 0.0;
    for (size_t r = 0; r < 4; ++r) {
        for (size_t c = 0; c < 4; ++c) {
            (r == c ? diag : off) += result.at(r, c);
        }
    }
    diag /= 4.0;
    off /= 12.0;
    CHECK(diag > off);
    CHECK(diag > 0.0);

    for (double acc : result.standard_accuracy) {
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
}

TEST_CASE("icl matrix: degenerate grouping gives exactly zero cells") {
    DatasetSplit pool = elementary_question_pool(8, 2, 5);
    // One shared category label makes the grouped pool the whole pool.
    std::vector<ProblemRecord> flat_pool, flat_tests;
    for (auto r : pool.train) {
        flat_pool.push_back(make_record(r.question, r.answer.str(), Category::named("all")));
    }
    for (auto r : pool.test) {
        flat_tests.push_back(make_record(r.question, r.answer.str(), Category::named("all")));
    }
    FeatureSensitiveStub model(FeatureSensitiveStub::Feature::Operator, 0.8, 0.2);
    ExperimentConfig cfg = ExperimentConfig::icl_defaults();
    cfg.n_generations = 12;
    cfg.seed = 3;
    IclResult result = icl_experiment(model, flat_pool, flat_tests, GroupBy::Primary, cfg);
    REQUIRE(result.diff.size() == 1);
    CHECK(result.diff[0] == 0.0);
}

TEST_CASE("icl experiment errors name the thin category") {
    DatasetSplit pool = elementary_question_pool(3, 1, 9);  // 3 < k = 8
    FeatureSensitiveStub model(FeatureSensitiveStub::Feature::Operator, 0.8, 0.2);
    ExperimentConfig cfg = ExperimentConfig::icl_defaults();
    try {
        (void)icl_experiment(model, pool.train, pool.test, GroupBy::Primary, cfg);
        FAIL("expected error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("deep:") != std::string::npos);
    }
}

TEST_CASE("deep/surface ICL: a format-matching model favors surface structure") {
    expr::GenConfig gen_cfg;
    DatasetSplit v1 = data::build_synthetic_v1(gen_cfg, 6, 2, 23);

    std::map<std::string, std::string> truths;
    for (const auto& r : v1.train) truths[r.question] = r.answer.str();
    for (const auto& r : v1.test) truths[r.question] = r.answer.str();
    FeatureSensitiveStub model(FeatureSensitiveStub::Feature::Format, 0.9, 0.1, truths);
    ExperimentConfig cfg = ExperimentConfig::icl_defaults();
    cfg.n_generations = 20;
    cfg.seed = 12;
    DeepSurfaceResult result = deep_surface_icl(model, v1, cfg);
    REQUIRE(result.per_category.size() == 8);
    CHECK(result.surface_mean > result.deep_mean);

    PromptBlindStub blind;
    DeepSurfaceResult nothing = deep_surface_icl(blind, v1, cfg);
    CHECK(nothing.deep_mean == 0.0);
    CHECK(nothing.surface_mean == 0.0);
}

TEST_CASE("it experiment: zero-epoch tuning yields the zero matrix") {
    lm::ToyLmConfig toy_cfg;
    toy_cfg.charset = lm::ToyLmConfig::default_charset();
    toy_cfg.embed_dim = 6;
    toy_cfg.hidden_dim = 8;
    toy_cfg.window = 6;
    toy_cfg.init_scale = 0.4;
    lm::ToyLm base(toy_cfg);

    DatasetSplit pool = elementary_question_pool(6, 2, 77);
    auto train_sets = group_records(pool.train);
    auto eval_sets = group_records(pool.test);

    ExperimentConfig cfg = ExperimentConfig::tuned_defaults();
    cfg.prompt = PromptSpec::bare(0);
    cfg.n_generations = 20;
    cfg.max_new_tokens = 4;
    cfg.tune.epochs = 0;
    cfg.control = ExperimentConfig::ControlKind::RawBase;
    est::KernelMatrix m = it_experiment(base, train_sets, eval_sets, {}, cfg);
    CHECK(m.complete());
    for (const auto& cell : m.cells) CHECK(cell.value == 0.0);
}

TEST_CASE("it experiment supports the random-answer-tuned control") {
    lm::ToyLmConfig toy_cfg;
    toy_cfg.charset = lm::ToyLmConfig::default_charset();
    toy_cfg.embed_dim = 6;
    toy_cfg.hidden_dim = 8;
    toy_cfg.window = 6;
    toy_cfg.init_scale = 0.4;
    lm::ToyLm base(toy_cfg);

    DatasetSplit pool = elementary_question_pool(6, 1, 78);
    DatasetSplit control = data::build_random_baseline(pool, 5);
    auto train_sets = group_records(pool.train);
    auto eval_sets = group_records(pool.test);

    ExperimentConfig cfg = ExperimentConfig::tuned_defaults();
    cfg.prompt = PromptSpec::bare(0);
    cfg.n_generations = 15;
    cfg.max_new_tokens = 4;
    cfg.tune.epochs = 1;
    cfg.tune.lr = 1e-3;
    cfg.control = ExperimentConfig::ControlKind::RandomTuned;
    est::KernelMatrix m = it_experiment(base, train_sets, eval_sets, control.train, cfg);
    CHECK(m.complete());
    CHECK(m.model0_id != base.model_id());  // control is a tuned sibling

    cfg.control = ExperimentConfig::ControlKind::RandomTuned;
    ExperimentConfig missing = cfg;
    CHECK_THROWS_AS((void)it_experiment(base, train_sets, eval_sets, {}, missing),
                    std::invalid_argument);
}

TEST_CASE("sample efficiency: equal generation counts give identical matrices") {
    lm::ToyLmConfig toy_cfg;
    toy_cfg.charset = lm::ToyLmConfig::default_charset();
    toy_cfg.embed_dim = 6;
    toy_cfg.hidden_dim = 8;
    toy_cfg.window = 6;
    toy_cfg.init_scale = 0.4;
    lm::ToyLm base(toy_cfg);

    DatasetSplit pool = elementary_question_pool(5, 3, 41);
    auto train_sets = group_records(pool.train);
    auto eval_sets = group_records(pool.test);

    ExperimentConfig cfg = ExperimentConfig::convergence_defaults();
    cfg.prompt = PromptSpec::bare(0);
    cfg.n_generations = 10;
    cfg.max_new_tokens = 4;
    cfg.tune.epochs = 1;
    cfg.tune.lr = 1e-3;
    cfg.seed = 4;

    SampleEfficiencyResult r = sample_efficiency_experiment(base, train_sets, eval_sets, {}, 30,
                                                            30, cfg);
    CHECK(r.accuracy_small.values() == r.accuracy_large.values());
    CHECK(r.ntkeval_small.complete());
    CHECK(r.accuracy_small.row_labels == r.ntkeval_small.row_labels);

    // two questions per row by default
    for (const auto& cell : r.ntkeval_small.cells) CHECK(cell.n_questions == 2);
}

TEST_CASE("evaluate_accuracy: echo and blind stubs") {
    DatasetSplit pool = elementary_question_pool(2, 5, 55);
    PromptSpec spec;  // header + zero-shot blocks
    spec.k = 0;
    std::vector<std::pair<std::string, std::vector<est::EvalItem>>> groups;
    for (auto& [label, records] : group_records(pool.test)) {
        groups.emplace_back(label, make_eval_items(spec, records));
    }

    ExperimentConfig cfg;
    cfg.n_generations = 20;
    cfg.seed = 6;

    EchoTruthStub echo;
    AccuracyTable table = evaluate_accuracy(echo, groups, cfg);
    REQUIRE(table.rows.size() == 4);
    for (const auto& row : table.rows) CHECK(row.accuracy == 1.0);
    CHECK(table.overall == 1.0);
    CHECK(table.total_questions == 20);

    // blind random integers in [1,1000] almost never match
    PromptBlindStub blind;
    AccuracyTable blind_table = evaluate_accuracy(blind, groups, cfg);
    CHECK(blind_table.overall <= 0.01);
}

TEST_CASE("take_per_group keeps the first rounds per category") {
    DatasetSplit pool = elementary_question_pool(5, 4, 66);
    auto groups = take_per_group(group_records(pool.test), 2);
    CHECK(groups.size() == 4);
    for (const auto& [label, records] : groups) {
        CHECK(records.size() == 2);
    }
    // order preserved: the first two test records of each category
    auto full = group_records(pool.test);
    for (size_t g = 0; g < groups.size(); ++g) {
        CHECK(groups[g].second[0].id == full[g].second[0].id);
        CHECK(groups[g].second[1].id == full[g].second[1].id);
    }
}

TEST_CASE("standard prompting accuracy feeds the difficulty axis") {
    DatasetSplit pool = elementary_question_pool(12, 2, 91);
    FeatureSensitiveStub model(FeatureSensitiveStub::Feature::Operator, 0.8, 0.3);
    ExperimentConfig cfg = ExperimentConfig::icl_defaults();
    cfg.n_generations = 10;
    auto difficulty = standard_prompting_accuracy(model, pool.train, pool.test, GroupBy::Primary,
                                                  cfg);
    CHECK(difficulty.size() == 4);
    for (const auto& [label, acc] : difficulty) {
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
}
