#pragma once

#include <span>
#include <string>
#include <vector>

#include "ntkeval/estimator.hpp"
#include "ntkeval/lm.hpp"
#include "ntkeval/records.hpp"

namespace ntkeval::harness {

// Few-shot prompt layout. The default spec renders
//
//   Below is an instruction that describes a task. Write a response that
//   appropriately completes the request.
//   Instruction: <question>
//   Response: <answer>
//   <blank line>
//   ...k blocks...
//   Instruction: <test question>
//   Response:
//
// and the prompt always ends with exactly `response_prefix`.
struct PromptSpec {
    std::string header =
        "Below is an instruction that describes a task. Write a response that appropriately "
        "completes the request.";
    std::string instruction_prefix = "Instruction: ";
    std::string response_prefix = "Response:";
    std::string header_separator = "\n";
    std::string block_separator = "\n\n";
    int k = 8;

    // Header-less variant for desk-scale toy experiments.
    static PromptSpec bare(int shots = 0);
};

// Header, then one Instruction/Response block per example showing the
// ground-truth answer, then the test block ending at the response prefix.
// Requires exactly spec.k examples, all ids distinct from the test question.
std::string build_icl_prompt(const PromptSpec& spec,
                             std::span<const data::ProblemRecord> examples,
                             const data::ProblemRecord& test_q);

// Zero-shot prompt for one record (evaluation and tuning share this shape).
std::string zero_shot_prompt(const PromptSpec& spec, const data::ProblemRecord& record);

est::EvalItem make_eval_item(const PromptSpec& spec, const data::ProblemRecord& record);
std::vector<est::EvalItem> make_eval_items(const PromptSpec& spec,
                                           std::span<const data::ProblemRecord> records);

// Supervised pair: zero-shot prompt plus " <answer>" (or the worked solution
// when present) terminated by the toy stop character.
lm::TuneExample make_tune_example(const PromptSpec& spec, const data::ProblemRecord& record);
std::vector<lm::TuneExample> make_tune_examples(const PromptSpec& spec,
                                                std::span<const data::ProblemRecord> records);

}  // namespace ntkeval::harness
