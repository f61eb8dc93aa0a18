#include "ntkeval/prompt.hpp"

#include <set>
#include <stdexcept>

#include "ntkeval/hash.hpp"
#include "ntkeval/toy_lm.hpp"

namespace ntkeval::harness {

PromptSpec PromptSpec::bare(int shots) {
    PromptSpec spec;
    spec.header.clear();
    spec.k = shots;
    return spec;
}

std::string build_icl_prompt(const PromptSpec& spec,
                             std::span<const data::ProblemRecord> examples,
                             const data::ProblemRecord& test_q) {
    if (examples.size() != static_cast<size_t>(spec.k)) {
        throw std::invalid_argument("build_icl_prompt: got " + std::to_string(examples.size()) +
                                    " examples, spec.k = " + std::to_string(spec.k));
    }
    std::set<uint64_t> ids;
    for (const auto& ex : examples) {
        if (!ids.insert(ex.id).second) {
            throw std::invalid_argument("build_icl_prompt: duplicate example id");
        }
    }
    if (ids.count(test_q.id)) {
        throw std::invalid_argument("build_icl_prompt: test question appears among examples");
    }

    std::string out;
    if (!spec.header.empty()) {
        out += spec.header;
        out += spec.header_separator;
    }
    for (const auto& ex : examples) {
        out += spec.instruction_prefix;
        out += ex.question;
        out += '\n';
        out += spec.response_prefix;
        out += ' ';
        out += ex.answer.str();
        out += spec.block_separator;
    }
    out += spec.instruction_prefix;
    out += test_q.question;
    out += '\n';
    out += spec.response_prefix;
    return out;
}

std::string zero_shot_prompt(const PromptSpec& spec, const data::ProblemRecord& record) {
    PromptSpec zero = spec;
    zero.k = 0;
    return build_icl_prompt(zero, {}, record);
}

est::EvalItem make_eval_item(const PromptSpec& spec, const data::ProblemRecord& record) {
    return est::EvalItem{hex64(record.id), zero_shot_prompt(spec, record), record.answer};
}

std::vector<est::EvalItem> make_eval_items(const PromptSpec& spec,
                                           std::span<const data::ProblemRecord> records) {
    std::vector<est::EvalItem> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(make_eval_item(spec, r));
    return out;
}

lm::TuneExample make_tune_example(const PromptSpec& spec, const data::ProblemRecord& record) {
    std::string target = " ";
    target += record.solution ? *record.solution : record.answer.str();
    target += lm::ToyLm::kStopChar;
    return lm::TuneExample{zero_shot_prompt(spec, record), std::move(target)};
}

std::vector<lm::TuneExample> make_tune_examples(const PromptSpec& spec,
                                                std::span<const data::ProblemRecord> records) {
    std::vector<lm::TuneExample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(make_tune_example(spec, r));
    return out;
}

}  // namespace ntkeval::harness
