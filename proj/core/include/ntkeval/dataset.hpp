#pragma once

#include <cstdint>
#include <filesystem>

#include "ntkeval/expr.hpp"
#include "ntkeval/records.hpp"

namespace ntkeval::data {

// 16-cell dataset: four elementary skills x four surface formats. Every
// record carries its deep category as primary and its surface category as
// secondary, so one pool serves both groupings. Questions are unique by id
// across the whole split.
DatasetSplit build_synthetic_v1(const expr::GenConfig& cfg, int n_train_per_cell,
                                int n_test_per_cell, uint64_t seed);

// Six-skill dataset, question format only. Test split defaults to 100
// questions per skill.
DatasetSplit build_synthetic_v2(const expr::GenConfig& cfg, int n_train_per_skill,
                                uint64_t seed, int n_test_per_skill = 100);

// Same questions and formats as src, every answer replaced by a uniform
// integer in [1, 1000] drawn independently of the question.
DatasetSplit build_random_baseline(const DatasetSplit& src, uint64_t seed);

// Loads a named-skill record file (category/question/solution per line; the
// answer is the first number after the last '#' of the solution) and splits
// it 2:1 train/test per skill. The global split is exactly 2:1: per-skill
// counts are floor(2n/3) plus one extra for the first skills in sorted
// order until round(2N/3) train records are reached.
DatasetSplit load_khanskill(const std::filesystem::path& path, uint64_t split_seed);

}  // namespace ntkeval::data
