#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntkeval/category.hpp"
#include "ntkeval/numeral.hpp"

namespace ntkeval::data {

// One (skill, question, answer) triple, optionally with a worked solution.
// v1-style records carry a second category so the same pool can be grouped
// by deep skill or by surface format.
struct ProblemRecord {
    Category category;
    std::optional<Category> category2;
    std::string question;
    Numeral answer;
    std::optional<std::string> solution;
    uint64_t id = 0;

    static uint64_t stable_id(const Category& category, std::string_view question);

    static ProblemRecord make(Category category, std::string question, Numeral answer,
                              std::optional<Category> category2 = std::nullopt,
                              std::optional<std::string> solution = std::nullopt);
};

struct DatasetSplit {
    std::vector<ProblemRecord> train;
    std::vector<ProblemRecord> test;

    size_t size() const { return train.size() + test.size(); }
    std::map<std::string, int> train_counts() const;  // by category.to_string()
    std::map<std::string, int> test_counts() const;
    bool disjoint_by_id() const;
    // FNV over all record content; used in run manifests.
    uint64_t content_hash() const;
};

struct LoadError : std::runtime_error {
    LoadError(const std::filesystem::path& path, size_t line, const std::string& message);
    size_t line;  // 1-based record/line index
};

// Line-oriented record files: one JSON object per line, UTF-8,
// order-preserving. Fields: category, question, answer, and optionally
// category2, solution, split ("train"/"test", default train). Ids are
// recomputed on load.
void write_records(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit read_records(const std::filesystem::path& path);

}  // namespace ntkeval::data
