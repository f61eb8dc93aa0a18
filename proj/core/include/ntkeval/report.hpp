#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ntkeval/estimator.hpp"
#include "ntkeval/harness.hpp"

namespace ntkeval::report {

// Self-contained SVG heatmap: zero-centered diverging scale (green positive,
// red negative, white at zero), one annotated cell per matrix entry,
// deterministic bytes for identical inputs.
std::string heatmap_svg(const est::KernelMatrix& m, const std::string& title);
void render_heatmap(const est::KernelMatrix& m, const std::filesystem::path& path,
                    const std::string& title);

// Wide CSV view of a matrix: value columns then std-error columns, full
// precision, '#' metadata header lines.
void write_matrix_table(const est::KernelMatrix& m, const std::filesystem::path& path);

// Per-category accuracy table (one row per category plus "tot").
void write_accuracy_table(const harness::AccuracyTable& table, const std::filesystem::path& path);

// One (deep, surface) pair per model label.
void write_deep_surface_table(
    const std::vector<std::pair<std::string, est::DeepSurfaceMeans>>& rows,
    const std::filesystem::path& path);

// Targeted/off-diagonal scatter data: one row per (skill, arm) with
// x = difficulty (baseline accuracy) and y = change. Rows whose difficulty
// axis is missing (NaN) are rejected.
void write_scatter_data(const std::vector<est::TargetedRow>& rows,
                        const std::filesystem::path& path);

// Parses '#'-commented CSV back into cells; used for round-trip checks.
std::vector<std::vector<std::string>> read_table_csv(const std::filesystem::path& path);

}  // namespace ntkeval::report
