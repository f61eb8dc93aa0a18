#include "ntkeval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ntkeval::report {

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

std::string full(double v) { return fmt("%.17g", v); }

// White at 0, saturating to green for +max and red for -max.
std::string cell_color(double value, double vmax) {
    double t = vmax > 0 ? std::clamp(value / vmax, -1.0, 1.0) : 0.0;
    int r, g, b;
    if (t >= 0) {
        r = static_cast<int>(std::lround(255 + t * (24 - 255)));
        g = static_cast<int>(std::lround(255 + t * (136 - 255)));
        b = static_cast<int>(std::lround(255 + t * (56 - 255)));
    } else {
        double a = -t;
        r = static_cast<int>(std::lround(255 + a * (198 - 255)));
        g = static_cast<int>(std::lround(255 + a * (40 - 255)));
        b = static_cast<int>(std::lround(255 + a * (40 - 255)));
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string heatmap_svg(const est::KernelMatrix& m, const std::string& title) {
    const size_t rows = m.row_labels.size();
    const size_t cols = m.col_labels.size();
    if (rows == 0 || cols == 0) throw std::invalid_argument("heatmap: empty matrix");

    const int cell_w = 72, cell_h = 44;
    const int left = 130, top = 64, right = 16, bottom = 40;
    const int width = left + cell_w * static_cast<int>(cols) + right;
    const int height = top + cell_h * static_cast<int>(rows) + bottom;

    double vmax = 0.0;
    for (size_t i = 0; i < m.cells.size(); ++i) {
        if (m.cell_done[i]) vmax = std::max(vmax, std::abs(m.cells[i].value));
    }

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
    svg << "<text x=\"" << left << "\" y=\"22\" font-family=\"monospace\" font-size=\"14\">"
        << xml_escape(title) << "</text>\n";

    for (size_t c = 0; c < cols; ++c) {
        int x = left + static_cast<int>(c) * cell_w + cell_w / 2;
        svg << "<text x=\"" << x << "\" y=\"" << top - 10
            << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">"
            << xml_escape(m.col_labels[c]) << "</text>\n";
    }
    for (size_t r = 0; r < rows; ++r) {
        int y = top + static_cast<int>(r) * cell_h + cell_h / 2 + 4;
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y
            << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
            << xml_escape(m.row_labels[r]) << "</text>\n";
    }

    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < cols; ++c) {
            size_t idx = r * cols + c;
            int x = left + static_cast<int>(c) * cell_w;
            int y = top + static_cast<int>(r) * cell_h;
            const bool done = m.cell_done[idx] != 0;
            std::string color = done ? cell_color(m.cells[idx].value, vmax) : "#dddddd";
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w
                << "\" height=\"" << cell_h << "\" fill=\"" << color
                << "\" stroke=\"#888888\"/>\n";
            std::string label = done ? fmt("%.3f", m.cells[idx].value) : "?";
            svg << "<text x=\"" << x + cell_w / 2 << "\" y=\"" << y + cell_h / 2 + 4
                << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" << label
                << "</text>\n";
        }
    }
    svg << "<text x=\"" << left << "\" y=\"" << height - 14
        << "\" font-family=\"monospace\" font-size=\"10\">metric=" << xml_escape(m.metric)
        << " N=" << m.n_generations << " T=" << fmt("%g", m.temperature) << " seed=" << m.seed
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void render_heatmap(const est::KernelMatrix& m, const std::filesystem::path& path,
                    const std::string& title) {
    write_file(path, heatmap_svg(m, title));
}

void write_matrix_table(const est::KernelMatrix& m, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# metric=" << m.metric << " model0=" << m.model0_id << " N=" << m.n_generations
        << " T=" << full(m.temperature) << " seed=" << m.seed << "\n";
    out << "# columns: row label, value per training column, std_error per training column\n";
    out << "row";
    for (const auto& c : m.col_labels) out << ',' << c;
    for (const auto& c : m.col_labels) out << ",se:" << c;
    out << '\n';
    for (size_t r = 0; r < m.row_labels.size(); ++r) {
        out << m.row_labels[r];
        for (size_t c = 0; c < m.col_labels.size(); ++c) out << ',' << full(m.at(r, c).value);
        for (size_t c = 0; c < m.col_labels.size(); ++c) out << ',' << full(m.at(r, c).std_error);
        out << '\n';
    }
    write_file(path, out.str());
}

void write_accuracy_table(const harness::AccuracyTable& table,
                          const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# per-category accuracy; model=" << table.model_id << " N=" << table.n_generations
        << " T=" << full(table.temperature) << " seed=" << table.seed << "\n";
    out << "# columns: category, accuracy, n_questions\n";
    out << "category,accuracy,n_questions\n";
    for (const auto& row : table.rows) {
        out << row.label << ',' << full(row.accuracy) << ',' << row.n_questions << '\n';
    }
    out << "tot," << full(table.overall) << ',' << table.total_questions << '\n';
    write_file(path, out.str());
}

void write_deep_surface_table(
    const std::vector<std::pair<std::string, est::DeepSurfaceMeans>>& rows,
    const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# mean change per structure class\n";
    out << "# columns: model, deep, surface\n";
    out << "model,deep,surface\n";
    for (const auto& [label, means] : rows) {
        out << label << ',' << full(means.deep) << ',' << full(means.surface) << '\n';
    }
    write_file(path, out.str());
}

void write_scatter_data(const std::vector<est::TargetedRow>& rows,
                        const std::filesystem::path& path) {
    double targeted_sum = 0.0, offdiag_sum = 0.0;
    for (const auto& row : rows) {
        if (std::isnan(row.difficulty)) {
            throw std::invalid_argument("scatter data: difficulty axis missing for " + row.label);
        }
        targeted_sum += row.targeted;
        offdiag_sum += row.offdiag_mean;
    }
    std::ostringstream out;
    out << "# targeted vs off-diagonal change; x = baseline accuracy (difficulty)\n";
    if (!rows.empty()) {
        double n = static_cast<double>(rows.size());
        out << "# mean(targeted) - mean(offdiagonal) = " << full(targeted_sum / n - offdiag_sum / n)
            << "\n";
    }
    out << "skill,arm,difficulty,change\n";
    for (const auto& row : rows) {
        out << row.label << ",targeted," << full(row.difficulty) << ',' << full(row.targeted)
            << '\n';
    }
    for (const auto& row : rows) {
        out << row.label << ",offdiagonal," << full(row.difficulty) << ','
            << full(row.offdiag_mean) << '\n';
    }
    write_file(path, out.str());
}

std::vector<std::vector<std::string>> read_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace ntkeval::report
