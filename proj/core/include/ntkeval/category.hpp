#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

#include "ntkeval/expr.hpp"

namespace ntkeval::data {

// A skill label: either a deep math skill, a surface presentation format, or
// a free-form named skill (KhanSkill style).
class Category {
public:
    enum class Kind { Deep, Surface, Named };

    static Category deep(expr::Skill s);
    static Category surface(expr::SurfaceFormat f);
    static Category named(std::string label);  // throws std::invalid_argument if empty

    Kind kind() const { return kind_; }
    expr::Skill skill() const;           // Deep only
    expr::SurfaceFormat format() const;  // Surface only

    // Short label without the kind prefix: "add", "symbolic", "units", ...
    const std::string& label() const { return label_; }

    // Round-trippable text: "deep:add", "surface:symbolic", "named:units".
    std::string to_string() const;
    static std::optional<Category> from_string(std::string_view text);

    // Canonical display/sort order: deep skills in pedagogical order, then
    // surface formats, then named labels lexicographically.
    int sort_rank() const;

    friend bool operator==(const Category&, const Category&) = default;
    friend std::strong_ordering operator<=>(const Category& a, const Category& b);

private:
    Category(Kind kind, std::string label) : kind_(kind), label_(std::move(label)) {}
    Kind kind_;
    std::string label_;
};

}  // namespace ntkeval::data
