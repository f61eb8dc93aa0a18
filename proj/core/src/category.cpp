#include "ntkeval/category.hpp"

#include <stdexcept>

namespace ntkeval::data {

Category Category::deep(expr::Skill s) {
    return Category(Kind::Deep, std::string(expr::skill_name(s)));
}

Category Category::surface(expr::SurfaceFormat f) {
    return Category(Kind::Surface, std::string(expr::format_name(f)));
}

Category Category::named(std::string label) {
    if (label.empty()) throw std::invalid_argument("named category label must be nonempty");
    return Category(Kind::Named, std::move(label));
}

expr::Skill Category::skill() const {
    if (kind_ != Kind::Deep) throw std::logic_error("Category::skill on non-deep category");
    return *expr::skill_from_name(label_);
}

expr::SurfaceFormat Category::format() const {
    if (kind_ != Kind::Surface) throw std::logic_error("Category::format on non-surface category");
    return *expr::format_from_name(label_);
}

std::string Category::to_string() const {
    switch (kind_) {
        case Kind::Deep: return "deep:" + label_;
        case Kind::Surface: return "surface:" + label_;
        case Kind::Named: return "named:" + label_;
    }
    return label_;
}

std::optional<Category> Category::from_string(std::string_view text) {
    auto starts = [&](std::string_view prefix) {
        return text.size() > prefix.size() && text.substr(0, prefix.size()) == prefix;
    };
    if (starts("deep:")) {
        auto s = expr::skill_from_name(text.substr(5));
        if (!s) return std::nullopt;
        return deep(*s);
    }
    if (starts("surface:")) {
        auto f = expr::format_from_name(text.substr(8));
        if (!f) return std::nullopt;
        return surface(*f);
    }
    if (starts("named:")) {
        return named(std::string(text.substr(6)));
    }
    if (text.empty()) return std::nullopt;
    // Bare labels (raw skill files) load as named categories.
    return named(std::string(text));
}

int Category::sort_rank() const {
    switch (kind_) {
        case Kind::Deep: return static_cast<int>(*expr::skill_from_name(label_));
        case Kind::Surface: return 100 + static_cast<int>(*expr::format_from_name(label_));
        case Kind::Named: return 1000;
    }
    return 1000;
}

std::strong_ordering operator<=>(const Category& a, const Category& b) {
    if (auto c = a.sort_rank() <=> b.sort_rank(); c != 0) return c;
    return a.label_ <=> b.label_;
}

}  // namespace ntkeval::data
