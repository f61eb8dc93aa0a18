#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ntkeval {

// Canonical decimal number as text: optional '-', integer digits without
// leading zeros, optional fractional digits without trailing zeros.
// "+04.80", "4.8" and "4.80" all canonicalize to "4.8", so equality is plain
// string equality with no epsilon.
class Numeral {
public:
    Numeral() : text_("0") {}

    // Lenient parse of a standalone number ("-147", "+4.80", ".5").
    // Rejects anything with trailing garbage.
    static std::optional<Numeral> parse(std::string_view text);

    static Numeral from_int(long long v);

    const std::string& str() const { return text_; }
    bool negative() const { return !text_.empty() && text_[0] == '-'; }
    bool is_integer() const { return text_.find('.') == std::string::npos; }

    // Value as double for plotting axes; canonical text stays authoritative.
    double to_double() const;

    friend bool operator==(const Numeral&, const Numeral&) = default;

private:
    explicit Numeral(std::string canonical) : text_(std::move(canonical)) {}
    std::string text_;
};

// Pulls the final numeric answer out of a free-form completion.
// A '#' marker wins: the first number after the last '#' is the answer
// (worked-solution convention, e.g. "... Simplify: 24/5 # $4.8$" -> 4.8).
// Otherwise the last signed number in the text. A '-'/'+' counts as a sign
// only when not preceded by a digit or '.', so "3-2=1" yields 1, not -2.
// Returns nullopt when no number occurs.
std::optional<Numeral> extract_answer(std::string_view completion);

}  // namespace ntkeval
