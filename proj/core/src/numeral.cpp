#include "ntkeval/numeral.hpp"

#include <cctype>
#include <cstdlib>

namespace ntkeval {

namespace {

bool is_digit(char c) {
    return c >= '0' && c <= '9';
}

// Canonicalize (sign, integer digits, fraction digits). Returns nullopt when
// there is not a single digit in either part.
std::optional<std::string> canonicalize(bool negative, std::string_view int_part,
                                        std::string_view frac_part) {
    if (int_part.empty() && frac_part.empty()) return std::nullopt;

    size_t first = 0;
    while (first + 1 < int_part.size() && int_part[first] == '0') ++first;
    std::string digits = int_part.empty() ? "0" : std::string(int_part.substr(first));

    size_t frac_end = frac_part.size();
    while (frac_end > 0 && frac_part[frac_end - 1] == '0') --frac_end;
    std::string frac(frac_part.substr(0, frac_end));

    bool zero = frac.empty() && digits.find_first_not_of('0') == std::string::npos;
    std::string out;
    if (negative && !zero) out += '-';
    out += digits;
    if (!frac.empty()) {
        out += '.';
        out += frac;
    }
    return out;
}

struct NumberToken {
    std::string canonical;
    size_t begin = 0;
    size_t end = 0;
};

// Scan for the next number at or after `from`. Sign adjacency rule: a +/-
// directly before digits is part of the number only if the preceding
// character is not a digit or '.'.
std::optional<NumberToken> scan_number(std::string_view text, size_t from) {
    for (size_t i = from; i < text.size(); ++i) {
        bool neg = false;
        size_t start = i;
        size_t j = i;
        if (text[j] == '+' || text[j] == '-') {
            if (j > 0 && (is_digit(text[j - 1]) || text[j - 1] == '.')) continue;
            neg = text[j] == '-';
            ++j;
        }
        size_t int_begin = j;
        while (j < text.size() && is_digit(text[j])) ++j;
        size_t int_len = j - int_begin;
        size_t frac_begin = j;
        size_t frac_len = 0;
        if (j < text.size() && text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1])) {
            ++j;
            frac_begin = j;
            while (j < text.size() && is_digit(text[j])) ++j;
            frac_len = j - frac_begin;
        }
        if (int_len == 0 && frac_len == 0) continue;
        auto canon = canonicalize(neg, text.substr(int_begin, int_len),
                                  text.substr(frac_begin, frac_len));
        if (!canon) continue;
        return NumberToken{*canon, start, j};
    }
    return std::nullopt;
}

}  // namespace

std::optional<Numeral> Numeral::parse(std::string_view text) {
    size_t b = 0;
    size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    text = text.substr(b, e - b);
    if (text.empty()) return std::nullopt;

    size_t i = 0;
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') {
        neg = text[i] == '-';
        ++i;
    }
    size_t int_begin = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    size_t int_len = i - int_begin;
    size_t frac_begin = i;
    size_t frac_len = 0;
    if (i < text.size() && text[i] == '.') {
        ++i;
        frac_begin = i;
        while (i < text.size() && is_digit(text[i])) ++i;
        frac_len = i - frac_begin;
    }
    if (i != text.size()) return std::nullopt;
    auto canon = canonicalize(neg, text.substr(int_begin, int_len),
                              text.substr(frac_begin, frac_len));
    if (!canon) return std::nullopt;
    return Numeral(std::move(*canon));
}

Numeral Numeral::from_int(long long v) {
    return Numeral(std::to_string(v));
}

double Numeral::to_double() const {
    return std::strtod(text_.c_str(), nullptr);
}

std::optional<Numeral> extract_answer(std::string_view completion) {
    size_t hash_pos = completion.rfind('#');
    if (hash_pos != std::string_view::npos) {
        auto tok = scan_number(completion, hash_pos + 1);
        if (!tok) return std::nullopt;
        return Numeral::parse(tok->canonical);
    }
    std::optional<NumberToken> last;
    size_t pos = 0;
    while (auto tok = scan_number(completion, pos)) {
        pos = tok->end;
        last = std::move(tok);
    }
    if (!last) return std::nullopt;
    return Numeral::parse(last->canonical);
}

}  // namespace ntkeval
