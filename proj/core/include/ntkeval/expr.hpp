#pragma once

#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ntkeval/numeral.hpp"

namespace ntkeval::expr {

using BigInt = boost::multiprecision::cpp_int;
using Rng = std::mt19937_64;

// Six deep skills: four elementary operations plus order-of-operations and
// mixed complex compositions.
enum class Skill { Add, Sub, Mul, Div, Ops, Cplex };

inline constexpr std::array<Skill, 6> kAllSkills{Skill::Add, Skill::Sub, Skill::Mul,
                                                 Skill::Div, Skill::Ops, Skill::Cplex};
inline constexpr std::array<Skill, 4> kElementarySkills{Skill::Add, Skill::Sub, Skill::Mul,
                                                        Skill::Div};

constexpr bool is_elementary(Skill s) {
    return s == Skill::Add || s == Skill::Sub || s == Skill::Mul || s == Skill::Div;
}

std::string_view skill_name(Skill s);                       // "add", ..., "cplex"
std::optional<Skill> skill_from_name(std::string_view);

// Four surface presentation formats for the same underlying problem.
enum class SurfaceFormat { Question, Instruction, Symbolic, WordProblem };

inline constexpr std::array<SurfaceFormat, 4> kAllFormats{
    SurfaceFormat::Question, SurfaceFormat::Instruction, SurfaceFormat::Symbolic,
    SurfaceFormat::WordProblem};

std::string_view format_name(SurfaceFormat f);              // "question", ...
std::optional<SurfaceFormat> format_from_name(std::string_view);

enum class BinOp { Add, Sub, Mul, Div };

char op_symbol(BinOp op);  // '+', '-', '*', '/'

// Immutable integer arithmetic expression tree. Leaves hold arbitrary
// precision signed integers; interior nodes are one of the four operators.
// Copies share structure, so Expr is cheap to pass by value and safe to read
// from any thread.
class Expr {
public:
    static Expr leaf(BigInt value);
    static Expr node(BinOp op, Expr lhs, Expr rhs);

    bool is_leaf() const;
    const BigInt& value() const;  // leaf only
    BinOp op() const;             // node only
    Expr lhs() const;             // shares structure, cheap
    Expr rhs() const;

    int depth() const;     // leaf = 0
    int op_count() const;  // leaf = 0

    bool operator==(const Expr& other) const;

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exact bottom-up integer fold. '/' must divide exactly; a remainder or a
// zero divisor throws EvalError (it signals a generator bug, not bad input).
BigInt eval_expr(const Expr& e);

struct OperandRange {
    long long min = 1;
    long long max = 1;
    bool valid() const { return min <= max; }
};

// Operand ranges per skill. Division problems are built divisor-first as
// (quotient * divisor) / divisor so every '/' is exact by construction; the
// same rule applies to divisions nested inside ops/cplex trees.
struct GenConfig {
    OperandRange add_lhs{1, 999}, add_rhs{1, 999};
    OperandRange sub_lhs{1, 999}, sub_rhs{1, 999};
    OperandRange mul_lhs{2, 99}, mul_rhs{2, 99};
    OperandRange div_quotient{2, 99}, div_divisor{2, 99};
    int cplex_min_operands = 4;
    int cplex_max_operands = 8;
    int cplex_max_depth = 3;
    long long max_abs_value = 1'000'000;  // bound on every subtree value
    uint64_t seed = 0;                    // default stream for callers that keep one

    void validate() const;  // throws std::invalid_argument
};

// Draws an expression matching the skill shape:
//   Add/Sub/Mul/Div -> one binary node of that operator
//   Ops             -> two distinct operators with explicit parentheses
//   Cplex           -> >=3 operators of >=3 kinds, depth <= cplex_max_depth
// Deterministic given (skill, cfg, rng state).
Expr gen_expr(Skill skill, const GenConfig& cfg, Rng& rng);

// Infix text of the tree. Trees with >= 3 operators render the outermost
// chain tightly ("28*(49 + (58 - 52))+134") while anything inside
// parentheses is spaced; smaller trees are spaced throughout with composed
// children parenthesized ("(33 / 33) * 64").
std::string render_infix(const Expr& e);

// Question text in one of the four surface formats. Instruction, Symbolic
// and WordProblem accept a single binary node only and throw
// std::invalid_argument otherwise. The rng picks the word-problem template.
std::string render(const Expr& e, SurfaceFormat fmt, Rng& rng);

// Word-problem template pool per operator; "{a}"/"{b}" are operand slots.
// Templates are data so tests can pin them; index 0 is the canonical one.
const std::vector<std::string>& word_problem_templates(BinOp op);
std::string render_word_problem(const Expr& e, size_t template_index);

struct ParseError : std::runtime_error {
    ParseError(size_t position, std::string message);
    size_t position;
    std::string message;  // without the position prefix
};

// Inverse of render for the Question and Symbolic formats. The parsed tree
// evaluates to the same value as the rendered one (associativity of the
// rebuilt tree may differ).
Expr parse_question(std::string_view text);

// Canonical answer text for a evaluated expression value.
Numeral to_numeral(const BigInt& v);

}  // namespace ntkeval::expr
