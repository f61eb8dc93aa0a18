#include "ntkeval/expr.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace ntkeval::expr {

std::string_view skill_name(Skill s) {
    switch (s) {
        case Skill::Add: return "add";
        case Skill::Sub: return "sub";
        case Skill::Mul: return "mul";
        case Skill::Div: return "div";
        case Skill::Ops: return "ops";
        case Skill::Cplex: return "cplex";
    }
    return "?";
}

std::optional<Skill> skill_from_name(std::string_view name) {
    for (Skill s : kAllSkills) {
        if (skill_name(s) == name) return s;
    }
    return std::nullopt;
}

std::string_view format_name(SurfaceFormat f) {
    switch (f) {
        case SurfaceFormat::Question: return "question";
        case SurfaceFormat::Instruction: return "instruction";
        case SurfaceFormat::Symbolic: return "symbolic";
        case SurfaceFormat::WordProblem: return "word_problem";
    }
    return "?";
}

std::optional<SurfaceFormat> format_from_name(std::string_view name) {
    for (SurfaceFormat f : kAllFormats) {
        if (format_name(f) == name) return f;
    }
    return std::nullopt;
}

char op_symbol(BinOp op) {
    switch (op) {
        case BinOp::Add: return '+';
        case BinOp::Sub: return '-';
        case BinOp::Mul: return '*';
        case BinOp::Div: return '/';
    }
    return '?';
}

struct Expr::Node {
    bool leaf = true;
    BigInt value;
    BinOp op = BinOp::Add;
    std::shared_ptr<const Node> lhs, rhs;
    int depth = 0;
    int op_count = 0;
};

Expr Expr::leaf(BigInt value) {
    auto n = std::make_shared<Node>();
    n->leaf = true;
    n->value = std::move(value);
    return Expr(std::move(n));
}

Expr Expr::node(BinOp op, Expr lhs, Expr rhs) {
    auto n = std::make_shared<Node>();
    n->leaf = false;
    n->op = op;
    n->depth = 1 + std::max(lhs.node_->depth, rhs.node_->depth);
    n->op_count = 1 + lhs.node_->op_count + rhs.node_->op_count;
    n->lhs = std::move(lhs.node_);
    n->rhs = std::move(rhs.node_);
    return Expr(std::move(n));
}

bool Expr::is_leaf() const { return node_->leaf; }

const BigInt& Expr::value() const {
    if (!node_->leaf) throw std::logic_error("Expr::value on interior node");
    return node_->value;
}

BinOp Expr::op() const {
    if (node_->leaf) throw std::logic_error("Expr::op on leaf");
    return node_->op;
}

Expr Expr::lhs() const {
    if (node_->leaf) throw std::logic_error("Expr::lhs on leaf");
    return Expr(node_->lhs);
}

Expr Expr::rhs() const {
    if (node_->leaf) throw std::logic_error("Expr::rhs on leaf");
    return Expr(node_->rhs);
}

int Expr::depth() const { return node_->depth; }
int Expr::op_count() const { return node_->op_count; }

bool Expr::operator==(const Expr& other) const {
    if (node_ == other.node_) return true;
    if (node_->leaf != other.node_->leaf) return false;
    if (node_->leaf) return node_->value == other.node_->value;
    return node_->op == other.node_->op && lhs() == other.lhs() && rhs() == other.rhs();
}

BigInt eval_expr(const Expr& e) {
    if (e.is_leaf()) return e.value();
    BigInt l = eval_expr(e.lhs());
    BigInt r = eval_expr(e.rhs());
    switch (e.op()) {
        case BinOp::Add: return l + r;
        case BinOp::Sub: return l - r;
        case BinOp::Mul: return l * r;
        case BinOp::Div: {
            if (r == 0) throw EvalError("division by zero");
            if (l % r != 0) {
                throw EvalError("division with remainder: " + l.str() + " / " + r.str());
            }
            return l / r;
        }
    }
    throw EvalError("unknown operator");
}

void GenConfig::validate() const {
    auto check = [](const OperandRange& r, const char* name) {
        if (!r.valid()) throw std::invalid_argument(std::string("empty operand range: ") + name);
    };
    check(add_lhs, "add_lhs");
    check(add_rhs, "add_rhs");
    check(sub_lhs, "sub_lhs");
    check(sub_rhs, "sub_rhs");
    check(mul_lhs, "mul_lhs");
    check(mul_rhs, "mul_rhs");
    check(div_quotient, "div_quotient");
    check(div_divisor, "div_divisor");
    if (div_divisor.min < 1) throw std::invalid_argument("div_divisor must be positive");
    if (div_quotient.min < 0) throw std::invalid_argument("div_quotient must be nonnegative");
    if (cplex_max_depth < 1) throw std::invalid_argument("cplex_max_depth must be >= 1");
    if (cplex_min_operands < 4) throw std::invalid_argument("cplex operand count must be >= 4");
    if (cplex_max_operands < cplex_min_operands) {
        throw std::invalid_argument("cplex operand range empty");
    }
    if ((1LL << cplex_max_depth) < cplex_max_operands) {
        throw std::invalid_argument("cplex_max_depth too small for cplex_max_operands");
    }
    if (max_abs_value < 1000) throw std::invalid_argument("max_abs_value too small");
}

namespace {

long long draw(const OperandRange& r, Rng& rng) {
    return std::uniform_int_distribution<long long>(r.min, r.max)(rng);
}

long long draw(long long lo, long long hi, Rng& rng) {
    return std::uniform_int_distribution<long long>(lo, hi)(rng);
}

Expr gen_elementary(Skill skill, const GenConfig& cfg, Rng& rng) {
    switch (skill) {
        case Skill::Add:
            return Expr::node(BinOp::Add, Expr::leaf(draw(cfg.add_lhs, rng)),
                              Expr::leaf(draw(cfg.add_rhs, rng)));
        case Skill::Sub:
            return Expr::node(BinOp::Sub, Expr::leaf(draw(cfg.sub_lhs, rng)),
                              Expr::leaf(draw(cfg.sub_rhs, rng)));
        case Skill::Mul:
            return Expr::node(BinOp::Mul, Expr::leaf(draw(cfg.mul_lhs, rng)),
                              Expr::leaf(draw(cfg.mul_rhs, rng)));
        case Skill::Div: {
            long long q = draw(cfg.div_quotient, rng);
            long long d = draw(cfg.div_divisor, rng);
            return Expr::node(BinOp::Div, Expr::leaf(BigInt(q) * d), Expr::leaf(d));
        }
        default: throw std::logic_error("gen_elementary: not an elementary skill");
    }
}

// Two distinct operators, division always on the inner node so exactness can
// be built divisor-first (the "(33 / 33) * 64" shape).
Expr gen_ops(const GenConfig& cfg, Rng& rng) {
    static constexpr std::array<BinOp, 4> ops{BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div};
    BinOp inner = ops[static_cast<size_t>(draw(0, 3, rng))];
    BinOp outer = inner;
    while (outer == inner) outer = ops[static_cast<size_t>(draw(0, 3, rng))];
    if (outer == BinOp::Div) std::swap(inner, outer);

    auto inner_skill = [](BinOp op) {
        switch (op) {
            case BinOp::Add: return Skill::Add;
            case BinOp::Sub: return Skill::Sub;
            case BinOp::Mul: return Skill::Mul;
            case BinOp::Div: return Skill::Div;
        }
        return Skill::Add;
    };
    Expr inner_node = gen_elementary(inner_skill(inner), cfg, rng);

    // Keep outer multiplications within the configured magnitude bound.
    OperandRange outer_range{1, 999};
    if (outer == BinOp::Mul) {
        BigInt v = eval_expr(inner_node);
        BigInt abs_v = v < 0 ? -v : v;
        long long cap = abs_v == 0 ? 999 : cfg.max_abs_value / std::max<long long>(1, abs_v.convert_to<long long>());
        outer_range = {1, std::clamp<long long>(cap, 1, 999)};
    }
    Expr outer_leaf = Expr::leaf(draw(outer_range, rng));
    bool inner_left = draw(0, 1, rng) == 0;
    return inner_left ? Expr::node(outer, inner_node, outer_leaf)
                      : Expr::node(outer, outer_leaf, inner_node);
}

struct CplexBuilder {
    const GenConfig& cfg;
    Rng& rng;

    // Builds a subtree with n leaves, depth <= depth_budget, and
    // |value| <= bound everywhere inside. Divisions keep the dividend as a
    // leaf computed from the divisor subtree's value, so they are exact.
    Expr build(int n, int depth_budget, long long bound) {
        if (n == 1) return Expr::leaf(draw(1, std::min<long long>(999, bound), rng));

        long long cap = 1LL << (depth_budget - 1);
        long long lmin = std::max<long long>(1, n - cap);
        long long lmax = std::min<long long>(n - 1, cap);
        int left_n = static_cast<int>(draw(lmin, lmax, rng));
        int right_n = n - left_n;

        for (int attempt = 0; attempt < 64; ++attempt) {
            BinOp op = pick_op(left_n);
            if (op == BinOp::Div) {
                if (auto div = try_div(right_n, depth_budget, bound)) return *div;
                continue;
            }
            if (op == BinOp::Mul) {
                // Split the magnitude budget so the product stays in bound.
                long long bl = std::max<long long>(1, isqrt(bound));
                long long br = std::max<long long>(1, bound / bl);
                Expr l = build(left_n, depth_budget - 1, bl);
                Expr r = build(right_n, depth_budget - 1, br);
                if (fits(l, r, op, bound)) return Expr::node(op, l, r);
                continue;
            }
            Expr l = build(left_n, depth_budget - 1, bound);
            Expr r = build(right_n, depth_budget - 1, bound);
            if (fits(l, r, op, bound)) return Expr::node(op, l, r);
        }
        // Additions of in-range positives always fit; reached only if bound
        // is pathologically tight, which validate() rules out.
        throw std::logic_error("cplex generation exhausted retries");
    }

    static long long isqrt(long long v) {
        long long r = static_cast<long long>(std::sqrt(static_cast<double>(v)));
        while (r > 1 && r * r > v) --r;
        while ((r + 1) * (r + 1) <= v) ++r;
        return r;
    }

    BinOp pick_op(int left_n) {
        // Division requires a leaf dividend on the left.
        int hi = left_n == 1 ? 3 : 2;
        switch (draw(0, hi, rng)) {
            case 0: return BinOp::Add;
            case 1: return BinOp::Sub;
            case 2: return BinOp::Mul;
            default: return BinOp::Div;
        }
    }

    std::optional<Expr> try_div(int divisor_n, int depth_budget, long long bound) {
        for (int attempt = 0; attempt < 32; ++attempt) {
            Expr divisor = build(divisor_n, depth_budget - 1, 99);
            BigInt d = eval_expr(divisor);
            if (d < 2 || d > 99) continue;
            long long dv = d.convert_to<long long>();
            long long qmax = std::min<long long>(99, bound / dv);
            if (qmax < 2) continue;
            long long q = draw(2, qmax, rng);
            return Expr::node(BinOp::Div, Expr::leaf(BigInt(q) * dv), divisor);
        }
        return std::nullopt;
    }

    bool fits(const Expr& l, const Expr& r, BinOp op, long long bound) {
        BigInt lv = eval_expr(l);
        BigInt rv = eval_expr(r);
        BigInt v;
        if (op == BinOp::Add) {
            v = lv + rv;
        } else if (op == BinOp::Sub) {
            v = lv - rv;
        } else {
            v = lv * rv;
        }
        if (v < 0) v = -v;
        return v <= bound;
    }
};

int distinct_op_kinds(const Expr& e) {
    bool seen[4] = {false, false, false, false};
    auto walk = [&](auto&& self, const Expr& node) -> void {
        if (node.is_leaf()) return;
        seen[static_cast<int>(node.op())] = true;
        self(self, node.lhs());
        self(self, node.rhs());
    };
    walk(walk, e);
    return static_cast<int>(seen[0]) + seen[1] + seen[2] + seen[3];
}

Expr gen_cplex(const GenConfig& cfg, Rng& rng) {
    CplexBuilder builder{cfg, rng};
    for (int attempt = 0; attempt < 1000; ++attempt) {
        int n = static_cast<int>(draw(cfg.cplex_min_operands, cfg.cplex_max_operands, rng));
        Expr e = builder.build(n, cfg.cplex_max_depth, cfg.max_abs_value);
        if (e.op_count() >= 3 && distinct_op_kinds(e) >= 3) return e;
    }
    throw std::logic_error("cplex generation could not hit 3 operator kinds");
}

}  // namespace

Expr gen_expr(Skill skill, const GenConfig& cfg, Rng& rng) {
    cfg.validate();
    switch (skill) {
        case Skill::Add:
        case Skill::Sub:
        case Skill::Mul:
        case Skill::Div: return gen_elementary(skill, cfg, rng);
        case Skill::Ops: return gen_ops(cfg, rng);
        case Skill::Cplex: return gen_cplex(cfg, rng);
    }
    throw std::logic_error("unknown skill");
}

namespace {

// Spacing/parenthesization convention of the synthetic corpus: trees with
// >= 3 operators print the outermost chain tightly, left children continue
// the chain unparenthesized where precedence allows, and composed right
// children are parenthesized; inside any parentheses operators are spaced
// and every composed child is parenthesized. Smaller trees are spaced
// throughout.
int op_precedence(BinOp op) {
    return (op == BinOp::Mul || op == BinOp::Div) ? 2 : 1;
}

void render_node(const Expr& e, int level, bool tight, std::string& out) {
    if (e.is_leaf()) {
        out += e.value().str();
        return;
    }
    bool top_chain = tight && level == 0;

    const Expr l = e.lhs();
    if (l.is_leaf()) {
        out += l.value().str();
    } else if (top_chain && op_precedence(l.op()) >= op_precedence(e.op())) {
        render_node(l, 0, tight, out);
    } else {
        out += '(';
        render_node(l, level + 1, tight, out);
        out += ')';
    }

    if (top_chain) {
        out += op_symbol(e.op());
    } else {
        out += ' ';
        out += op_symbol(e.op());
        out += ' ';
    }

    const Expr r = e.rhs();
    if (r.is_leaf()) {
        out += r.value().str();
    } else {
        out += '(';
        render_node(r, level + 1, tight, out);
        out += ')';
    }
}

std::string substitute(std::string_view tmpl, const std::string& a, const std::string& b) {
    std::string out;
    out.reserve(tmpl.size() + a.size() + b.size());
    for (size_t i = 0; i < tmpl.size();) {
        if (tmpl.compare(i, 3, "{a}") == 0) {
            out += a;
            i += 3;
        } else if (tmpl.compare(i, 3, "{b}") == 0) {
            out += b;
            i += 3;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

void require_binary(const Expr& e, SurfaceFormat fmt) {
    if (e.is_leaf() || !e.lhs().is_leaf() || !e.rhs().is_leaf()) {
        throw std::invalid_argument(std::string("format '") + std::string(format_name(fmt)) +
                                    "' requires a single binary node");
    }
}

}  // namespace

std::string render_infix(const Expr& e) {
    std::string out;
    render_node(e, 0, e.op_count() >= 3, out);
    return out;
}

const std::vector<std::string>& word_problem_templates(BinOp op) {
    static const std::vector<std::string> add{
        "Sam has {a} marbles and finds {b} more. How many marbles does Sam have now?",
        "A library holds {a} books and receives {b} new ones. How many books does the library "
        "hold now?",
        "Mia walked {a} meters in the morning and {b} meters in the afternoon. How many meters "
        "did she walk in total?",
    };
    static const std::vector<std::string> sub{
        "Amy made {a} dollars profit and spends {b} dollars as her cost. What is her net profit?",
        "Tom had {a} apples and gave away {b} of them. How many apples does Tom have left?",
        "A tank holds {a} liters of water and {b} liters drain out. How many liters remain?",
    };
    static const std::vector<std::string> mul{
        "A crate holds {b} boxes and each box holds {a} pens. How many pens are in the crate?",
        "Each of the {b} shelves carries {a} jars. How many jars are there in total?",
        "A ticket costs {a} dollars and {b} tickets were sold. How much money was collected?",
    };
    static const std::vector<std::string> divt{
        "{a} cookies are shared equally among {b} children. How many cookies does each child "
        "get?",
        "A rope of {a} centimeters is cut into {b} equal pieces. How long is each piece?",
        "{a} students are split into {b} equal teams. How many students are on each team?",
    };
    switch (op) {
        case BinOp::Add: return add;
        case BinOp::Sub: return sub;
        case BinOp::Mul: return mul;
        case BinOp::Div: return divt;
    }
    return add;
}

std::string render_word_problem(const Expr& e, size_t template_index) {
    require_binary(e, SurfaceFormat::WordProblem);
    const auto& pool = word_problem_templates(e.op());
    if (template_index >= pool.size()) throw std::invalid_argument("template index out of range");
    return substitute(pool[template_index], e.lhs().value().str(), e.rhs().value().str());
}

std::string render(const Expr& e, SurfaceFormat fmt, Rng& rng) {
    switch (fmt) {
        case SurfaceFormat::Question: return "What is " + render_infix(e) + "?";
        case SurfaceFormat::Instruction: {
            require_binary(e, fmt);
            const std::string a = e.lhs().value().str();
            const std::string b = e.rhs().value().str();
            switch (e.op()) {
                case BinOp::Add: return "Add " + a + " and " + b;
                case BinOp::Sub: return "Subtract " + b + " from " + a;
                case BinOp::Mul: return "Multiply " + a + " by " + b;
                case BinOp::Div: return "Divide " + a + " by " + b;
            }
            break;
        }
        case SurfaceFormat::Symbolic: {
            require_binary(e, fmt);
            return "A=" + e.lhs().value().str() + ", B=" + e.rhs().value().str() + ". A" +
                   op_symbol(e.op()) + "B=?";
        }
        case SurfaceFormat::WordProblem: {
            require_binary(e, fmt);
            const auto& pool = word_problem_templates(e.op());
            size_t idx = std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng);
            return render_word_problem(e, idx);
        }
    }
    throw std::invalid_argument("unknown surface format");
}

ParseError::ParseError(size_t pos, std::string msg)
    : std::runtime_error("parse error at position " + std::to_string(pos) + ": " + msg),
      position(pos),
      message(std::move(msg)) {}

namespace {

class QuestionParser {
public:
    explicit QuestionParser(std::string_view text) : text_(text) {}

    Expr parse() {
        skip_spaces();
        Expr e = parse_sum();
        skip_spaces();
        if (pos_ < text_.size() && text_[pos_] == '?') ++pos_;
        skip_spaces();
        if (pos_ != text_.size()) throw ParseError(pos_, "unexpected trailing text");
        return e;
    }

private:
    Expr parse_sum() {
        Expr e = parse_term();
        for (;;) {
            skip_spaces();
            if (pos_ >= text_.size()) return e;
            char c = text_[pos_];
            if (c != '+' && c != '-') return e;
            ++pos_;
            e = Expr::node(c == '+' ? BinOp::Add : BinOp::Sub, e, parse_term());
        }
    }

    Expr parse_term() {
        Expr e = parse_factor();
        for (;;) {
            skip_spaces();
            if (pos_ >= text_.size()) return e;
            char c = text_[pos_];
            if (c != '*' && c != '/') return e;
            ++pos_;
            e = Expr::node(c == '*' ? BinOp::Mul : BinOp::Div, e, parse_factor());
        }
    }

    Expr parse_factor() {
        skip_spaces();
        if (pos_ >= text_.size()) throw ParseError(pos_, "expected number or '('");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_sum();
            skip_spaces();
            if (pos_ >= text_.size() || text_[pos_] != ')') {
                throw ParseError(pos_, "expected ')'");
            }
            ++pos_;
            return e;
        }
        if (c < '0' || c > '9') throw ParseError(pos_, "expected number");
        size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') ++pos_;
        return Expr::leaf(BigInt(std::string(text_.substr(start, pos_ - start))));
    }

    void skip_spaces() {
        while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
    }

    std::string_view text_;
    size_t pos_ = 0;
};

// "A=<a>, B=<b>. A<op>B=?"
Expr parse_symbolic(std::string_view text) {
    size_t pos = 0;
    auto expect = [&](std::string_view token) {
        if (text.compare(pos, token.size(), token) != 0) {
            throw ParseError(pos, "expected '" + std::string(token) + "'");
        }
        pos += token.size();
    };
    auto read_int = [&]() {
        size_t start = pos;
        if (pos < text.size() && text[pos] == '-') ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        if (pos == start) throw ParseError(pos, "expected number");
        return BigInt(std::string(text.substr(start, pos - start)));
    };
    expect("A=");
    BigInt a = read_int();
    expect(", B=");
    BigInt b = read_int();
    expect(". A");
    if (pos >= text.size()) throw ParseError(pos, "expected operator");
    char opc = text[pos++];
    BinOp op;
    switch (opc) {
        case '+': op = BinOp::Add; break;
        case '-': op = BinOp::Sub; break;
        case '*': op = BinOp::Mul; break;
        case '/': op = BinOp::Div; break;
        default: throw ParseError(pos - 1, "expected operator");
    }
    expect("B=?");
    if (pos != text.size()) throw ParseError(pos, "unexpected trailing text");
    return Expr::node(op, Expr::leaf(std::move(a)), Expr::leaf(std::move(b)));
}

}  // namespace

Expr parse_question(std::string_view text) {
    constexpr std::string_view kPrefix = "What is ";
    if (text.substr(0, kPrefix.size()) == kPrefix) {
        QuestionParser parser(text.substr(kPrefix.size()));
        try {
            return parser.parse();
        } catch (const ParseError& e) {
            throw ParseError(e.position + kPrefix.size(), e.message);
        }
    }
    if (text.substr(0, 2) == "A=") return parse_symbolic(text);
    throw ParseError(0, "expected 'What is ...' or 'A=...' question");
}

Numeral to_numeral(const BigInt& v) {
    auto n = Numeral::parse(v.str());
    if (!n) throw std::logic_error("BigInt did not parse as numeral");
    return *n;
}

}  // namespace ntkeval::expr
