#pragma once

// Parametric temporal specs over a single sampled signal.
//
// Text form (.psl):
//     param tau in [0,1];
//     param h in [0,1];
//     spec G[tau,1] (x < h)
//
// Grammar (whitespace-insensitive, '#' starts a comment to end of line):
//     file    := { param } 'spec' formula
//     param   := 'param' IDENT 'in' '[' NUMBER ',' NUMBER ']' ';'
//     formula := conj { 'or' conj }
//     conj    := unary { 'and' unary }
//     unary   := 'not' unary | ('G'|'F') '[' bound ',' bound ']' unary | prim
//     prim    := '(' formula ')' | 'x' '<' bound | 'x' '>' bound
//     bound   := NUMBER | IDENT
//
// Parsing produces negation normal form ('not' only directly above atoms) with
// 'and'/'or' flattened to canonical n-ary nodes. Every parameter receives a
// polarity (direction in which increasing the raw value enlarges the validity
// domain); evaluation maps the normalized unit cube through polarity flips and
// the declared raw ranges, so validity domains are always upward closed in
// normalized coordinates.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logidist/common.hpp"
#include "logidist/trace.hpp"

namespace logidist {

enum class NodeKind { Globally, Eventually, And, Or, Not, AtomLess, AtomGreater };
enum class Polarity { Increasing, Decreasing };

/// Temporal bound or atom threshold: a literal constant or a named parameter.
struct Bound {
    bool is_param = false;
    double value = 0.0;      // constant case
    std::string name;        // parameter case
    int param_index = -1;    // resolved during parsing

    static Bound constant(double v) { return Bound{false, v, "", -1}; }
    static Bound param(std::string n, int idx) { return Bound{true, 0.0, std::move(n), idx}; }
    bool operator==(const Bound& o) const {
        if (is_param != o.is_param) return false;
        return is_param ? name == o.name : value == o.value;
    }
};

struct SpecNode {
    NodeKind kind = NodeKind::AtomLess;
    Bound lo, hi;                    // Globally / Eventually window
    Bound threshold;                 // atoms
    std::vector<SpecNode> children;  // And/Or: >= 2, Not/Globally/Eventually: exactly 1
    bool operator==(const SpecNode&) const = default;
};

struct ParamDecl {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    Polarity polarity = Polarity::Increasing;
    bool operator==(const ParamDecl&) const = default;
};

struct ParametricSpec {
    std::string id;
    std::vector<ParamDecl> params;  // declaration order = normalized coordinate order
    SpecNode root;

    std::size_t dims() const { return params.size(); }
};

// ---------------------------------------------------------------------------
// Lexer / parser
// ---------------------------------------------------------------------------

namespace detail {

enum class Tok { Ident, Number, LBracket, RBracket, LParen, RParen, Less, Greater, Comma, Semi, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_space();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) {
            t.kind = Tok::End;
            return t;
        }
        char c = src_[pos_];
        auto single = [&](Tok k) {
            t.kind = k;
            t.text = std::string(1, c);
            advance();
            return t;
        };
        switch (c) {
            case '[': return single(Tok::LBracket);
            case ']': return single(Tok::RBracket);
            case '(': return single(Tok::LParen);
            case ')': return single(Tok::RParen);
            case '<': return single(Tok::Less);
            case '>': return single(Tok::Greater);
            case ',': return single(Tok::Comma);
            case ';': return single(Tok::Semi);
            default: break;
        }
        if (is_number_start(c)) return lex_number(t);
        if (is_ident_start(c)) return lex_ident(t);
        throw input_error("spec parse error at line " + std::to_string(line_) + " col " +
                          std::to_string(col_) + ": unexpected character '" + std::string(1, c) + "'");
    }

private:
    static bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool is_ident(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }
    bool is_number_start(char c) const {
        if (std::isdigit(static_cast<unsigned char>(c))) return true;
        if ((c == '-' || c == '+') && pos_ + 1 < src_.size()) {
            char n = src_[pos_ + 1];
            return std::isdigit(static_cast<unsigned char>(n)) || n == '.';
        }
        return c == '.' && pos_ + 1 < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]));
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    Token lex_number(Token t) {
        std::size_t start = pos_;
        if (src_[pos_] == '-' || src_[pos_] == '+') advance();
        bool seen_exp = false;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                advance();
            } else if ((c == 'e' || c == 'E') && !seen_exp) {
                seen_exp = true;
                advance();
                if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) advance();
            } else {
                break;
            }
        }
        t.kind = Tok::Number;
        t.text = std::string(src_.substr(start, pos_ - start));
        if (!parse_double(t.text, t.number))
            throw input_error("spec parse error at line " + std::to_string(t.line) + " col " +
                              std::to_string(t.col) + ": bad number '" + t.text + "'");
        return t;
    }

    Token lex_ident(Token t) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident(src_[pos_])) advance();
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
        return t;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { shift(); }

    ParametricSpec parse() {
        ParametricSpec spec;
        while (cur_.kind == Tok::Ident && cur_.text == "param") parse_param(spec);
        expect_keyword("spec");
        SpecNode raw = parse_formula(spec);
        if (cur_.kind != Tok::End) fail("trailing input after formula");
        spec.root = to_nnf(std::move(raw), false);
        resolve_polarities(spec);
        return spec;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw input_error("spec parse error at line " + std::to_string(cur_.line) + " col " +
                          std::to_string(cur_.col) + ": " + what);
    }

    void shift() { cur_ = lexer_.next(); }

    void expect(Tok k, const char* what) {
        if (cur_.kind != k) fail(std::string("expected ") + what);
        shift();
    }

    void expect_keyword(const std::string& kw) {
        if (cur_.kind != Tok::Ident || cur_.text != kw) fail("expected '" + kw + "'");
        shift();
    }

    static bool is_keyword(const std::string& s) {
        return s == "param" || s == "in" || s == "spec" || s == "and" || s == "or" || s == "not";
    }

    void parse_param(ParametricSpec& spec) {
        shift();  // 'param'
        if (cur_.kind != Tok::Ident || is_keyword(cur_.text)) fail("expected parameter name");
        std::string name = cur_.text;
        for (const ParamDecl& p : spec.params)
            if (p.name == name) fail("parameter '" + name + "' declared twice");
        shift();
        expect_keyword("in");
        expect(Tok::LBracket, "'['");
        if (cur_.kind != Tok::Number) fail("expected range lower bound");
        double lo = cur_.number;
        shift();
        expect(Tok::Comma, "','");
        if (cur_.kind != Tok::Number) fail("expected range upper bound");
        double hi = cur_.number;
        shift();
        expect(Tok::RBracket, "']'");
        expect(Tok::Semi, "';'");
        if (!(lo < hi)) fail("parameter '" + name + "' needs lo < hi");
        spec.params.push_back({name, lo, hi, Polarity::Increasing});
    }

    Bound parse_bound(ParametricSpec& spec) {
        if (cur_.kind == Tok::Number) {
            double v = cur_.number;
            shift();
            return Bound::constant(v);
        }
        if (cur_.kind == Tok::Ident && !is_keyword(cur_.text)) {
            for (std::size_t i = 0; i < spec.params.size(); ++i) {
                if (spec.params[i].name == cur_.text) {
                    Bound b = Bound::param(cur_.text, static_cast<int>(i));
                    shift();
                    return b;
                }
            }
            fail("undeclared parameter '" + cur_.text + "'");
        }
        fail("expected number or parameter");
    }

    SpecNode parse_formula(ParametricSpec& spec) {
        SpecNode left = parse_conj(spec);
        std::vector<SpecNode> children;
        children.push_back(std::move(left));
        while (cur_.kind == Tok::Ident && cur_.text == "or") {
            shift();
            children.push_back(parse_conj(spec));
        }
        if (children.size() == 1) return std::move(children[0]);
        SpecNode n;
        n.kind = NodeKind::Or;
        n.children = std::move(children);
        return n;
    }

    SpecNode parse_conj(ParametricSpec& spec) {
        SpecNode left = parse_unary(spec);
        std::vector<SpecNode> children;
        children.push_back(std::move(left));
        while (cur_.kind == Tok::Ident && cur_.text == "and") {
            shift();
            children.push_back(parse_unary(spec));
        }
        if (children.size() == 1) return std::move(children[0]);
        SpecNode n;
        n.kind = NodeKind::And;
        n.children = std::move(children);
        return n;
    }

    SpecNode parse_unary(ParametricSpec& spec) {
        if (cur_.kind == Tok::Ident && cur_.text == "not") {
            shift();
            SpecNode n;
            n.kind = NodeKind::Not;
            n.children.push_back(parse_unary(spec));
            return n;
        }
        if (cur_.kind == Tok::Ident && (cur_.text == "G" || cur_.text == "F")) {
            NodeKind kind = cur_.text == "G" ? NodeKind::Globally : NodeKind::Eventually;
            shift();
            expect(Tok::LBracket, "'[' after temporal operator");
            SpecNode n;
            n.kind = kind;
            n.lo = parse_bound(spec);
            expect(Tok::Comma, "','");
            n.hi = parse_bound(spec);
            expect(Tok::RBracket, "']'");
            n.children.push_back(parse_unary(spec));
            return n;
        }
        return parse_primary(spec);
    }

    SpecNode parse_primary(ParametricSpec& spec) {
        if (cur_.kind == Tok::LParen) {
            shift();
            SpecNode n = parse_formula(spec);
            expect(Tok::RParen, "')'");
            return n;
        }
        if (cur_.kind == Tok::Ident && !is_keyword(cur_.text)) {
            if (cur_.text != "x") fail("unknown signal '" + cur_.text + "' (traces carry a single signal 'x')");
            shift();
            SpecNode n;
            if (cur_.kind == Tok::Less) {
                n.kind = NodeKind::AtomLess;
            } else if (cur_.kind == Tok::Greater) {
                n.kind = NodeKind::AtomGreater;
            } else {
                fail("expected '<' or '>' after signal");
            }
            shift();
            n.threshold = parse_bound(spec);
            return n;
        }
        fail("expected formula");
    }

    // Negation normal form: 'not' survives only directly above atoms; dual
    // operators absorb negation; and/or re-flatten afterwards.
    static SpecNode to_nnf(SpecNode n, bool negate) {
        switch (n.kind) {
            case NodeKind::AtomLess:
            case NodeKind::AtomGreater: {
                if (!negate) return n;
                SpecNode wrap;
                wrap.kind = NodeKind::Not;
                wrap.children.push_back(std::move(n));
                return wrap;
            }
            case NodeKind::Not:
                return to_nnf(std::move(n.children[0]), !negate);
            case NodeKind::And:
            case NodeKind::Or: {
                bool flip = negate;
                NodeKind kind = n.kind;
                if (flip) kind = kind == NodeKind::And ? NodeKind::Or : NodeKind::And;
                SpecNode out;
                out.kind = kind;
                for (SpecNode& c : n.children) {
                    SpecNode t = to_nnf(std::move(c), negate);
                    if (t.kind == kind) {
                        for (SpecNode& gc : t.children) out.children.push_back(std::move(gc));
                    } else {
                        out.children.push_back(std::move(t));
                    }
                }
                return out;
            }
            case NodeKind::Globally:
            case NodeKind::Eventually: {
                SpecNode out;
                out.kind = n.kind;
                if (negate)
                    out.kind = n.kind == NodeKind::Globally ? NodeKind::Eventually : NodeKind::Globally;
                out.lo = n.lo;
                out.hi = n.hi;
                out.children.push_back(to_nnf(std::move(n.children[0]), negate));
                return out;
            }
        }
        throw internal_error("to_nnf: unhandled node kind");
    }

    // Polarity: the direction in which growing a raw parameter value can only
    // grow the validity domain. sign=+1 context rules: threshold of 'x <' is
    // increasing, of 'x >' decreasing; a window lower bound is increasing
    // under G and decreasing under F, the upper bound the other way round;
    // 'not' flips the context.
    void resolve_polarities(ParametricSpec& spec) {
        std::vector<int> seen(spec.params.size(), 0);  // +1 / -1 / 0 unseen
        record_polarities(spec.root, +1, spec, seen);
        for (std::size_t i = 0; i < spec.params.size(); ++i)
            spec.params[i].polarity = seen[i] < 0 ? Polarity::Decreasing : Polarity::Increasing;
    }

    void record_polarities(const SpecNode& n, int sign, ParametricSpec& spec, std::vector<int>& seen) {
        auto record = [&](const Bound& b, int s) {
            if (!b.is_param) return;
            int& slot = seen[static_cast<std::size_t>(b.param_index)];
            if (slot == 0) {
                slot = s;
            } else if (slot != s) {
                throw input_error("parameter '" + b.name + "' used with inconsistent polarity");
            }
        };
        switch (n.kind) {
            case NodeKind::AtomLess:
                record(n.threshold, sign);
                return;
            case NodeKind::AtomGreater:
                record(n.threshold, -sign);
                return;
            case NodeKind::Not:
                record_polarities(n.children[0], -sign, spec, seen);
                return;
            case NodeKind::And:
            case NodeKind::Or:
                for (const SpecNode& c : n.children) record_polarities(c, sign, spec, seen);
                return;
            case NodeKind::Globally:
                record(n.lo, sign);
                record(n.hi, -sign);
                record_polarities(n.children[0], sign, spec, seen);
                return;
            case NodeKind::Eventually:
                record(n.lo, -sign);
                record(n.hi, sign);
                record_polarities(n.children[0], sign, spec, seen);
                return;
        }
    }

    Lexer lexer_;
    Token cur_;
};

}  // namespace detail

inline ParametricSpec parse_spec(std::string_view text, std::string id = "spec") {
    detail::Parser p(text);
    ParametricSpec spec = p.parse();
    spec.id = std::move(id);
    return spec;
}

inline ParametricSpec load_spec(const std::filesystem::path& path) {
    return parse_spec(read_file(path), path.stem().string());
}

/// The running example: "after time tau the signal stays below h".
inline const char* phi_ex_text() {
    return "param tau in [0,1];\nparam h in [0,1];\nspec G[tau,1] (x < h)\n";
}

inline ParametricSpec phi_ex() { return parse_spec(phi_ex_text(), "phi_ex"); }

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

struct EvalContext {
    const Trace* trace;
    const std::vector<double>* raw;  // raw parameter values, declaration order
};

inline double bound_value(const Bound& b, const EvalContext& ctx) {
    return b.is_param ? (*ctx.raw)[static_cast<std::size_t>(b.param_index)] : b.value;
}

inline bool eval_node(const SpecNode& n, const EvalContext& ctx, double t_eval) {
    switch (n.kind) {
        case NodeKind::AtomLess:
            return value_at_clamped(*ctx.trace, t_eval) < bound_value(n.threshold, ctx);
        case NodeKind::AtomGreater:
            return value_at_clamped(*ctx.trace, t_eval) > bound_value(n.threshold, ctx);
        case NodeKind::Not:
            return !eval_node(n.children[0], ctx, t_eval);
        case NodeKind::And:
            for (const SpecNode& c : n.children)
                if (!eval_node(c, ctx, t_eval)) return false;
            return true;
        case NodeKind::Or:
            for (const SpecNode& c : n.children)
                if (eval_node(c, ctx, t_eval)) return true;
            return false;
        case NodeKind::Globally:
        case NodeKind::Eventually: {
            // Quantifies over samples in the window (t_eval + lo, t_eval + hi]:
            // strict lower edge, closed upper edge. Empty windows make G
            // vacuously true and F false.
            double lo = t_eval + bound_value(n.lo, ctx);
            double hi = t_eval + bound_value(n.hi, ctx);
            const auto& samples = ctx.trace->samples;
            auto it = std::upper_bound(samples.begin(), samples.end(), lo,
                                       [](double lhs, const Sample& s) { return lhs < s.time; });
            bool globally = n.kind == NodeKind::Globally;
            for (; it != samples.end() && it->time <= hi; ++it) {
                bool v = eval_node(n.children[0], ctx, it->time);
                if (globally && !v) return false;
                if (!globally && v) return true;
            }
            return globally;
        }
    }
    throw internal_error("eval_node: unhandled node kind");
}

}  // namespace detail

/// Maps a normalized point to raw parameter values: decreasing-polarity
/// coordinates flip (p -> 1-p), then the declared range applies affinely.
inline std::vector<double> raw_params(const ParametricSpec& spec, const std::vector<double>& theta) {
    if (theta.size() != spec.params.size())
        throw input_error("evaluate: point has " + std::to_string(theta.size()) + " coordinates, spec '" +
                          spec.id + "' has " + std::to_string(spec.params.size()) + " parameters");
    std::vector<double> raw(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double p = theta[i];
        if (p < -1e-9 || p > 1.0 + 1e-9)
            throw input_error("evaluate: normalized coordinate " + std::to_string(i) + " = " +
                              format_double(p) + " outside [0,1]");
        p = std::min(1.0, std::max(0.0, p));
        if (spec.params[i].polarity == Polarity::Decreasing) p = 1.0 - p;
        raw[i] = spec.params[i].lo + p * (spec.params[i].hi - spec.params[i].lo);
    }
    return raw;
}

/// Boolean satisfaction at a normalized parameter point theta in [0,1]^n.
/// Monotone: theta <= theta' coordinatewise implies evaluate(theta) <= evaluate(theta').
inline bool evaluate(const ParametricSpec& spec, const Trace& trace, const std::vector<double>& theta) {
    if (trace.samples.empty()) throw input_error("evaluate: trace '" + trace.id + "' has no samples");
    std::vector<double> raw = raw_params(spec, theta);
    detail::EvalContext ctx{&trace, &raw};
    return detail::eval_node(spec.root, ctx, 0.0);
}

// ---------------------------------------------------------------------------
// Canonical printing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string bound_to_string(const Bound& b) {
    return b.is_param ? b.name : format_double(b.value);
}

inline std::string print_node(const SpecNode& n, bool parenthesize_or) {
    switch (n.kind) {
        case NodeKind::AtomLess:
            return "x < " + bound_to_string(n.threshold);
        case NodeKind::AtomGreater:
            return "x > " + bound_to_string(n.threshold);
        case NodeKind::Not:
            return "not (" + print_node(n.children[0], false) + ")";
        case NodeKind::Globally:
        case NodeKind::Eventually: {
            std::string op = n.kind == NodeKind::Globally ? "G" : "F";
            return op + "[" + bound_to_string(n.lo) + "," + bound_to_string(n.hi) + "] (" +
                   print_node(n.children[0], false) + ")";
        }
        case NodeKind::And: {
            std::string out;
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) out += " and ";
                out += print_node(n.children[i], true);
            }
            return out;
        }
        case NodeKind::Or: {
            std::string body;
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) body += " or ";
                body += print_node(n.children[i], false);
            }
            return parenthesize_or ? "(" + body + ")" : body;
        }
    }
    throw internal_error("print_node: unhandled node kind");
}

}  // namespace detail

inline std::string pretty_print(const ParametricSpec& spec) {
    std::string out;
    for (const ParamDecl& p : spec.params)
        out += "param " + p.name + " in [" + format_double(p.lo) + "," + format_double(p.hi) + "];\n";
    out += "spec " + detail::print_node(spec.root, false) + "\n";
    return out;
}

inline bool same_structure(const ParametricSpec& a, const ParametricSpec& b) {
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (!(a.params[i] == b.params[i])) return false;
    return a.root == b.root;
}

}  // namespace logidist
