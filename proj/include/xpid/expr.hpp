#pragma once

// Scalar expression language for user plants.
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := number | ident | func '(' expr ')' | '(' expr ')' | '-' factor
//
// Identifiers are u and x1..xn; functions are sin, cos, tanh, exp, abs.
// Trees are stored flat in postfix order, so evaluation is one pass over a stack.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "xpid/error.hpp"

namespace xpid {

/// Parse failure carrying the byte offset into the source text.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t pos, const std::string& msg)
        : Error(code, msg + " at position " + std::to_string(pos)), pos_(pos) {}
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }

private:
    std::size_t pos_;
};

enum class Func { Sin, Cos, Tanh, Exp, Abs };
enum class NodeKind { Number, Variable, Negate, Add, Sub, Mul, Div, Call };

struct ExprNode {
    NodeKind kind = NodeKind::Number;
    double value = 0.0;  // Number: always >= 0, signs are Negate nodes
    int var = 0;         // Variable: 0 is u, i >= 1 is x_i
    Func func = Func::Sin;

    friend bool operator==(const ExprNode& a, const ExprNode& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case NodeKind::Number: return a.value == b.value;
            case NodeKind::Variable: return a.var == b.var;
            case NodeKind::Call: return a.func == b.func;
            default: return true;
        }
    }
};

inline constexpr std::array<std::string_view, 5> kFuncNames{"sin", "cos", "tanh", "exp", "abs"};

inline std::string_view func_name(Func f) { return kFuncNames[static_cast<std::size_t>(f)]; }

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

class Expr {
public:
    Expr() = default;

    static Expr number(double v) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(ErrorCode::InvalidArgument, "number literals are finite and nonnegative");
        return leaf({NodeKind::Number, v, 0, Func::Sin});
    }
    static Expr variable(int i) {
        if (i < 0) throw Error(ErrorCode::InvalidArgument, "variable index must be >= 0");
        return leaf({NodeKind::Variable, 0.0, i, Func::Sin});
    }
    static Expr negate(const Expr& a) { return unary(a, {NodeKind::Negate, 0.0, 0, Func::Sin}); }
    static Expr call(Func f, const Expr& a) { return unary(a, {NodeKind::Call, 0.0, 0, f}); }
    static Expr binary(NodeKind op, const Expr& a, const Expr& b) {
        if (op != NodeKind::Add && op != NodeKind::Sub && op != NodeKind::Mul && op != NodeKind::Div)
            throw Error(ErrorCode::InvalidArgument, "not a binary operator");
        Expr e;
        e.nodes_ = a.nodes_;
        e.nodes_.insert(e.nodes_.end(), b.nodes_.begin(), b.nodes_.end());
        e.nodes_.push_back({op, 0.0, 0, Func::Sin});
        e.finish();
        return e;
    }

    [[nodiscard]] const std::vector<ExprNode>& nodes() const { return nodes_; }
    [[nodiscard]] bool empty() const { return nodes_.empty(); }
    [[nodiscard]] bool uses_u() const {
        for (const auto& n : nodes_)
            if (n.kind == NodeKind::Variable && n.var == 0) return true;
        return false;
    }
    [[nodiscard]] int max_state_index() const {
        int m = 0;
        for (const auto& n : nodes_)
            if (n.kind == NodeKind::Variable) m = std::max(m, n.var);
        return m;
    }

    /// x holds x1..xn; throws DivisionByZero on a zero divisor.
    [[nodiscard]] double eval(std::span<const double> x, double u) const {
        if (nodes_.empty()) throw Error(ErrorCode::InvalidArgument, "empty expression");
        constexpr std::size_t kInline = 64;
        std::array<double, kInline> small{};
        std::vector<double> big;
        double* st = small.data();
        if (depth_ > kInline) {
            big.resize(depth_);
            st = big.data();
        }
        std::size_t top = 0;
        for (const auto& n : nodes_) {
            switch (n.kind) {
                case NodeKind::Number: st[top++] = n.value; break;
                case NodeKind::Variable:
                    if (n.var == 0) {
                        st[top++] = u;
                    } else {
                        if (static_cast<std::size_t>(n.var) > x.size())
                            throw Error(ErrorCode::DimensionMismatch, "expression refers to x" + std::to_string(n.var));
                        st[top++] = x[static_cast<std::size_t>(n.var - 1)];
                    }
                    break;
                case NodeKind::Negate: st[top - 1] = -st[top - 1]; break;
                case NodeKind::Call: st[top - 1] = apply(n.func, st[top - 1]); break;
                default: {
                    const double b = st[--top];
                    double& a = st[top - 1];
                    switch (n.kind) {
                        case NodeKind::Add: a += b; break;
                        case NodeKind::Sub: a -= b; break;
                        case NodeKind::Mul: a *= b; break;
                        default:
                            if (b == 0.0) throw Error(ErrorCode::DivisionByZero, "division by zero in expression");
                            a /= b;
                    }
                }
            }
        }
        return st[0];
    }

    /// Fully parenthesized text; parse(print(e)) == e.
    [[nodiscard]] std::string print() const {
        std::vector<std::string> st;
        for (const auto& n : nodes_) {
            switch (n.kind) {
                case NodeKind::Number: st.push_back(format_double(n.value)); break;
                case NodeKind::Variable: st.push_back(n.var == 0 ? "u" : "x" + std::to_string(n.var)); break;
                case NodeKind::Negate: st.back() = "(-" + st.back() + ")"; break;
                case NodeKind::Call: st.back() = std::string(func_name(n.func)) + "(" + st.back() + ")"; break;
                default: {
                    std::string b = std::move(st.back());
                    st.pop_back();
                    const char* op = n.kind == NodeKind::Add ? " + " : n.kind == NodeKind::Sub ? " - "
                                   : n.kind == NodeKind::Mul ? " * " : " / ";
                    st.back() = "(" + st.back() + op + b + ")";
                }
            }
        }
        return st.empty() ? std::string() : st.back();
    }

    friend bool operator==(const Expr& a, const Expr& b) { return a.nodes_ == b.nodes_; }

private:
    friend class ExprParser;

    static Expr leaf(ExprNode n) {
        Expr e;
        e.nodes_.push_back(n);
        e.finish();
        return e;
    }
    static Expr unary(const Expr& a, ExprNode n) {
        Expr e;
        e.nodes_ = a.nodes_;
        e.nodes_.push_back(n);
        e.finish();
        return e;
    }

    static double apply(Func f, double v) {
        switch (f) {
            case Func::Sin: return std::sin(v);
            case Func::Cos: return std::cos(v);
            case Func::Tanh: return std::tanh(v);
            case Func::Exp: return std::exp(v);
            case Func::Abs: return std::abs(v);
        }
        return v;
    }

    void finish() {
        std::size_t top = 0;
        depth_ = 0;
        for (const auto& n : nodes_) {
            if (n.kind == NodeKind::Number || n.kind == NodeKind::Variable) ++top;
            else if (n.kind != NodeKind::Negate && n.kind != NodeKind::Call) --top;
            depth_ = std::max(depth_, top);
        }
    }

    std::vector<ExprNode> nodes_;
    std::size_t depth_ = 0;
};

class ExprParser {
public:
    ExprParser(std::string_view text, int n_vars, bool allow_u) : s_(text), n_vars_(n_vars), allow_u_(allow_u) {}

    Expr parse() {
        skip();
        if (pos_ == s_.size()) throw ParseError(ErrorCode::SyntaxError, pos_, "empty expression");
        expr();
        skip();
        if (pos_ != s_.size()) throw ParseError(ErrorCode::SyntaxError, pos_, "unexpected '" + std::string(1, s_[pos_]) + "'");
        out_.finish();
        return std::move(out_);
    }

private:
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void emit(NodeKind k) { out_.nodes_.push_back({k, 0.0, 0, Func::Sin}); }

    void expr() {
        term();
        for (;;) {
            if (accept('+')) { term(); emit(NodeKind::Add); }
            else if (accept('-')) { term(); emit(NodeKind::Sub); }
            else return;
        }
    }

    void term() {
        factor();
        for (;;) {
            if (accept('*')) { factor(); emit(NodeKind::Mul); }
            else if (accept('/')) { factor(); emit(NodeKind::Div); }
            else return;
        }
    }

    void factor() {
        skip();
        if (pos_ == s_.size()) throw ParseError(ErrorCode::SyntaxError, pos_, "unexpected end of input");
        const char c = s_[pos_];
        if (c == '-') {
            ++pos_;
            factor();
            emit(NodeKind::Negate);
        } else if (c == '(') {
            ++pos_;
            expr();
            if (!accept(')')) throw ParseError(ErrorCode::SyntaxError, pos_, "expected ')'");
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            number();
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            identifier();
        } else {
            throw ParseError(ErrorCode::SyntaxError, pos_, "unexpected '" + std::string(1, c) + "'");
        }
    }

    void number() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
            if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
                while (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) ++p;
                pos_ = p;
            }
        }
        double v = 0.0;
        const auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (res.ec != std::errc() || res.ptr != s_.data() + pos_ || !std::isfinite(v))
            throw ParseError(ErrorCode::SyntaxError, start, "malformed number '" + std::string(s_.substr(start, pos_ - start)) + "'");
        out_.nodes_.push_back({NodeKind::Number, v, 0, Func::Sin});
    }

    void identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string_view id = s_.substr(start, pos_ - start);

        for (std::size_t f = 0; f < kFuncNames.size(); ++f) {
            if (id != kFuncNames[f]) continue;
            if (!accept('(')) throw ParseError(ErrorCode::SyntaxError, pos_, "expected '(' after " + std::string(id));
            int args = 0;
            if (!accept(')')) {
                do {
                    expr();
                    ++args;
                } while (accept(','));
                if (!accept(')')) throw ParseError(ErrorCode::SyntaxError, pos_, "expected ')'");
            }
            if (args != 1)
                throw ParseError(ErrorCode::ArityError, start,
                                 std::string(id) + " takes 1 argument, got " + std::to_string(args));
            out_.nodes_.push_back({NodeKind::Call, 0.0, 0, static_cast<Func>(f)});
            return;
        }

        if (id == "u") {
            if (!allow_u_) throw ParseError(ErrorCode::UnknownIdentifier, start, "'u' is not allowed here");
            out_.nodes_.push_back({NodeKind::Variable, 0.0, 0, Func::Sin});
            return;
        }
        if (id.size() >= 2 && id[0] == 'x' && id[1] != '0') {
            int idx = 0;
            const auto res = std::from_chars(id.data() + 1, id.data() + id.size(), idx);
            if (res.ec == std::errc() && res.ptr == id.data() + id.size() && idx >= 1 && idx <= n_vars_) {
                out_.nodes_.push_back({NodeKind::Variable, 0.0, idx, Func::Sin});
                return;
            }
        }
        throw ParseError(ErrorCode::UnknownIdentifier, start, "unknown identifier '" + std::string(id) + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int n_vars_;
    bool allow_u_;
    Expr out_;
};

/// Parses `text` over x1..x{n_vars} and (optionally) u.
inline Expr parse_expr(std::string_view text, int n_vars, bool allow_u = true) {
    return ExprParser(text, n_vars, allow_u).parse();
}

}  // namespace xpid
