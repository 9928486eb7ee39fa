// SPDX-License-Identifier: Apache-2.0

#include "autoprune/metric_dsl.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace autoprune::dsl {
namespace {

constexpr double kDivGuard = 1e-12;

Shape unify(Shape a, Shape b) {
    if (a == b) return a;
    if (a == Shape::scalar) return b;
    if (b == Shape::scalar) return a;
    if (a == Shape::matrix || b == Shape::matrix) return Shape::matrix;
    // row x col broadcasts outer to a full matrix
    return Shape::matrix;
}

// ---------------------------------------------------------------- lexer

enum class Tok { number, ident, lparen, rparen, plus, minus, star, slash, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;
    double value = 0.0;
    std::size_t pos = 0; // 1-based character position
};

class Lexer {
  public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

    [[noreturn]] void error(const std::string& what, std::size_t pos) const {
        fail(Errc::syntax_error, what + " at position " + std::to_string(pos));
    }

  private:
    void advance() {
        while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
        current_ = Token{};
        current_.pos = i_ + 1;
        if (i_ >= text_.size()) {
            current_.kind = Tok::end;
            return;
        }
        const char c = text_[i_];
        switch (c) {
            case '(': current_.kind = Tok::lparen; ++i_; return;
            case ')': current_.kind = Tok::rparen; ++i_; return;
            case '+': current_.kind = Tok::plus; ++i_; return;
            case '-': current_.kind = Tok::minus; ++i_; return;
            case '*': current_.kind = Tok::star; ++i_; return;
            case '/': current_.kind = Tok::slash; ++i_; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* start = text_.c_str() + i_;
            char* endp = nullptr;
            const double v = std::strtod(start, &endp);
            if (endp == start) error("malformed number", current_.pos);
            current_.kind = Tok::number;
            current_.value = v;
            current_.text.assign(start, std::size_t(endp - start));
            i_ += std::size_t(endp - start);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i_;
            while (j < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_'))
                ++j;
            current_.kind = Tok::ident;
            current_.text = text_.substr(i_, j - i_);
            i_ = j;
            return;
        }
        error(std::string("unexpected character '") + c + "'", current_.pos);
    }

    const std::string& text_;
    std::size_t i_ = 0;
    Token current_;
};

// --------------------------------------------------------------- parser

class Parser {
  public:
    explicit Parser(const std::string& text) : lex_(text) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        const Token& t = lex_.peek();
        if (t.kind != Tok::end) lex_.error("unexpected trailing input", t.pos);
        return e;
    }

  private:
    ExprPtr expr() {
        ExprPtr lhs = term();
        while (lex_.peek().kind == Tok::plus || lex_.peek().kind == Tok::minus) {
            const Token op = lex_.take();
            lhs = make_binary(op.kind == Tok::plus ? BinaryOp::add : BinaryOp::sub, lhs, term());
        }
        return lhs;
    }

    ExprPtr term() {
        ExprPtr lhs = factor();
        while (lex_.peek().kind == Tok::star || lex_.peek().kind == Tok::slash) {
            const Token op = lex_.take();
            lhs = make_binary(op.kind == Tok::star ? BinaryOp::mul : BinaryOp::div, lhs, factor());
        }
        return lhs;
    }

    void expect(Tok kind, const char* what) {
        const Token& t = lex_.peek();
        if (t.kind != kind) lex_.error(std::string("expected ") + what, t.pos);
        lex_.take();
    }

    ExprPtr stat_terminal(const std::string& name, char arg, Terminal t) {
        expect(Tok::lparen, "'('");
        const Token& inner = lex_.peek();
        if (inner.kind != Tok::ident || inner.text != std::string(1, arg))
            lex_.error(name + " takes exactly '" + std::string(1, arg) + "'", inner.pos);
        lex_.take();
        expect(Tok::rparen, "')'");
        return make_terminal(t);
    }

    ExprPtr factor() {
        const Token t = lex_.take();
        switch (t.kind) {
            case Tok::number: return make_const(t.value);
            case Tok::lparen: {
                ExprPtr e = expr();
                expect(Tok::rparen, "')'");
                return e;
            }
            case Tok::ident: break;
            case Tok::end: lex_.error("expected expression", t.pos);
            default: lex_.error("unexpected token", t.pos);
        }

        if (t.text == "W") return make_terminal(Terminal::weight);
        if (t.text == "rowl1") return stat_terminal(t.text, 'W', Terminal::row_l1_w);
        if (t.text == "rowl2") return stat_terminal(t.text, 'W', Terminal::row_l2_w);
        if (t.text == "coll1") return stat_terminal(t.text, 'X', Terminal::col_l1_x);
        if (t.text == "coll2") return stat_terminal(t.text, 'X', Terminal::col_l2_x);
        if (t.text == "coll2sq") return stat_terminal(t.text, 'X', Terminal::col_l2sq_x);
        if (t.text == "hessdiag") return stat_terminal(t.text, 'X', Terminal::hess_diag_x);

        UnaryOp op;
        if (t.text == "abs")
            op = UnaryOp::abs;
        else if (t.text == "sqrt")
            op = UnaryOp::sqrt;
        else if (t.text == "sq")
            op = UnaryOp::sq;
        else if (t.text == "log1p")
            op = UnaryOp::log1p;
        else
            lex_.error("unknown identifier '" + t.text + "'", t.pos);

        expect(Tok::lparen, "'('");
        ExprPtr inner = expr();
        expect(Tok::rparen, "')'");
        return make_unary(op, inner);
    }

    Lexer lex_;
};

} // namespace

Shape MetricExpr::shape() const {
    switch (kind) {
        case Kind::terminal:
            switch (terminal) {
                case Terminal::weight: return Shape::matrix;
                case Terminal::row_l1_w:
                case Terminal::row_l2_w: return Shape::col_vec;
                default: return Shape::row_vec;
            }
        case Kind::constant: return Shape::scalar;
        case Kind::unary: return lhs->shape();
        case Kind::binary: return unify(lhs->shape(), rhs->shape());
    }
    return Shape::scalar;
}

ExprPtr make_terminal(Terminal t) {
    auto e = std::make_shared<MetricExpr>();
    e->kind = MetricExpr::Kind::terminal;
    e->terminal = t;
    return e;
}

ExprPtr make_const(double v) {
    if (!std::isfinite(v)) fail(Errc::non_finite, "metric constant must be finite");
    auto e = std::make_shared<MetricExpr>();
    e->kind = MetricExpr::Kind::constant;
    e->constant = v;
    return e;
}

ExprPtr make_unary(UnaryOp op, ExprPtr operand) {
    auto e = std::make_shared<MetricExpr>();
    e->kind = MetricExpr::Kind::unary;
    e->unary_op = op;
    e->lhs = std::move(operand);
    return e;
}

ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
    auto e = std::make_shared<MetricExpr>();
    e->kind = MetricExpr::Kind::binary;
    e->binary_op = op;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    // Shape compatibility is checked while the tree is built; values in the
    // current algebra always unify, so this cannot fire today.
    (void)e->shape();
    return e;
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return a == b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case MetricExpr::Kind::terminal: return a->terminal == b->terminal;
        case MetricExpr::Kind::constant: return a->constant == b->constant;
        case MetricExpr::Kind::unary:
            return a->unary_op == b->unary_op && structurally_equal(a->lhs, b->lhs);
        case MetricExpr::Kind::binary:
            return a->binary_op == b->binary_op && structurally_equal(a->lhs, b->lhs) &&
                   structurally_equal(a->rhs, b->rhs);
    }
    return false;
}

bool uses_terminal(const ExprPtr& expr, Terminal t) {
    if (!expr) return false;
    switch (expr->kind) {
        case MetricExpr::Kind::terminal: return expr->terminal == t;
        case MetricExpr::Kind::constant: return false;
        case MetricExpr::Kind::unary: return uses_terminal(expr->lhs, t);
        case MetricExpr::Kind::binary:
            return uses_terminal(expr->lhs, t) || uses_terminal(expr->rhs, t);
    }
    return false;
}

bool uses_activations(const ExprPtr& expr) {
    return uses_terminal(expr, Terminal::col_l1_x) || uses_terminal(expr, Terminal::col_l2_x) ||
           uses_terminal(expr, Terminal::col_l2sq_x) ||
           uses_terminal(expr, Terminal::hess_diag_x);
}

ExprPtr parse_metric(const std::string& text) {
    if (text.empty()) fail(Errc::syntax_error, "empty metric expression at position 1");
    return Parser(text).parse();
}

namespace {

int precedence(const MetricExpr& e) {
    if (e.kind != MetricExpr::Kind::binary) return 3;
    return (e.binary_op == BinaryOp::mul || e.binary_op == BinaryOp::div) ? 2 : 1;
}

void print_expr(const MetricExpr& e, int parent_prec, bool right_operand, std::string& out) {
    switch (e.kind) {
        case MetricExpr::Kind::terminal: {
            static const char* names[] = {"W",         "rowl1(W)", "rowl2(W)",   "coll1(X)",
                                          "coll2(X)",  "coll2sq(X)", "hessdiag(X)"};
            out += names[int(e.terminal)];
            return;
        }
        case MetricExpr::Kind::constant: {
            // Negative literals are not grammar-expressible; print them as a
            // subtraction from zero so the text still parses.
            char buf[64];
            if (e.constant < 0.0) {
                std::snprintf(buf, sizeof(buf), "(0 - %.17g)", -e.constant);
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", e.constant);
            }
            out += buf;
            return;
        }
        case MetricExpr::Kind::unary: {
            static const char* names[] = {"abs", "sqrt", "sq", "log1p"};
            out += names[int(e.unary_op)];
            out += "(";
            print_expr(*e.lhs, 0, false, out);
            out += ")";
            return;
        }
        case MetricExpr::Kind::binary: {
            static const char* names[] = {" + ", " - ", " * ", " / "};
            const int prec = precedence(e);
            const bool parens = prec < parent_prec || (prec == parent_prec && right_operand);
            if (parens) out += "(";
            print_expr(*e.lhs, prec, false, out);
            out += names[int(e.binary_op)];
            print_expr(*e.rhs, prec, true, out);
            if (parens) out += ")";
            return;
        }
    }
}

} // namespace

std::string pretty_print(const ExprPtr& expr) {
    if (!expr) fail(Errc::invalid_argument, "cannot print a null expression");
    std::string out;
    print_expr(*expr, 0, false, out);
    return out;
}

const char* builtin_name(Builtin b) {
    switch (b) {
        case Builtin::magnitude: return "magnitude";
        case Builtin::wanda: return "wanda";
        case Builtin::autoprune: return "autoprune";
        case Builtin::sparsegpt_score: return "sparsegpt_score";
    }
    return "?";
}

bool is_builtin_name(const std::string& name) {
    return name == "magnitude" || name == "wanda" || name == "autoprune" ||
           name == "sparsegpt_score";
}

Builtin builtin_from_name(const std::string& name) {
    if (name == "magnitude") return Builtin::magnitude;
    if (name == "wanda") return Builtin::wanda;
    if (name == "autoprune") return Builtin::autoprune;
    if (name == "sparsegpt_score") return Builtin::sparsegpt_score;
    fail(Errc::invalid_argument, "unknown builtin metric '" + name + "'");
}

ExprPtr builtin(Builtin b) {
    const auto abs_w = make_unary(UnaryOp::abs, make_terminal(Terminal::weight));
    switch (b) {
        case Builtin::magnitude: return abs_w;
        case Builtin::wanda:
            return make_binary(BinaryOp::mul, abs_w, make_terminal(Terminal::col_l2_x));
        case Builtin::autoprune:
            return make_binary(
                BinaryOp::mul,
                make_binary(BinaryOp::div, abs_w, make_terminal(Terminal::row_l1_w)),
                make_unary(UnaryOp::sqrt,
                           make_binary(BinaryOp::add, make_terminal(Terminal::col_l1_x),
                                       make_terminal(Terminal::col_l2sq_x))));
        case Builtin::sparsegpt_score:
            return make_binary(BinaryOp::div, abs_w, make_terminal(Terminal::hess_diag_x));
    }
    fail(Errc::invalid_argument, "unknown builtin");
}

namespace {

struct EvalValue {
    Shape shape = Shape::scalar;
    std::vector<double> data;

    double at(std::size_t i, std::size_t j, std::size_t d_in) const {
        switch (shape) {
            case Shape::scalar: return data[0];
            case Shape::row_vec: return data[j];
            case Shape::col_vec: return data[i];
            case Shape::matrix: return data[i * d_in + j];
        }
        return 0.0;
    }
};

std::size_t shape_count(Shape s, std::size_t d_out, std::size_t d_in) {
    switch (s) {
        case Shape::scalar: return 1;
        case Shape::row_vec: return d_in;
        case Shape::col_vec: return d_out;
        case Shape::matrix: return d_out * d_in;
    }
    return 0;
}

void check_finite(const EvalValue& v, const MetricExpr& node) {
    for (double x : v.data)
        if (!std::isfinite(x)) {
            std::string repr;
            print_expr(node, 0, false, repr);
            fail(Errc::non_finite, "metric subexpression '" + repr + "' produced a non-finite value");
        }
}

EvalValue eval_node(const MetricExpr& e, const Matrix& w,
                    const stats::LayerActivationStats* st) {
    const std::size_t d_out = w.rows(), d_in = w.cols();
    EvalValue out;
    switch (e.kind) {
        case MetricExpr::Kind::constant:
            out.shape = Shape::scalar;
            out.data = {e.constant};
            return out;
        case MetricExpr::Kind::terminal: {
            auto need_stats = [&]() -> const stats::LayerActivationStats& {
                if (!st)
                    fail(Errc::missing_calibration,
                         "metric references activation statistics but none were supplied");
                return *st;
            };
            auto row_stat = [&](const std::vector<double>& v, const char* which) {
                if (v.size() != d_in)
                    fail(Errc::dimension_mismatch,
                         std::string(which) + " length does not match the layer's d_in");
                out.shape = Shape::row_vec;
                out.data = v;
            };
            switch (e.terminal) {
                case Terminal::weight:
                    out.shape = Shape::matrix;
                    out.data = w.values();
                    return out;
                case Terminal::row_l1_w: {
                    out.shape = Shape::col_vec;
                    out.data.assign(d_out, 0.0);
                    for (std::size_t i = 0; i < d_out; ++i) {
                        const double* row = w.row(i);
                        for (std::size_t j = 0; j < d_in; ++j) out.data[i] += std::abs(row[j]);
                    }
                    return out;
                }
                case Terminal::row_l2_w: {
                    out.shape = Shape::col_vec;
                    out.data.assign(d_out, 0.0);
                    for (std::size_t i = 0; i < d_out; ++i) {
                        const double* row = w.row(i);
                        double acc = 0.0;
                        for (std::size_t j = 0; j < d_in; ++j) acc += row[j] * row[j];
                        out.data[i] = std::sqrt(acc);
                    }
                    return out;
                }
                case Terminal::col_l1_x: row_stat(need_stats().col_l1, "coll1(X)"); return out;
                case Terminal::col_l2_x: row_stat(need_stats().col_l2, "coll2(X)"); return out;
                case Terminal::col_l2sq_x:
                    row_stat(need_stats().col_l2sq, "coll2sq(X)");
                    return out;
                case Terminal::hess_diag_x: {
                    const auto& s = need_stats();
                    if (!s.hess_diag)
                        fail(Errc::missing_calibration,
                             "metric references hessdiag(X) but stats were captured without it");
                    row_stat(*s.hess_diag, "hessdiag(X)");
                    return out;
                }
            }
            return out;
        }
        case MetricExpr::Kind::unary: {
            out = eval_node(*e.lhs, w, st);
            for (double& x : out.data) {
                switch (e.unary_op) {
                    case UnaryOp::abs: x = std::abs(x); break;
                    case UnaryOp::sqrt: x = std::sqrt(x); break;
                    case UnaryOp::sq: x = x * x; break;
                    case UnaryOp::log1p: x = std::log1p(x); break;
                }
            }
            check_finite(out, e);
            return out;
        }
        case MetricExpr::Kind::binary: {
            const EvalValue a = eval_node(*e.lhs, w, st);
            const EvalValue b = eval_node(*e.rhs, w, st);
            out.shape = unify(a.shape, b.shape);
            out.data.resize(shape_count(out.shape, d_out, d_in));
            const std::size_t rows = (out.shape == Shape::col_vec || out.shape == Shape::matrix)
                                         ? d_out
                                         : 1;
            const std::size_t cols = (out.shape == Shape::row_vec || out.shape == Shape::matrix)
                                         ? d_in
                                         : 1;
            std::size_t idx = 0;
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j, ++idx) {
                    const double x = a.at(i, j, d_in);
                    const double y = b.at(i, j, d_in);
                    switch (e.binary_op) {
                        case BinaryOp::add: out.data[idx] = x + y; break;
                        case BinaryOp::sub: out.data[idx] = x - y; break;
                        case BinaryOp::mul: out.data[idx] = x * y; break;
                        case BinaryOp::div: {
                            const double sign = (y < 0.0) ? -1.0 : 1.0;
                            const double mag = std::max(std::abs(y), kDivGuard);
                            out.data[idx] = x / (mag * sign);
                            break;
                        }
                    }
                }
            }
            check_finite(out, e);
            return out;
        }
    }
    fail(Errc::invalid_argument, "malformed expression node");
}

} // namespace

Matrix eval_metric(const ExprPtr& expr, const Matrix& weight,
                   const stats::LayerActivationStats& layer_stats) {
    if (!expr) fail(Errc::invalid_argument, "null metric expression");
    if (uses_activations(expr) && layer_stats.d_in() != weight.cols())
        fail(Errc::dimension_mismatch, "activation statistics do not match the layer's d_in");
    EvalValue v = eval_node(*expr, weight, &layer_stats);

    Matrix out(weight.rows(), weight.cols());
    const std::size_t d_in = weight.cols();
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < d_in; ++j) out(i, j) = v.at(i, j, d_in);
    out.validate_finite();
    return out;
}

Matrix eval_metric(const ExprPtr& expr, const Matrix& weight) {
    if (!expr) fail(Errc::invalid_argument, "null metric expression");
    if (uses_activations(expr))
        fail(Errc::missing_calibration,
             "metric references activation statistics but none were supplied");
    EvalValue v = eval_node(*expr, weight, nullptr);
    Matrix out(weight.rows(), weight.cols());
    const std::size_t d_in = weight.cols();
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < d_in; ++j) out(i, j) = v.at(i, j, d_in);
    out.validate_finite();
    return out;
}

} // namespace autoprune::dsl
