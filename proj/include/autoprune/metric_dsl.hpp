// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "autoprune/matrix.hpp"
#include "autoprune/stats.hpp"

namespace autoprune::dsl {

/// Importance-score expression language.
///
/// Grammar (whitespace insignificant, numbers are non-negative decimal
/// floats, operators left-associative, unary > * / > + -):
///
///   expr     := term (('+'|'-') term)*
///   term     := factor (('*'|'/') factor)*
///   factor   := func '(' expr ')' | terminal | number | '(' expr ')'
///   func     := 'abs' | 'sqrt' | 'sq' | 'log1p'
///   terminal := 'W' | 'rowl1(W)' | 'rowl2(W)' | 'coll1(X)' | 'coll2(X)'
///             | 'coll2sq(X)' | 'hessdiag(X)'
///
/// Shapes broadcast numpy-style over {scalar, row-vector[d_in],
/// col-vector[d_out], matrix[d_out x d_in]}.

enum class Terminal { weight, row_l1_w, row_l2_w, col_l1_x, col_l2_x, col_l2sq_x, hess_diag_x };
enum class UnaryOp { abs, sqrt, sq, log1p };
enum class BinaryOp { add, sub, mul, div };
enum class Shape { scalar, row_vec, col_vec, matrix };

struct MetricExpr;
using ExprPtr = std::shared_ptr<const MetricExpr>;

struct MetricExpr {
    enum class Kind { terminal, constant, unary, binary };

    Kind kind = Kind::constant;
    Terminal terminal = Terminal::weight;
    double constant = 0.0;
    UnaryOp unary_op = UnaryOp::abs;
    BinaryOp binary_op = BinaryOp::add;
    ExprPtr lhs, rhs; // unary uses lhs only

    Shape shape() const;
};

ExprPtr make_terminal(Terminal t);
ExprPtr make_const(double v);
ExprPtr make_unary(UnaryOp op, ExprPtr operand);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);
bool uses_terminal(const ExprPtr& expr, Terminal t);
bool uses_activations(const ExprPtr& expr);

ExprPtr parse_metric(const std::string& text);
std::string pretty_print(const ExprPtr& expr);

enum class Builtin { magnitude, wanda, autoprune, sparsegpt_score };

const char* builtin_name(Builtin b);
bool is_builtin_name(const std::string& name);
Builtin builtin_from_name(const std::string& name);
ExprPtr builtin(Builtin b);

/// Evaluates the expression against one layer's weights and activation
/// statistics, broadcasting row statistics across rows and column
/// statistics across columns. Division denominators d are guarded as
/// max(|d|, 1e-12) * sign(d) with sign(0) = +1. Result is d_out x d_in and
/// all entries are checked finite.
Matrix eval_metric(const ExprPtr& expr, const Matrix& weight,
                   const stats::LayerActivationStats& layer_stats);

/// Variant for metrics that reference no activation statistics.
Matrix eval_metric(const ExprPtr& expr, const Matrix& weight);

} // namespace autoprune::dsl
