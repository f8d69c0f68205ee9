#pragma once

#include <vector>

#include "vecsym/expr.hpp"

namespace vecsym {

/// Symbolic Jacobian d vec(f) / d vec(x) by reverse-mode source
/// transformation, one adjoint sweep per nonzero of f. `x` must consist of
/// distinct symbol leaves. Entries that are structurally or literally zero are
/// not stored, so an f independent of x yields an empty pattern.
///
/// Subgradient conventions: d|a| = 0 at a = 0, FMIN/FMAX follow the first
/// argument at ties, STEP and the IF_ELSE condition have zero derivative.
MatrixExpr jacobian(const MatrixExpr& f, const MatrixExpr& x);

/// Column gradient of a 1x1 expression.
MatrixExpr gradient(const MatrixExpr& f, const MatrixExpr& x);

/// Hessian of a 1x1 expression: Jacobian of the gradient restricted to the
/// lower triangle and mirrored, so the result is structurally symmetric.
MatrixExpr hessian(const MatrixExpr& f, const MatrixExpr& x);

/// Rebuilds `exprs` with each symbol leaf in `from[i]` replaced by the
/// matching nonzero of `to[i]`. Constant folding applies to the new nodes.
std::vector<MatrixExpr> substitute(const std::vector<MatrixExpr>& exprs, const std::vector<MatrixExpr>& from,
                                   const std::vector<MatrixExpr>& to);
MatrixExpr substitute(const MatrixExpr& expr, const std::vector<MatrixExpr>& from,
                      const std::vector<MatrixExpr>& to);

} // namespace vecsym
