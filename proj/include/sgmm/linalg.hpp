#pragma once

#include "sgmm/types.hpp"

namespace sgmm {

// Relative eigenvalue cutoff for the symmetric pseudo-inverse.
inline constexpr double kEigCutoffRel = 1e-10;
// SMW core updates are bypassed (direct recompute) above this condition bound.
inline constexpr double kCoreConditionLimit = 1e12;
// Divergence guard on |beta|.
inline constexpr double kDivergenceNorm = 1e8;

// Generalized inverse of a symmetric PSD matrix: eigendecompose, invert
// eigenvalues above tol_rel * max|eigenvalue|, zero the rest.
Matrix pseudo_inverse_sym(const Matrix& a, double tol_rel = kEigCutoffRel);

// In-place (A + A') / 2.
void symmetrize(Matrix& a);

// Operator-norm relative difference |a - b| / max(|a|, eps); test helper.
double rel_opnorm_diff(const Matrix& a, const Matrix& b);

}  // namespace sgmm
