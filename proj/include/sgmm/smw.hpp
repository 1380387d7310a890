#pragma once

#include "sgmm/types.hpp"

namespace sgmm {

// Rank-one weight update shared by the warmup (v = z) and efficient
// (v = anchored moment) phases. In place:
//   m  = k + v'Wv
//   W <- ((k+1)/k) * W * (I - v v' W / m), then symmetrized,
// which equals the direct inverse of ((k W^{-1} + v v') / (k+1)).
// Returns m. Throws NumericalBreakdown if m <= 0 (impossible for PD W).
double smw_weight_update(Matrix& w, const Vector& v, double k);

// Named per-phase wrappers, same contract.
inline double smw_weight_update_2sls(Matrix& w, const Vector& z, double k) {
  return smw_weight_update(w, z, k);
}
inline double smw_weight_update_eff(Matrix& w, const Vector& g_anchor,
                                    double k) {
  return smw_weight_update(w, g_anchor, k);
}

// Cluster-mode weight update consuming the member average (1/T) sum z_t z_t'
// through a rank-T core:  W <- direct inverse of ((k W^{-1} + (1/T) Z Z')/(k+1)).
void smw_weight_update_rank_t(Matrix& w, const Matrix& zs, double k);

// Inner-inverse fast paths. Both take the PRE-update Phi and W together with
// the incoming record and the m already computed for this step, and map
//   cache = (Phi' W Phi)^{-1}  ->  (Phi_next' W_next Phi_next)^{-1}
// by inverting only a 2x2 (warmup) or 3x3 (efficient) core. They return false
// without touching the cache when the core condition bound exceeds
// kCoreConditionLimit; the caller then recomputes directly.
bool smw_inner_inverse_update_2sls(Matrix& cache, const Matrix& phi,
                                   const Matrix& w, const Vector& x,
                                   const Vector& z, double m, double k);
bool smw_inner_inverse_update_eff(Matrix& cache, const Matrix& phi,
                                  const Matrix& w, const Vector& x,
                                  const Vector& z, const Vector& g_anchor,
                                  double m, double k);

namespace detail {

// W <- ((k+1)/k) (W - coef * wv wv') with exact mirror symmetrization; the
// allocation-free kernel behind both weight updates (wv must equal W v).
void weight_apply(Matrix& w, const Vector& wv, double coef, double k);

// Shared Woodbury core: cache <- ((k+1)/k) (cache - HU core^{-1} (HU)') where
// core = D + U' cache U and HU = cache * U. `hu` holds HU's columns, `core`
// is D + U'HU. Returns false (cache untouched) when the condition bound on
// `core` exceeds kCoreConditionLimit.
bool apply_inner_core(Matrix& cache, const Eigen::Ref<const Matrix>& hu,
                      Matrix& core, double k);

}  // namespace detail

}  // namespace sgmm
