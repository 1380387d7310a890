#include "sgmm/state.hpp"

#include <Eigen/Eigenvalues>
#include <string>

#include "sgmm/baselines.hpp"
#include "sgmm/errors.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/moments.hpp"

namespace sgmm {

void OnlineState::size_scratch() {
  const Index db = d_beta();
  const Index dg = d_g();
  scratch.wz.resize(dg);
  scratch.phiT_wz.resize(db);
  scratch.dir.resize(db);
  scratch.hu.resize(db, 3);
  scratch.tmp_bb.resize(db, db);
  scratch.u2.resize(db);
  scratch.gvec.resize(dg);
  scratch.wg.resize(dg);
  scratch.core2.resize(2, 2);
  scratch.core3.resize(3, 3);
}

void refresh_inner_inverse(OnlineState& s) {
  Matrix a = s.Phi.transpose() * s.W * s.Phi;
  symmetrize(a);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const Vector& vals = eig.eigenvalues();
  const Matrix& vecs = eig.eigenvectors();
  const double lmax = vals.cwiseAbs().maxCoeff();
  const double tau = kEigCutoffRel * lmax;
  Vector inv = Vector::Zero(vals.size());
  bool full_rank = lmax > 0.0;
  for (Index j = 0; j < vals.size(); ++j) {
    if (lmax > 0.0 && vals(j) > tau) {
      inv(j) = 1.0 / vals(j);
    } else {
      full_rank = false;
    }
  }
  s.inner_inv = vecs * inv.asDiagonal() * vecs.transpose();
  symmetrize(s.inner_inv);
  s.inner_valid = full_rank;
}

namespace {

// Shared tail of both initializers: invert the (ridged) Gram, pick beta0,
// fill the derived fields.
OnlineState finish_init(Matrix phi0, Matrix gram, std::int64_t n0, double eta0,
                        const LearningRateSchedule& schedule, Index d_beta,
                        Index d_g, Beta0Method method, const Vector* given,
                        const std::vector<Observation>* sample_for_2sls) {
  if (eta0 < 0.0) throw ConfigError("eta0 must be nonnegative");
  symmetrize(gram);
  if (eta0 > 0.0) gram += eta0 * Matrix::Identity(d_g, d_g);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (eta0 == 0.0 && n0 < d_g)
    throw SingularInitialization(
        "initialization sample smaller than d_g with eta0 = 0", min_eig);
  if (!(min_eig > 0.0) || !(min_eig > 1e-13 * max_eig))
    throw SingularInitialization(
        eta0 == 0.0 ? "singular instrument Gram with eta0 = 0"
                    : "instrument Gram numerically singular despite ridging",
        min_eig);

  OnlineState s;
  s.n0 = n0;
  s.schedule = schedule;
  s.Phi = std::move(phi0);
  s.W = eig.eigenvectors() *
        eig.eigenvalues().cwiseInverse().asDiagonal() *
        eig.eigenvectors().transpose();
  symmetrize(s.W);

  switch (method) {
    case Beta0Method::Zero:
      s.beta = Vector::Zero(d_beta);
      break;
    case Beta0Method::Given:
      if (given == nullptr || given->size() != d_beta)
        throw ConfigError("beta0 vector missing or of wrong length");
      s.beta = *given;
      break;
    case Beta0Method::Offline2SLS:
      if (sample_for_2sls == nullptr)
        throw ConfigError(
            "Offline2SLS initialization needs raw observations; use Zero or "
            "Given for cluster batches");
      s.beta = offline_2sls(*sample_for_2sls).beta;
      break;
  }
  s.beta_bar = s.beta;
  s.i = 0;
  s.phase = Phase::Warmup;
  refresh_inner_inverse(s);
  s.size_scratch();
  return s;
}

}  // namespace

OnlineState init_state(const std::vector<Observation>& init_sample, double eta0,
                       const LearningRateSchedule& schedule,
                       Beta0Method beta0_method, const Vector* beta0_given) {
  if (init_sample.empty()) throw ConfigError("empty initialization sample");
  const Index d_beta = init_sample.front().x.size();
  const Index d_g = init_sample.front().z.size();
  Matrix phi0 = Matrix::Zero(d_g, d_beta);
  Matrix gram = Matrix::Zero(d_g, d_g);
  for (const Observation& obs : init_sample) {
    validate_observation(obs, d_beta, d_g);
    phi0.noalias() += obs.z * obs.x.transpose();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(obs.z, 1.0);
  }
  const double inv_n = 1.0 / static_cast<double>(init_sample.size());
  phi0 *= inv_n;
  gram *= inv_n;
  gram = Matrix(gram.selfadjointView<Eigen::Lower>());
  return finish_init(std::move(phi0), std::move(gram),
                     static_cast<std::int64_t>(init_sample.size()), eta0,
                     schedule, d_beta, d_g, beta0_method, beta0_given,
                     &init_sample);
}

OnlineState init_state_batches(const std::vector<MomentBatch>& init_batches,
                               double eta0,
                               const LearningRateSchedule& schedule,
                               Beta0Method beta0_method,
                               const Vector* beta0_given) {
  if (init_batches.empty()) throw ConfigError("empty initialization sample");
  const Index d_g = init_batches.front().md.G.rows();
  const Index d_beta = init_batches.front().md.G.cols();
  Matrix phi0 = Matrix::Zero(d_g, d_beta);
  Matrix gram = Matrix::Zero(d_g, d_g);
  for (const MomentBatch& b : init_batches) {
    if (b.md.G.rows() != d_g || b.md.G.cols() != d_beta)
      throw SchemaError("batch dimensions drifted in initialization sample");
    phi0 += b.md.G;
    gram.noalias() +=
        b.zs * b.zs.transpose() / static_cast<double>(b.zs.cols());
  }
  const double inv_n = 1.0 / static_cast<double>(init_batches.size());
  phi0 *= inv_n;
  gram *= inv_n;
  return finish_init(std::move(phi0), std::move(gram),
                     static_cast<std::int64_t>(init_batches.size()), eta0,
                     schedule, d_beta, d_g, beta0_method, beta0_given, nullptr);
}

}  // namespace sgmm
