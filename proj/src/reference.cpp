#include "sgmm/reference.hpp"

#include <Eigen/Dense>

namespace sgmm::reference {

State from_online(const OnlineState& s) {
  State r;
  r.i = s.i;
  r.n0 = s.n0;
  r.beta = s.beta;
  r.beta_bar = s.beta_bar;
  r.Phi = s.Phi;
  r.W = s.W;
  r.anchor_beta = s.anchor_beta;
  r.schedule = s.schedule;
  return r;
}

namespace {

Vector pinv_solve(const Matrix& a, const Vector& b) {
  return a.completeOrthogonalDecomposition().solve(b);
}

void mirror(Matrix& a) { a = 0.5 * (a + a.transpose()).eval(); }

// Shared transcription with v = the vector entering the weight update
// (z in the warmup, the anchored moment in the efficient phase).
void step_common(State& s, const Observation& obs, const Vector& v) {
  const double k = static_cast<double>(s.n0 + s.i);
  const double gamma = s.schedule.at(s.i + 1);

  const Matrix g_mat = obs.z * obs.x.transpose();
  const Vector h_vec = -obs.y * obs.z;
  const Vector g_cur = g_mat * s.beta + h_vec;

  const Matrix inner = s.Phi.transpose() * s.W * s.Phi;
  const Vector direction = pinv_solve(inner, s.Phi.transpose() * (s.W * g_cur));
  s.beta = s.beta - gamma * direction;

  s.Phi = (k * s.Phi + g_mat) / (k + 1.0);

  const Matrix w_inv = s.W.inverse();
  Matrix w_next = ((k * w_inv + v * v.transpose()) / (k + 1.0)).inverse();
  mirror(w_next);
  s.W = w_next;

  s.i += 1;
  s.beta_bar = s.beta_bar + (s.beta - s.beta_bar) / static_cast<double>(s.i);
}

}  // namespace

void step_warmup(State& s, const Observation& obs) {
  step_common(s, obs, obs.z);
}

void step_efficient(State& s, const Observation& obs) {
  const Matrix g_mat = obs.z * obs.x.transpose();
  const Vector h_vec = -obs.y * obs.z;
  const Vector g_anchor = g_mat * s.anchor_beta + h_vec;
  step_common(s, obs, g_anchor);
}

}  // namespace sgmm::reference
