#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace sgmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// One data record: outcome y, regressors x (length d_beta), instruments z
// (length d_g), with d_beta <= d_g.
struct Observation {
  double y = 0.0;
  Vector x;
  Vector z;
};

// A cluster of records treated as one mini-batch unit; members share dims.
struct Cluster {
  std::vector<Observation> members;
};

// Linearized moment pieces: g(beta) = G beta + H with G = z x', H = -z y for a
// single record, or the member averages for a cluster.
struct MomentData {
  Matrix G;  // d_g x d_beta
  Vector H;  // d_g
};

// What a step actually consumes: the moment pieces plus the member instrument
// and regressor columns. The weight update needs z z' and the inner-inverse
// fast path needs x, neither of which is recoverable from (G, H) alone.
// T = 1 for a single observation.
struct MomentBatch {
  MomentData md;
  Matrix zs;  // d_g x T
  Matrix xs;  // d_beta x T
};

}  // namespace sgmm
