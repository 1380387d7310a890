#include "sgmm/moments.hpp"

#include <cmath>

#include "sgmm/errors.hpp"

namespace sgmm {

void validate_observation(const Observation& obs, Index d_beta, Index d_g) {
  if (d_beta >= 0 && obs.x.size() != d_beta)
    throw SchemaError("regressor length " + std::to_string(obs.x.size()) +
                      " does not match d_beta = " + std::to_string(d_beta));
  if (d_g >= 0 && obs.z.size() != d_g)
    throw SchemaError("instrument length " + std::to_string(obs.z.size()) +
                      " does not match d_g = " + std::to_string(d_g));
  if (obs.z.size() < obs.x.size())
    throw SchemaError("under-identified record: d_g = " +
                      std::to_string(obs.z.size()) + " < d_beta = " +
                      std::to_string(obs.x.size()));
  if (!std::isfinite(obs.y) || !obs.x.allFinite() || !obs.z.allFinite())
    throw SchemaError("non-finite entry in record");
}

MomentData moment_data(const Observation& obs) {
  MomentData md;
  md.G.noalias() = obs.z * obs.x.transpose();
  md.H = -obs.y * obs.z;
  return md;
}

MomentData cluster_moment_data(const Cluster& c) {
  if (c.members.empty()) throw SchemaError("empty cluster");
  const Index d_beta = c.members.front().x.size();
  const Index d_g = c.members.front().z.size();
  MomentData md;
  md.G = Matrix::Zero(d_g, d_beta);
  md.H = Vector::Zero(d_g);
  for (const Observation& obs : c.members) {
    validate_observation(obs, d_beta, d_g);
    md.G.noalias() += obs.z * obs.x.transpose();
    md.H.noalias() -= obs.y * obs.z;
  }
  const double inv_t = 1.0 / static_cast<double>(c.members.size());
  md.G *= inv_t;
  md.H *= inv_t;
  return md;
}

MomentBatch moment_batch(const Observation& obs) {
  MomentBatch b;
  b.md = moment_data(obs);
  b.zs = obs.z;
  b.xs = obs.x;
  return b;
}

MomentBatch moment_batch(const Cluster& c) {
  MomentBatch b;
  b.md = cluster_moment_data(c);
  const Index t = static_cast<Index>(c.members.size());
  b.zs.resize(c.members.front().z.size(), t);
  b.xs.resize(c.members.front().x.size(), t);
  for (Index j = 0; j < t; ++j) {
    b.zs.col(j) = c.members[static_cast<std::size_t>(j)].z;
    b.xs.col(j) = c.members[static_cast<std::size_t>(j)].x;
  }
  return b;
}

}  // namespace sgmm
