#pragma once

#include "sgmm/types.hpp"

namespace sgmm {

// Validates entries are finite and, when expected dims are given (>0), that
// the record matches them. Throws SchemaError otherwise.
void validate_observation(const Observation& obs, Index d_beta = -1,
                          Index d_g = -1);

// G = z x', H = -z y for a single record.
MomentData moment_data(const Observation& obs);

// Member average: G = (1/T) sum z_t x_t', H = -(1/T) sum z_t y_t.
MomentData cluster_moment_data(const Cluster& c);

// Step inputs carrying the member columns alongside (G, H).
MomentBatch moment_batch(const Observation& obs);
MomentBatch moment_batch(const Cluster& c);

}  // namespace sgmm
