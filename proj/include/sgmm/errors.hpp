#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgmm {

// Base class for every error the library throws on purpose. The CLI maps each
// subclass to a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (flags, schedule parameters, grid sizes).
struct ConfigError : Error {
  using Error::Error;
};

// A record's dimensions disagree with the (d_beta, d_g) fixed at stream start.
struct SchemaError : Error {
  using Error::Error;
};

// Malformed input data; carries the 1-based line number when known.
struct IngestError : Error {
  std::int64_t line;
  IngestError(const std::string& what, std::int64_t line_no)
      : Error(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

// Initialization-sample instrument Gram is singular and eta0 = 0.
struct SingularInitialization : Error {
  double min_eigenvalue;
  SingularInitialization(const std::string& what, double min_eig)
      : Error(what + " (smallest eigenvalue " + std::to_string(min_eig) + ")"),
        min_eigenvalue(min_eig) {}
};

// Offline design matrices are singular.
struct SingularDesign : Error {
  using Error::Error;
};

// Rule-of-thumb quantile is zero; no usable learning rate exists.
struct DegenerateInitialization : Error {
  using Error::Error;
};

// Internal state stopped satisfying an invariant that exact arithmetic would
// guarantee (for example m <= 0 in a weight update).
struct NumericalBreakdown : Error {
  using Error::Error;
};

// The iterate left the trust region (non-finite or norm above the guard).
struct DivergenceDetected : Error {
  std::int64_t step;
  double beta_norm;
  DivergenceDetected(std::int64_t step_index, double norm)
      : Error("estimate diverged at step " + std::to_string(step_index) +
              " (|beta| = " + std::to_string(norm) + ")"),
        step(step_index),
        beta_norm(norm) {}
};

// An operation was called in the wrong estimator phase.
struct InvalidPhase : Error {
  using Error::Error;
};

// Random-scaling variance matrix is singular; reported, never ridged.
struct SingularLrv : Error {
  using Error::Error;
};

// A test that needs d_g > d_beta was requested on a just-identified model.
struct NotOveridentified : Error {
  using Error::Error;
};

}  // namespace sgmm
