#pragma once

#include <stdexcept>
#include <string>

namespace kfp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KFP_DECLARE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

// landscape
KFP_DECLARE_ERROR(InvalidModel)
KFP_DECLARE_ERROR(NonConvergence)
KFP_DECLARE_ERROR(DegenerateCritical)
KFP_DECLARE_ERROR(NotDoubleWell)

// symbol geometry
KFP_DECLARE_ERROR(ImaginaryAxisEigenvalue)
KFP_DECLARE_ERROR(NotAGraph)
KFP_DECLARE_ERROR(NoPositiveEpsilon)
KFP_DECLARE_ERROR(Overflow)

// hypothesis checker
KFP_DECLARE_ERROR(Blowup)
KFP_DECLARE_ERROR(HypothesisFails)

// discrete complex
KFP_DECLARE_ERROR(GaugeOverflow)
KFP_DECLARE_ERROR(DimensionUnsupported)
KFP_DECLARE_ERROR(InvalidGrid)

// eigen kernel
KFP_DECLARE_ERROR(Singular)
KFP_DECLARE_ERROR(NoConvergence)

// spectral lab
KFP_DECLARE_ERROR(ResidualTooLarge)
KFP_DECLARE_ERROR(ComplexSplitting)
KFP_DECLARE_ERROR(BadFit)
KFP_DECLARE_ERROR(SignViolation)
KFP_DECLARE_ERROR(CurveEscapesQuadraticRegion)

#undef KFP_DECLARE_ERROR

/// Arnoldi gave up; carries whatever it managed to converge.
class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, int converged, double worst_residual)
      : Error(what), converged_(converged), worst_residual_(worst_residual) {}
  int converged() const { return converged_; }
  double worst_residual() const { return worst_residual_; }

 private:
  int converged_;
  double worst_residual_;
};

/// Malformed configuration or model document.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, int column = 0)
      : Error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace kfp
