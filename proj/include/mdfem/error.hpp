#pragma once

#include <stdexcept>
#include <string>

namespace mdfem {

/// Invalid input parameter (mesh size, degree, quadrature order, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A field produced a non-finite value where a finite one was required.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point could not be located inside the mesh.
class LocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coefficient violated a positivity or ellipticity requirement during assembly.
class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solver failure (singular matrix, non-convergence, incompatible data).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mdfem
