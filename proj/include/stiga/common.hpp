#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stiga {

// Parametric/physical dimension of the space-time cylinder is Dim = d + 1;
// the last coordinate is always time.
template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Matrix = Eigen::Matrix<double, Dim, Dim>;

using Index = std::int64_t;

/// Thrown when a Jacobian degenerates or a geometry description is invalid.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by the sparse direct solvers (singular pivots, loss of SPD, residual).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration or input-file problems.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point carried in both coordinate systems. Problem data callbacks receive
/// both since some benchmark solutions are written in parameter coordinates.
template <int Dim>
struct SamplePoint {
  Point<Dim> x;
  Point<Dim> xi;
};

}  // namespace stiga
