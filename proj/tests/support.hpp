#pragma once

// Shared helpers for the unit and acceptance suites: deterministic random
// states and a few numeric comparison shorthands.

#include <cmath>

#include "tetraqkd/qmath.hpp"
#include "tetraqkd/rng.hpp"

namespace tetraqkd::testing {

// Standard normal via Box-Muller on the shared generator, so random states
// are identical across platforms for a fixed seed.
inline double gaussian(SplitRng& rng) {
  double u = rng.uniform01();
  while (u == 0.0) u = rng.uniform01();
  const double v = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
}

// Ginibre-sampled density operator: G G^dagger normalized to unit trace.
// Full rank with probability one, so it exercises generic mixed states.
inline DensityOperator random_density(SplitRng& rng, int qubits) {
  const Eigen::Index d = Eigen::Index(1) << qubits;
  Matrix g(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      g(r, c) = Complex(gaussian(rng), gaussian(rng));
    }
  }
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  // Symmetrize away the last bits of rounding so the Hermiticity gate in
  // DensityOperator sees an exactly Hermitian matrix.
  rho = 0.5 * (rho + Matrix(rho.adjoint()));
  return DensityOperator(std::move(rho));
}

// Haar-ish random pure state (Gaussian vector, normalized).
inline PureState random_pure(SplitRng& rng, int qubits) {
  const Eigen::Index d = Eigen::Index(1) << qubits;
  CVector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = Complex(gaussian(rng), gaussian(rng));
  v /= v.norm();
  return PureState(v);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace tetraqkd::testing
