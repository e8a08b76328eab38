#pragma once

// The source model shared by Alice and Bob: a singlet mixed with white
// noise, its tetrahedron measurement statistics, linear-inversion state
// reconstruction, and the accessible-information benchmark.

#include <cmath>
#include <vector>

#include "tetraqkd/common.hpp"
#include "tetraqkd/joint_table.hpp"
#include "tetraqkd/qmath.hpp"

namespace tetraqkd {

// Admixture weight of the white-noise component, in [0, 1]. The two-qubit
// state is entangled below 2/3 and separable from 2/3 on.
struct NoiseParameter {
  double eps;

  explicit NoiseParameter(double value) : eps(value) {
    require(value >= 0.0 && value <= 1.0, "noise parameter must lie in [0, 1]");
  }

  bool entangled() const { return eps < 2.0 / 3.0; }
};

// Conditional probability that Bob's letter equals Alice's at one
// transmission.
inline double p_same(double eps) {
  NoiseParameter check(eps);
  return eps / 4.0;
}

// Conditional probability of one particular different letter.
inline double p_diff(double eps) {
  NoiseParameter check(eps);
  return (4.0 - eps) / 12.0;
}

// The canonical tetrahedron POVM, built once.
inline const Povm& tetra_povm() {
  static const Povm povm = [] {
    const auto t = tetrahedron_vectors();
    return povm_from_vectors({t[0], t[1], t[2], t[3]});
  }();
  return povm;
}

// The shared two-qubit state: (1 - eps) times the singlet projector plus
// eps/4 times the identity.
inline DensityOperator rho_ab(double eps) {
  NoiseParameter check(eps);
  const Matrix s = projector(singlet()).matrix();
  return DensityOperator((1.0 - eps) * s + (eps / 4.0) * Matrix::Identity(4, 4));
}

// Joint letter distribution of the two tetrahedron measurements on the
// shared state: diagonal entries eps/16, off-diagonal (4 - eps)/48.
inline JointTable joint_probs_ab(double eps) {
  NoiseParameter check(eps);
  const double diag = eps / 16.0;
  const double off = (4.0 - eps) / 48.0;
  std::vector<double> values(16, off);
  for (std::size_t k = 0; k < 4; ++k) values[k * 4 + k] = diag;
  const std::vector<std::string> letters = {"A", "B", "C", "D"};
  return JointTable({Party{"alice", letters}, Party{"bob", letters}}, values);
}

// Linear-inversion tomography: rho = sum_kl p_kl (6 P_k - 1)(x)(6 Q_l - 1).
// Exact tables invert exactly; empirical tables may produce an operator
// with small negative eigenvalues, which is reported (min_eigenvalue), not
// corrected.
inline DensityOperator reconstruct_state(const JointTable& table) {
  require(table.party_count() == 2, "reconstruct_state needs a two-party table");
  require(table.dim(0) == 4 && table.dim(1) == 4, "reconstruct_state needs a 4x4 table");
  require(table.is_normalized(), "reconstruct_state needs entries summing to 1");
  const Povm& povm = tetra_povm();
  const Matrix id2 = Matrix::Identity(2, 2);
  Matrix rho = Matrix::Zero(4, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const Matrix ak = 6.0 * povm.element(k) - id2;
    for (std::size_t l = 0; l < 4; ++l) {
      const Matrix bl = 6.0 * povm.element(l) - id2;
      rho += table(k, l) * kron(ak, bl);
    }
  }
  // Symmetrize rounding residue so the Hermiticity gate sees an exactly
  // Hermitian matrix.
  rho = 0.5 * (rho + Matrix(rho.adjoint()));
  return DensityOperator(std::move(rho), Positivity::report);
}

// Mutual information of the two tetrahedron measurements on the shared
// state, in bits: (1 - eps/4) log2[(4 - eps)/3] + (eps/4) log2[eps].
inline double accessible_info_ab(double eps) {
  NoiseParameter check(eps);
  return (1.0 - eps / 4.0) * std::log2((4.0 - eps) / 3.0) + 0.25 * xlog2(eps);
}

}  // namespace tetraqkd
