#pragma once

// Dense complex linear algebra for systems of up to four qubits, the
// tetrahedron measurement geometry, and the tetrahedron state family.
//
// Basis convention: qubit 0 is the most significant bit of the computational
// basis index, so for two qubits the basis order is |00>, |01>, |10>, |11>.
//
// Gauge convention: the flipped state family is realized as the spin flip of
// the straight family (complex-conjugate the amplitudes, then apply the
// antisymmetric rotation). This fixes every global phase; the inner-product
// relations the construction must satisfy are verified numerically when the
// states are built.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tetraqkd/common.hpp"
#include "tetraqkd/joint_table.hpp"

namespace tetraqkd {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr int max_qubits = 4;

namespace detail {

inline bool power_of_two_dim(Eigen::Index dim, int* qubits) {
  int q = 0;
  Eigen::Index d = dim;
  while (d > 1 && d % 2 == 0) {
    d /= 2;
    ++q;
  }
  if (d != 1 || q < 1 || q > max_qubits) return false;
  *qubits = q;
  return true;
}

}  // namespace detail

// A real three-component vector on or inside the Bloch sphere.
struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double dot(const BlochVector& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline BlochVector operator+(const BlochVector& a, const BlochVector& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

// Pauli matrices.
inline const Matrix& pauli_x() {
  static const Matrix m = [] {
    Matrix p(2, 2);
    p << 0, 1, 1, 0;
    return p;
  }();
  return m;
}

inline const Matrix& pauli_y() {
  static const Matrix m = [] {
    Matrix p(2, 2);
    p << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
    return p;
  }();
  return m;
}

inline const Matrix& pauli_z() {
  static const Matrix m = [] {
    Matrix p(2, 2);
    p << 1, 0, 0, -1;
    return p;
  }();
  return m;
}

// v . sigma as a 2x2 matrix.
inline Matrix bloch_matrix(const BlochVector& v) {
  return v.x * pauli_x() + v.y * pauli_y() + v.z * pauli_z();
}

// The four tetrahedron directions: (+-1, +-1, +-1)/sqrt(3) with an even
// number of minus signs. Any rotation of this set carries the same
// measurement geometry; this orientation keeps every component rational
// over sqrt(3).
inline std::array<BlochVector, 4> tetrahedron_vectors() {
  const double r = 1.0 / std::sqrt(3.0);
  return {BlochVector{r, r, r}, BlochVector{r, -r, -r},
          BlochVector{-r, r, -r}, BlochVector{-r, -r, r}};
}

enum class Normalization { unit, unnormalized };

// A pure state of up to four qubits. Unit-normalized unless explicitly
// flagged otherwise at construction.
class PureState {
 public:
  explicit PureState(CVector amplitudes, Normalization tag = Normalization::unit)
      : amps_(std::move(amplitudes)), tag_(tag) {
    int q = 0;
    require(detail::power_of_two_dim(amps_.size(), &q),
            "PureState dimension must be a power of two between 2 and 16");
    qubits_ = q;
    if (tag_ == Normalization::unit) {
      require(std::abs(amps_.squaredNorm() - 1.0) <= scalar_tol,
              "PureState is not unit-normalized (flag it unnormalized if intended)");
    }
  }

  Eigen::Index dim() const { return amps_.size(); }
  int qubit_count() const { return qubits_; }
  bool is_unit() const { return tag_ == Normalization::unit; }
  double norm() const { return amps_.norm(); }
  Complex amp(Eigen::Index i) const { return amps_(i); }
  const CVector& data() const { return amps_; }

 private:
  CVector amps_;
  Normalization tag_;
  int qubits_;
};

// <a|b>.
inline Complex inner(const PureState& a, const PureState& b) {
  require(a.dim() == b.dim(), "inner product dimension mismatch");
  return a.data().dot(b.data());
}

// Positivity handling for density operators. 'enforce' rejects operators
// with an eigenvalue below -1e-10 (physical states); 'report' stores the
// minimum eigenvalue without judging it, for linear-inversion outputs that
// may dip negative on noisy input.
enum class Positivity { enforce, report };

// A Hermitian operator of up to four qubits with its trace carried
// explicitly. Subnormalized operators (conditional states) are stored as-is
// and never silently renormalized.
class DensityOperator {
 public:
  explicit DensityOperator(Matrix m, Positivity policy = Positivity::enforce)
      : m_(std::move(m)) {
    require(m_.rows() == m_.cols(), "DensityOperator must be square");
    int q = 0;
    require(detail::power_of_two_dim(m_.rows(), &q),
            "DensityOperator dimension must be a power of two between 2 and 16");
    qubits_ = q;
    require((m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= 1e-12,
            "DensityOperator must be Hermitian within 1e-12");
    trace_ = m_.trace().real();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m_, Eigen::EigenvaluesOnly);
    min_eig_ = solver.eigenvalues().minCoeff();
    if (policy == Positivity::enforce) {
      require(min_eig_ >= -op_tol,
              "DensityOperator has an eigenvalue below -1e-10");
    }
  }

  Eigen::Index dim() const { return m_.rows(); }
  int qubit_count() const { return qubits_; }
  const Matrix& matrix() const { return m_; }
  double trace() const { return trace_; }
  double min_eigenvalue() const { return min_eig_; }
  bool is_positive(double tol = op_tol) const { return min_eig_ >= -tol; }

  // Explicit renormalization to unit trace.
  DensityOperator normalized() const {
    require(trace_ > 0.0, "cannot normalize a traceless operator");
    return DensityOperator(m_ / trace_, Positivity::report);
  }

 private:
  Matrix m_;
  double trace_;
  double min_eig_;
  int qubits_;
};

// |psi><psi| as a density operator; trace equals the squared norm.
inline DensityOperator projector(const PureState& psi) {
  return DensityOperator(psi.data() * psi.data().adjoint(), Positivity::report);
}

// Kronecker products, with the first factor on the more significant bits.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a(i) * b;
  }
  return out;
}

inline PureState kron(const PureState& a, const PureState& b) {
  const Normalization tag = (a.is_unit() && b.is_unit())
                                ? Normalization::unit
                                : Normalization::unnormalized;
  return PureState(kron(a.data(), b.data()), tag);
}

// The two-qubit singlet (0, 1, -1, 0)/sqrt(2).
inline PureState singlet() {
  CVector v(4);
  v << 0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0;
  return PureState(v);
}

// Embed an operator acting on the listed qubits (in the listed order) into
// an n_total-qubit space, identity on the rest.
inline Matrix embed(const Matrix& op, const std::vector<int>& qubits, int n_total) {
  require(n_total >= 1 && n_total <= max_qubits, "embed: total qubit count out of range");
  require(!qubits.empty(), "embed: empty qubit list");
  require(op.rows() == op.cols(), "embed: operator must be square");
  require(op.rows() == Eigen::Index(1) << qubits.size(),
          "embed: operator dimension does not match qubit list");
  std::vector<bool> used(std::size_t(n_total), false);
  for (int q : qubits) {
    require(q >= 0 && q < n_total, "embed: qubit index out of range");
    require(!used[std::size_t(q)], "embed: repeated qubit index");
    used[std::size_t(q)] = true;
  }
  const Eigen::Index dim = Eigen::Index(1) << n_total;
  Matrix out = Matrix::Zero(dim, dim);
  // Qubit q occupies bit (n_total - 1 - q) of the basis index.
  auto bit_of = [n_total](Eigen::Index basis, int q) {
    return int((basis >> (n_total - 1 - q)) & 1);
  };
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      bool match = true;
      for (int q = 0; q < n_total && match; ++q) {
        if (!used[std::size_t(q)] && bit_of(r, q) != bit_of(c, q)) match = false;
      }
      if (!match) continue;
      Eigen::Index sub_r = 0, sub_c = 0;
      for (int q : qubits) {
        sub_r = (sub_r << 1) | bit_of(r, q);
        sub_c = (sub_c << 1) | bit_of(c, q);
      }
      out(r, c) = op(sub_r, sub_c);
    }
  }
  return out;
}

// Matrix-level partial trace over every qubit not listed in keep. Kept
// qubits stay in their original relative order. Works on arbitrary (also
// non-Hermitian) matrices; the DensityOperator overload below adds the
// value-type checks.
inline Matrix partial_trace(const Matrix& m, const std::vector<int>& keep,
                            int n_qubits) {
  require(m.rows() == m.cols(), "partial_trace: matrix must be square");
  require(m.rows() == Eigen::Index(1) << n_qubits,
          "partial_trace: dimension does not match qubit count");
  require(!keep.empty(), "partial_trace: keep set must be non-empty");
  std::vector<bool> is_kept(std::size_t(n_qubits), false);
  for (int q : keep) {
    require(q >= 0 && q < n_qubits, "partial_trace: invalid subsystem index");
    require(!is_kept[std::size_t(q)], "partial_trace: repeated subsystem index");
    is_kept[std::size_t(q)] = true;
  }
  std::vector<int> kept_order, traced;
  for (int q = 0; q < n_qubits; ++q) {
    (is_kept[std::size_t(q)] ? kept_order : traced).push_back(q);
  }

  const Eigen::Index dk = Eigen::Index(1) << kept_order.size();
  const Eigen::Index dt = Eigen::Index(1) << traced.size();
  auto compose = [n_qubits](const std::vector<int>& qs, Eigen::Index bits) {
    // Scatter the packed bits of `bits` onto the listed qubit positions.
    Eigen::Index basis = 0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const Eigen::Index b = (bits >> (qs.size() - 1 - i)) & 1;
      basis |= b << (n_qubits - 1 - qs[i]);
    }
    return basis;
  };
  Matrix out = Matrix::Zero(dk, dk);
  for (Eigen::Index r = 0; r < dk; ++r) {
    for (Eigen::Index c = 0; c < dk; ++c) {
      Complex sum = 0.0;
      for (Eigen::Index t = 0; t < dt; ++t) {
        const Eigen::Index big_r = compose(kept_order, r) | compose(traced, t);
        const Eigen::Index big_c = compose(kept_order, c) | compose(traced, t);
        sum += m(big_r, big_c);
      }
      out(r, c) = sum;
    }
  }
  return out;
}

// Trace out every qubit not listed in keep. Preserves the trace and
// Hermiticity; the result is built with the report policy so inputs carried
// under report survive.
inline DensityOperator partial_trace(const DensityOperator& op,
                                     const std::vector<int>& keep) {
  return DensityOperator(partial_trace(op.matrix(), keep, op.qubit_count()),
                         Positivity::report);
}

// An ordered set of positive operators summing to identity, with outcome
// labels. Construction verifies Hermiticity, positivity, and completeness.
class Povm {
 public:
  Povm(std::vector<Matrix> elements, std::vector<std::string> labels)
      : elements_(std::move(elements)), labels_(std::move(labels)) {
    require(!elements_.empty(), "Povm needs at least one element");
    require(elements_.size() == labels_.size(), "Povm element/label count mismatch");
    const Eigen::Index d = elements_.front().rows();
    int q = 0;
    require(detail::power_of_two_dim(d, &q),
            "Povm dimension must be a power of two between 2 and 16");
    qubits_ = q;
    Matrix sum = Matrix::Zero(d, d);
    for (const Matrix& e : elements_) {
      require(e.rows() == d && e.cols() == d, "Povm elements must share one dimension");
      require((e - e.adjoint()).cwiseAbs().maxCoeff() <= 1e-12,
              "Povm element is not Hermitian");
      Eigen::SelfAdjointEigenSolver<Matrix> solver(e, Eigen::EigenvaluesOnly);
      require(solver.eigenvalues().minCoeff() >= -op_tol,
              "Povm element is not positive semidefinite");
      sum += e;
    }
    require((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= op_tol,
            "Povm elements do not sum to identity");
  }

  std::size_t size() const { return elements_.size(); }
  Eigen::Index dim() const { return elements_.front().rows(); }
  int qubit_count() const { return qubits_; }
  const Matrix& element(std::size_t i) const { return elements_.at(i); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<Matrix> elements_;
  std::vector<std::string> labels_;
  int qubits_;
};

// Weighted-projector POVM from Bloch vectors: element_k = (1 + t_k.sigma)/4.
// The vectors must be unit length and sum to zero, which is exactly the
// condition for the four elements to be positive and complete.
inline Povm povm_from_vectors(const std::vector<BlochVector>& vectors) {
  require(vectors.size() == 4, "povm_from_vectors expects four vectors");
  BlochVector sum{};
  for (const BlochVector& v : vectors) {
    require(std::abs(v.norm() - 1.0) <= 1e-12, "povm_from_vectors: vector is not unit length");
    sum = sum + v;
  }
  require(sum.norm() <= 1e-12, "povm_from_vectors: vectors do not sum to zero");
  std::vector<Matrix> elements;
  elements.reserve(4);
  for (const BlochVector& v : vectors) {
    elements.push_back(0.25 * (Matrix::Identity(2, 2) + bloch_matrix(v)));
  }
  return Povm(std::move(elements), {"A", "B", "C", "D"});
}

// The straight and flipped tetrahedron state families. straight[l] has
// Bloch vector +t_l, flipped[l] has -t_l.
struct TetraStates {
  std::array<PureState, 4> straight;
  std::array<PureState, 4> flipped;
};

// Build both families in the spin-flip gauge and verify the construction:
// inner products must satisfy <l|k> = <flip k|flip l> and
// <l|flip k> = -<k|flip l>, and (|l,flip l> - |flip l,l>)/sqrt(2) must equal
// the singlet for every l. Failure here signals a bug, not a user error.
inline TetraStates tetra_states(const std::array<BlochVector, 4>& vectors) {
  auto make_state = [](const BlochVector& t) {
    require(std::abs(t.norm() - 1.0) <= 1e-12, "tetra_states: vector is not unit length");
    const double theta = std::acos(std::clamp(t.z, -1.0, 1.0));
    const double phi = std::atan2(t.y, t.x);
    CVector v(2);
    v << std::cos(theta / 2.0),
        std::exp(Complex(0, phi)) * std::sin(theta / 2.0);
    return PureState(v);
  };
  auto spin_flip = [](const PureState& s) {
    CVector v(2);
    v << -std::conj(s.amp(1)), std::conj(s.amp(0));
    return PureState(v);
  };

  std::array<PureState, 4> straight = {make_state(vectors[0]), make_state(vectors[1]),
                                       make_state(vectors[2]), make_state(vectors[3])};
  std::array<PureState, 4> flipped = {spin_flip(straight[0]), spin_flip(straight[1]),
                                      spin_flip(straight[2]), spin_flip(straight[3])};

  const PureState s = singlet();
  for (int l = 0; l < 4; ++l) {
    for (int k = 0; k < 4; ++k) {
      const Complex a = inner(straight[l], straight[k]);
      const Complex b = inner(flipped[k], flipped[l]);
      check_invariant(std::abs(a - b) <= scalar_tol,
                      "tetra_states: straight/flipped inner-product relation failed");
      const Complex c = inner(straight[l], flipped[k]);
      const Complex d = inner(straight[k], flipped[l]);
      check_invariant(std::abs(c + d) <= scalar_tol,
                      "tetra_states: cross inner-product antisymmetry failed");
    }
    const CVector anti =
        (kron(straight[l].data(), flipped[l].data()) -
         kron(flipped[l].data(), straight[l].data())) /
        std::sqrt(2.0);
    check_invariant((anti - s.data()).cwiseAbs().maxCoeff() <= op_tol,
                    "tetra_states: antisymmetric combination is not the singlet");
  }
  return TetraStates{std::move(straight), std::move(flipped)};
}

// One measurement in a multi-party Born-rule evaluation: which party it
// belongs to and which qubits (in order) its POVM acts on.
struct MeasurementAssignment {
  std::string party;
  Povm povm;
  std::vector<int> qubits;
};

// Joint outcome distribution of independent POVMs on disjoint subsystems.
// Entries are clamped to zero when they round slightly negative; an entry
// below -1e-12 or a table sum away from the state's trace by more than
// 1e-10 aborts, since either indicates a bug.
inline JointTable born_joint(const DensityOperator& state,
                             const std::vector<MeasurementAssignment>& meas) {
  require(!meas.empty(), "born_joint needs at least one measurement");
  const int n = state.qubit_count();
  std::vector<bool> used(std::size_t(n), false);
  for (const MeasurementAssignment& m : meas) {
    require(m.povm.qubit_count() == int(m.qubits.size()),
            "born_joint: POVM dimension does not match its qubit list");
    for (int q : m.qubits) {
      require(q >= 0 && q < n, "born_joint: qubit index out of range");
      require(!used[std::size_t(q)], "born_joint: measurements overlap on a qubit");
      used[std::size_t(q)] = true;
    }
  }

  // Embed every POVM element once.
  std::vector<std::vector<Matrix>> embedded;
  std::vector<Party> parties;
  for (const MeasurementAssignment& m : meas) {
    std::vector<Matrix> es;
    es.reserve(m.povm.size());
    for (std::size_t i = 0; i < m.povm.size(); ++i) {
      es.push_back(embed(m.povm.element(i), m.qubits, n));
    }
    embedded.push_back(std::move(es));
    parties.push_back(Party{m.party, m.povm.labels()});
  }

  std::size_t total_outcomes = 1;
  for (const auto& es : embedded) total_outcomes *= es.size();

  std::vector<double> values(total_outcomes, 0.0);
  std::vector<std::size_t> idx(meas.size(), 0);
  for (std::size_t f = 0; f < total_outcomes; ++f) {
    std::size_t rest = f;
    for (std::size_t i = meas.size(); i-- > 0;) {
      idx[i] = rest % embedded[i].size();
      rest /= embedded[i].size();
    }
    Matrix effect = embedded[0][idx[0]];
    for (std::size_t i = 1; i < meas.size(); ++i) effect *= embedded[i][idx[i]];
    const Complex p = (state.matrix() * effect).trace();
    check_invariant(std::abs(p.imag()) <= op_tol,
                    "born_joint: probability has a non-real part");
    check_invariant(p.real() >= -scalar_tol,
                    "born_joint: probability below -1e-12");
    values[f] = p.real() < 0.0 ? 0.0 : p.real();
  }

  JointTable table(std::move(parties), std::move(values));
  check_invariant(std::abs(table.total() - state.trace()) <= op_tol,
                  "born_joint: outcome probabilities do not sum to the state trace");
  return table;
}

inline JointTable born_joint(const PureState& state,
                             const std::vector<MeasurementAssignment>& meas) {
  return born_joint(projector(state), meas);
}

}  // namespace tetraqkd
