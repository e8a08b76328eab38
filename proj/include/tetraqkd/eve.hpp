// Eavesdropper model: the four-qubit purification of the noisy pair source,
// Eve's relay states conditioned on Alice's outcome, the square-root
// measurement family on Eve's two ancilla qubits, and the optimization of
// the five-member measurement over its mixing weight.
//
// Qubit layout of the purification, most significant bit first:
//   0 = Alice, 1 = Bob, 2 = Eve ancilla 1, 3 = Eve ancilla 2.
//
// The phase `phi` is a gauge choice shared between the purification and
// Eve's measurement vectors. Every probability produced by pairing the two
// consistently is phi-independent; tests pin that invariance.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tetraqkd/channel.hpp"
#include "tetraqkd/common.hpp"
#include "tetraqkd/joint_table.hpp"
#include "tetraqkd/qmath.hpp"

namespace tetraqkd {

// Overlap penalty for Eve's relay states. Decreases from 1 at eps = 0 to 0
// at eps = 2/3; the smaller it is, the better Eve can distinguish the four
// relay states.
inline double eta(double eps) {
  require(eps >= 0.0 && eps <= 2.0 / 3.0,
          "eta: noise parameter must lie in [0, 2/3]");
  const double a = std::sqrt(1.0 - 0.75 * eps);
  const double b = std::sqrt(0.75 * eps);
  const double d = a - b;
  return d * d;
}

// Amplitudes of the four-qubit purification |S> = alpha |s>_AB |s>_E1E2
// + beta |s>_AE1 |s>_BE2. beta fixes the noise level; alpha soaks up the
// remaining weight, including the +1/2 overlap between the two pair
// patterns, so that |S> is unit.
struct PurificationParams {
  double eps = 0.0;
  double phi = 0.0;
  Complex alpha{1.0, 0.0};
  double beta = 0.0;

  explicit PurificationParams(double eps_in, double phi_in = 0.0)
      : eps(eps_in), phi(phi_in) {
    require(eps >= 0.0 && eps <= 2.0 / 3.0,
            "PurificationParams: noise parameter must lie in [0, 2/3]");
    beta = std::sqrt(eps);
    alpha = std::polar(std::sqrt(1.0 - 0.75 * eps), phi) - 0.5 * beta;
    const double norm_sq =
        std::norm(alpha) + beta * beta + (alpha * beta).real();
    check_invariant(std::abs(norm_sq - 1.0) <= scalar_tol,
                    "PurificationParams: amplitudes do not normalize");
  }
};

namespace detail {

// Singlet amplitude <q_a q_b|s> for one ordered qubit pair.
inline Complex singlet_amp(int a, int b) {
  if (a == b) return Complex(0.0, 0.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  return Complex(a == 0 ? inv_sqrt2 : -inv_sqrt2, 0.0);
}

}  // namespace detail

// The purified source state on [Alice, Bob, Eve1, Eve2]. Tracing out the
// two ancillas recovers the isotropically noisy pair shared by Alice and
// Bob; tests pin that consistency on a grid.
inline PureState purification(const PurificationParams& params) {
  CVector amps = CVector::Zero(16);
  for (int q0 = 0; q0 < 2; ++q0) {
    for (int q1 = 0; q1 < 2; ++q1) {
      for (int q2 = 0; q2 < 2; ++q2) {
        for (int q3 = 0; q3 < 2; ++q3) {
          const Complex direct =
              detail::singlet_amp(q0, q1) * detail::singlet_amp(q2, q3);
          const Complex crossed =
              detail::singlet_amp(q0, q2) * detail::singlet_amp(q1, q3);
          amps[(q0 << 3) | (q1 << 2) | (q2 << 1) | q3] =
              params.alpha * direct + params.beta * crossed;
        }
      }
    }
  }
  return PureState(std::move(amps));
}

// Eve's four unnormalized relay states |E_k> on her two ancilla qubits,
// together with their Gram matrix. |E_k> is the ancilla component that
// rides along when Alice's measurement yields letter k.
struct EveAncillaSet {
  std::array<PureState, 4> states;
  Matrix gram;
};

inline EveAncillaSet eve_components(const PurificationParams& params) {
  const TetraStates basis = tetra_states(tetrahedron_vectors());
  const CVector s = singlet().data();

  std::vector<CVector> comps;
  comps.reserve(4);
  for (int k = 0; k < 4; ++k) {
    const CVector flip_straight =
        kron(basis.flipped[std::size_t(k)], basis.straight[std::size_t(k)])
            .data();
    const CVector straight_flip =
        kron(basis.straight[std::size_t(k)], basis.flipped[std::size_t(k)])
            .data();
    CVector v = (params.alpha / (2.0 * std::sqrt(2.0))) * s -
                (0.5 * params.beta) * (flip_straight + 0.5 * straight_flip);
    comps.push_back(std::move(v));
  }

  // The expansion must reassemble the purification exactly.
  CVector rebuilt = CVector::Zero(16);
  for (int k = 0; k < 4; ++k) {
    const CVector letter_pair =
        kron(basis.straight[std::size_t(k)], basis.flipped[std::size_t(k)])
            .data();
    rebuilt += kron(letter_pair, comps[std::size_t(k)]);
  }
  const CVector target = purification(params).data();
  check_invariant((rebuilt - target).cwiseAbs().maxCoeff() <= op_tol,
                  "eve_components: relay states do not reassemble the "
                  "purification");

  // Gram matrix: constant overlap off the diagonal, a noise-proportional
  // boost on it, independent of the gauge phase.
  Matrix gram(4, 4);
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l < 4; ++l) {
      gram(k, l) = comps[std::size_t(k)].dot(comps[std::size_t(l)]);
    }
  }
  const double off = (2.0 - 3.0 * params.eps) / 16.0;
  const double diag = off + 3.0 * params.eps / 8.0;
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l < 4; ++l) {
      const Complex want(k == l ? diag : off, 0.0);
      check_invariant(std::abs(gram(k, l) - want) <= op_tol,
                      "eve_components: Gram matrix deviates from its "
                      "closed form");
    }
  }

  return EveAncillaSet{
      {PureState(comps[0], Normalization::unnormalized),
       PureState(comps[1], Normalization::unnormalized),
       PureState(comps[2], Normalization::unnormalized),
       PureState(comps[3], Normalization::unnormalized)},
      std::move(gram)};
}

// Eve's ancilla state conditioned on Alice obtaining letter k (1-based),
// without renormalization: the trace equals the probability 1/4 of that
// outcome. Computed by projecting the purification and tracing out Alice
// and Bob.
inline DensityOperator conditional_ancilla(const PurificationParams& params,
                                           int k) {
  require(k >= 1 && k <= 4, "conditional_ancilla: letter index must be 1..4");
  const Povm& alice = tetra_povm();
  const Matrix effect = embed(alice.element(k - 1), {0}, 4);
  const PureState state = purification(params);
  const Matrix full = state.data() * state.data().adjoint();
  Matrix reduced = partial_trace(effect * full, {2, 3}, 4);
  reduced = 0.5 * (reduced + reduced.adjoint()).eval();
  DensityOperator out(std::move(reduced), Positivity::enforce);
  check_invariant(std::abs(out.trace() - 0.25) <= op_tol,
                  "conditional_ancilla: outcome probability is not 1/4");
  return out;
}

namespace detail {

// Square-root measurement vectors |e_l> on Eve's two ancilla qubits. Their
// sum is 2|s>, which the five-member variant exploits.
inline std::vector<CVector> srm_vectors(double phi) {
  const TetraStates basis = tetra_states(tetrahedron_vectors());
  const CVector s = singlet().data();
  const Complex unit_phase = std::polar(1.0, -phi);
  const Complex c_singlet = 0.5 * (1.0 + std::sqrt(3.0) * unit_phase);
  const Complex c_letter = std::sqrt(1.5) * unit_phase;

  std::vector<CVector> out;
  out.reserve(4);
  for (int l = 0; l < 4; ++l) {
    const CVector flip_straight =
        kron(basis.flipped[std::size_t(l)], basis.straight[std::size_t(l)])
            .data();
    out.push_back(c_singlet * s + c_letter * flip_straight);
  }
  return out;
}

}  // namespace detail

// Four-member square-root measurement on Eve's ancilla pair. Outcome l is
// Eve's best guess for Alice's letter.
inline Povm eve_povm4(double phi = 0.0) {
  const std::vector<CVector> vecs = detail::srm_vectors(phi);
  std::vector<Matrix> elements;
  elements.reserve(4);
  for (const CVector& v : vecs) elements.push_back(v * v.adjoint());
  return Povm(std::move(elements), {"A", "B", "C", "D"});
}

// Five-member variant: each letter vector is shifted by -mu times the vector
// sum, and the removed weight funds a fifth, inconclusive outcome. mu must
// lie in [0, 1/2] for the fifth element to stay positive.
inline Povm eve_povm5(double phi, double mu) {
  require(mu >= 0.0 && mu <= 0.5,
          "eve_povm5: mixing weight must lie in [0, 1/2]");
  const std::vector<CVector> vecs = detail::srm_vectors(phi);
  CVector sum = CVector::Zero(4);
  for (const CVector& v : vecs) sum += v;

  std::vector<Matrix> elements;
  elements.reserve(5);
  for (const CVector& v : vecs) {
    const CVector shifted = v - mu * sum;
    elements.push_back(shifted * shifted.adjoint());
  }
  const CVector fifth = std::sqrt(2.0 * mu - 4.0 * mu * mu) * sum;
  elements.push_back(fifth * fifth.adjoint());
  return Povm(std::move(elements), {"A", "B", "C", "D", "E"});
}

// Joint letter distribution for Alice and Eve when Eve applies the
// four-member measurement to her ancillas. Matching letters carry weight
// eta/16 each, mismatched ones (4 - eta)/48 each.
inline JointTable alice_eve_joint(double eps) {
  const double e = eta(eps);
  const double same = e / 16.0;
  const double diff = (4.0 - e) / 48.0;
  const std::vector<std::string> letters = {"A", "B", "C", "D"};
  std::vector<double> values;
  values.reserve(16);
  for (int a = 0; a < 4; ++a) {
    for (int k = 0; k < 4; ++k) {
      values.push_back(a == k ? same : diff);
    }
  }
  return JointTable({Party{"alice", letters}, Party{"eve", letters}}, values);
}

namespace detail {

template <typename F>
inline std::pair<double, double> golden_max(F&& f, double lo, double hi,
                                            double tol) {
  const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo;
  double b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

// Mutual information between Alice's letter and Eve's outcome when Eve
// measures her ancillas with the given element set.
inline double letter_info(const PureState& state, const Povm& eve_povm) {
  const JointTable table = born_joint(
      state, {MeasurementAssignment{"alice", tetra_povm(), {0}},
              MeasurementAssignment{"eve", eve_povm, {2, 3}}});
  return mutual_information(table);
}

}  // namespace detail

// Result of tuning the five-member measurement: the best mixing weight and
// the information gained over the four-member baseline. Reports {0, 0} when
// the baseline is already optimal.
struct MuResult {
  double mu_star = 0.0;
  double gain = 0.0;
};

inline MuResult optimize_mu(double eps, double phi = 0.0) {
  require(eps > 0.0 && eps < 2.0 / 3.0,
          "optimize_mu: noise parameter must lie strictly inside (0, 2/3)");
  const PurificationParams params(eps, phi);
  const PureState state = purification(params);
  const double baseline = detail::letter_info(state, eve_povm4(phi));

  const auto objective = [&](double mu) {
    return detail::letter_info(state, eve_povm5(phi, mu));
  };
  const auto [mu_star, best] =
      detail::golden_max(objective, 0.0, 0.5, 1e-6);
  const double gain = best - baseline;
  if (gain <= 1e-12) return MuResult{0.0, 0.0};
  return MuResult{mu_star, gain};
}

// Noise level above which the fifth outcome stops paying: bisection on the
// boundary between positive and vanishing gain. Throws when the bracket
// does not straddle the boundary.
inline double five_member_boundary(double phi = 0.0, double tol = 1e-4) {
  double lo = 0.05;
  double hi = 0.3;
  if (!(optimize_mu(lo, phi).gain > 0.0) ||
      optimize_mu(hi, phi).gain > 0.0) {
    throw std::domain_error(
        "five_member_boundary: gain does not change sign on [0.05, 0.3]");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (optimize_mu(mid, phi).gain > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace tetraqkd
