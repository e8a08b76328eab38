// Eavesdropper information per iteration, the resulting key yield, noise
// thresholds, and the six-state comparison curve.
//
// The analysis models Eve as measuring every transmission with her
// square-root measurement and post-processing outcomes per announced block.
// A key bit at iteration n descends from 2^n transmissions that all carry
// the same Alice letter; Eve's letters are treated as conditionally
// independent given that letter, and only their occurrence counts matter.

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tetraqkd/common.hpp"
#include "tetraqkd/eve.hpp"
#include "tetraqkd/joint_table.hpp"
#include "tetraqkd/keygen.hpp"

namespace tetraqkd {

// Occurrence counts of Eve's four letters within one block.
struct CountVector {
  std::array<int, 4> counts{};

  long long total() const {
    long long t = 0;
    for (const int c : counts) t += c;
    return t;
  }
};

namespace detail {

// Conditional letter probabilities for Eve given Alice's letter, expressed
// through the overlap penalty: q_same on a match, q_diff otherwise.
struct EveLetterProbs {
  double q_same;
  double q_diff;
};

inline EveLetterProbs eve_letter_probs(double eta_val) {
  require(eta_val >= 0.0 && eta_val <= 1.0,
          "eve_letter_probs: overlap penalty must lie in [0, 1]");
  return {eta_val / 4.0, (4.0 - eta_val) / 12.0};
}

// The three partitions of the alphabet into two 2-sets, as letter -> bit.
inline constexpr int kGroupingBits[3][4] = {
    {0, 0, 1, 1}, {0, 1, 0, 1}, {0, 1, 1, 0}};

}  // namespace detail

// Joint distribution of Alice's key bit and Eve's measured letter pair for
// one successful first-iteration block, conditioned on success. grouping
// selects which partition of the alphabet defines the key bit; the three
// choices are statistically equivalent.
inline JointTable keybit_eve_table(double eps, int grouping = 0) {
  require(grouping >= 0 && grouping < 3,
          "keybit_eve_table: grouping must select one of the three "
          "letter partitions");
  const auto [qs, qd] = detail::eve_letter_probs(eta(eps));

  std::vector<double> values(32, 0.0);
  for (int a = 0; a < 4; ++a) {
    const int bit = detail::kGroupingBits[grouping][a];
    for (int m1 = 0; m1 < 4; ++m1) {
      for (int m2 = 0; m2 < 4; ++m2) {
        const double w =
            0.25 * (m1 == a ? qs : qd) * (m2 == a ? qs : qd);
        values[std::size_t(bit * 16 + m1 * 4 + m2)] += w;
      }
    }
  }
  std::vector<std::string> pair_labels;
  pair_labels.reserve(16);
  for (int m1 = 0; m1 < 4; ++m1) {
    for (int m2 = 0; m2 < 4; ++m2) {
      pair_labels.push_back(std::string{char('A' + m1), char('A' + m2)});
    }
  }
  return JointTable(
      {Party{"keybit", {"0", "1"}}, Party{"eve", std::move(pair_labels)}},
      values);
}

// Eve's information about the first-iteration key bit, in bits per
// transmitted pair: the closed five-term form of the block mutual
// information, times the probability of producing a bit per pair.
inline double i_ae_1(double eps) {
  const auto [qs, qd] = detail::eve_letter_probs(eta(eps));
  const double bracket =
      wlog2(qs * qs + qd * qd, 0.5 * (qs * qs + qd * qd)) +
      wlog2(4.0 * qd * qd, qd * qd) + wlog2(2.0 * qs * qd, qs * qd) -
      wlog2(qs * qs + 3.0 * qd * qd, 0.25 * (qs * qs + 3.0 * qd * qd)) -
      wlog2(2.0 * qd * (qs + qd), 0.5 * qd * (qs + qd));
  return 0.5 * iteration_probabilities(eps, 1).p_succ_n * bracket;
}

// Probabilities of one Eve letter-count pattern within a block of 2^n
// transmissions: q0 joint with key bit 0, q1 with key bit 1, q the
// marginal. The probabilities refer to one ordered letter sequence with
// those counts; multiplicities enter through multinomial coefficients.
struct EveSequenceProbs {
  double q0 = 0.0;
  double q1 = 0.0;
  double q = 0.0;
};

inline EveSequenceProbs eve_sequence_probs(int n, const CountVector& counts,
                                           double eta_val) {
  require(n >= 1, "eve_sequence_probs: iteration index must be >= 1");
  for (const int c : counts.counts) {
    require(c >= 0, "eve_sequence_probs: counts must be non-negative");
  }
  const long long block = 1LL << n;
  require(counts.total() == block,
          "eve_sequence_probs: counts must sum to 2^n");
  const auto [qs, qd] = detail::eve_letter_probs(eta_val);

  const auto sequence_prob = [&](int matches) {
    return 0.25 * std::pow(qs, double(matches)) *
           std::pow(qd, double(block - matches));
  };
  EveSequenceProbs out;
  out.q0 = sequence_prob(counts.counts[0]) + sequence_prob(counts.counts[1]);
  out.q1 = sequence_prob(counts.counts[2]) + sequence_prob(counts.counts[3]);
  out.q = out.q0 + out.q1;
  return out;
}

// Eve's information about the iteration-n key bit, in bits per transmitted
// pair, by exact enumeration of all letter-count patterns. The composition
// count grows as (2^n)^3, so the exact sum is limited to n <= 6.
inline double i_ae_n(double eps, int n) {
  require(n >= 1, "i_ae_n: iteration index must be >= 1");
  require(n <= 6,
          "i_ae_n: exact composition sum supported only for n <= 6");
  const double e = eta(eps);
  const int block = 1 << n;
  const double log_block_fact = std::lgamma(double(block) + 1.0);

  double block_info = 0.0;
  for (int na = 0; na <= block; ++na) {
    for (int nb = 0; nb + na <= block; ++nb) {
      for (int nc = 0; nc + nb + na <= block; ++nc) {
        const int nd = block - na - nb - nc;
        const double multinomial = std::exp(
            log_block_fact - std::lgamma(double(na) + 1.0) -
            std::lgamma(double(nb) + 1.0) - std::lgamma(double(nc) + 1.0) -
            std::lgamma(double(nd) + 1.0));
        const EveSequenceProbs p =
            eve_sequence_probs(n, CountVector{{na, nb, nc, nd}}, e);
        if (p.q <= 0.0) continue;
        for (const double qk : {p.q0, p.q1}) {
          if (qk > 0.0) {
            block_info += multinomial * qk * std::log2(qk / (0.5 * p.q));
          }
        }
      }
    }
  }
  return std::ldexp(iteration_probabilities(eps, n).p_succ_n * block_info,
                    -n);
}

inline double i_ae_total(double eps, int n_max = 5) {
  require(n_max >= 1, "i_ae_total: need at least one iteration");
  double total = 0.0;
  for (int n = 1; n <= n_max; ++n) total += i_ae_n(eps, n);
  return total;
}

// Net key yield: what Alice and Bob share minus what Eve shares with
// Alice, truncated at the same iteration count on both sides.
struct YieldReport {
  double eps = 0.0;
  int n_max = 0;
  std::vector<double> i_ab_terms;
  std::vector<double> i_ae_terms;
  double i_ab_total = 0.0;
  double i_ae_total = 0.0;
  double yield = 0.0;
};

inline YieldReport ck_yield(double eps, int n_max = 5) {
  require(eps >= 0.0 && eps <= 2.0 / 3.0,
          "ck_yield: noise parameter must lie in [0, 2/3]");
  YieldReport out;
  out.eps = eps;
  out.n_max = n_max;
  const IabSeries ab = i_ab_series(eps, n_max);
  for (const IterationStats& s : ab.terms) {
    out.i_ab_terms.push_back(s.i_ab_n);
    out.i_ab_total += s.i_ab_n;
  }
  for (int n = 1; n <= n_max; ++n) {
    out.i_ae_terms.push_back(i_ae_n(eps, n));
    out.i_ae_total += out.i_ae_terms.back();
  }
  out.yield = out.i_ab_total - out.i_ae_total;
  return out;
}

// Largest tolerable noise: bisection root of the yield on [0, 2/3].
inline double threshold(int n_max = 5, double tol = 1e-6) {
  require(n_max >= 1 && n_max <= 6,
          "threshold: iteration count must lie in 1..6");
  require(tol > 0.0, "threshold: tolerance must be positive");
  double lo = 0.0;
  double hi = 2.0 / 3.0;
  const double y_lo = ck_yield(lo, n_max).yield;
  const double y_hi = ck_yield(hi, n_max).yield;
  if (!(y_lo > 0.0 && y_hi < 0.0)) {
    throw std::domain_error(
        "threshold: yield does not change sign on [0, 2/3]; "
        "no crossing to report");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (ck_yield(mid, n_max).yield > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Alice/Bob information of the six-state reference protocol at the same
// isotropic noise level.
inline double six_state_iab(double eps) {
  require(eps >= 0.0 && eps <= 1.0,
          "six_state_iab: noise parameter must lie in [0, 1]");
  return (xlog2(eps) + xlog2(2.0 - eps)) / 6.0;
}

}  // namespace tetraqkd
