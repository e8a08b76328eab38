// Two-way iterative key generation: the exact analytic recursion for the
// per-iteration success and error probabilities, the mutual-information
// series they induce, and an executable protocol state machine operating on
// letter sequences.
//
// One protocol round pairs up positions where Alice's letters agree, and
// for each announced pair either produces one key bit on both sides (Bob's
// letters differ) or merges the pair into a leftover letter for the next
// round (Bob's letters agree). Residual positions that cannot be paired are
// discarded and counted.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "tetraqkd/channel.hpp"
#include "tetraqkd/common.hpp"
#include "tetraqkd/joint_table.hpp"
#include "tetraqkd/rng.hpp"

namespace tetraqkd {

// ---------------------------------------------------------------------------
// Analytic recursion
// ---------------------------------------------------------------------------

// Effective noise of the merged leftover pairs. Quadratic contraction: with
// x = 3 eps / (4 - eps), the image satisfies x' = x^2, so repeated rounds
// drive the noise to zero from any starting point below 1.
inline double noise_recursion(double eps) {
  require(eps >= 0.0 && eps <= 1.0,
          "noise_recursion: noise parameter must lie in [0, 1]");
  const double x = 3.0 * eps / (4.0 - eps);
  return 4.0 * x * x / (3.0 + x * x);
}

// Key-bit information content for a symmetric error rate: one bit minus the
// binary entropy of the error.
inline double i_key(double p_err) {
  require(p_err >= 0.0 && p_err <= 1.0,
          "i_key: error rate must lie in [0, 1]");
  return 1.0 + xlog2(p_err) + xlog2(1.0 - p_err);
}

// Exact per-iteration quantities. eps_n is the effective noise entering
// iteration n, q_n the per-pair success probability there, p_succ_n the
// unconditional probability that a given iteration-n slot yields a bit,
// p_err_n the probability that bit is wrong, and i_ab_n the resulting
// contribution in bits per transmitted qubit pair.
struct IterationStats {
  int n = 0;
  double eps_n = 0.0;
  double q_n = 0.0;
  double p_succ_n = 0.0;
  double p_err_n = 0.0;
  double i_ab_n = 0.0;
};

// Partial sums of the per-iteration contributions, with a rigorous bound on
// everything beyond the last computed term.
struct IabSeries {
  std::vector<IterationStats> terms;
  double total = 0.0;
  double tail_bound = 0.0;
};

inline IabSeries i_ab_series(double eps, int n_max = 5) {
  require(eps >= 0.0 && eps <= 1.0,
          "i_ab_series: noise parameter must lie in [0, 1]");
  require(n_max >= 1, "i_ab_series: need at least one iteration");
  IabSeries out;
  out.terms.reserve(std::size_t(n_max));
  double eps_n = eps;
  double fail_product = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    IterationStats s;
    s.n = n;
    s.eps_n = eps_n;
    s.q_n = (4.0 - eps_n) * (2.0 + eps_n) / 12.0;
    s.p_succ_n = s.q_n * fail_product;
    s.p_err_n = 3.0 * eps_n / (4.0 + 2.0 * eps_n);
    s.i_ab_n = std::ldexp(s.p_succ_n * i_key(s.p_err_n), -n);
    out.total += s.i_ab_n;
    out.terms.push_back(s);
    fail_product *= 1.0 - s.q_n;
    eps_n = noise_recursion(eps_n);
  }
  // Tail envelope: i_key never exceeds 1, the failure probability of a
  // round never exceeds 1/3, and the per-round success probability only
  // decreases along the recursion, so term m > n is bounded by
  // 2^{-m} p_succ_n (1/3)^{m-n}. Summing the geometric series gives
  // 2^{-n} p_succ_n / 5; the bound is met with equality at eps = 0.
  out.tail_bound = std::ldexp(out.terms.back().p_succ_n, -n_max) / 5.0;
  return out;
}

inline IterationStats iteration_probabilities(double eps, int n) {
  require(n >= 1, "iteration_probabilities: iteration index must be >= 1");
  return i_ab_series(eps, n).terms.back();
}

inline double i_ab_n(double eps, int n) {
  return iteration_probabilities(eps, n).i_ab_n;
}

inline double i_ab_total(double eps, int n_max = 5) {
  return i_ab_series(eps, n_max).total;
}

// ---------------------------------------------------------------------------
// Protocol state machine
// ---------------------------------------------------------------------------

enum class Letter : std::uint8_t { A = 0, B = 1, C = 2, D = 3 };

inline char letter_char(Letter l) {
  return char('A' + static_cast<int>(l));
}

inline Letter letter_from_index(int i) {
  require(i >= 0 && i < 4, "letter_from_index: index must be 0..3");
  return static_cast<Letter>(i);
}

// Lineage of one sequence position: the original transmission indices it
// descends from, and the iteration (1-based) that will consume it. Merged
// leftovers carry the union of their parents' sources, which keeps the
// qubit-pair cost of a bit at depth n explicit in the data.
struct Provenance {
  std::vector<std::size_t> sources;
  int depth = 1;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct LetterSequence {
  std::vector<Letter> letters;
  std::vector<Provenance> provenance;

  std::size_t size() const { return letters.size(); }
};

// One public message exchange: Alice names two positions holding the same
// letter of hers; Bob replies with his verdict, and, when his letters
// differ, announces the partition of the alphabet into the two labeled
// 2-sets. The groups are only meaningful when bob_distinct is true.
struct PairAnnouncement {
  std::size_t first_pos = 0;
  std::size_t second_pos = 0;
  bool bob_distinct = false;
  std::array<Letter, 2> group_zero = {Letter::A, Letter::A};
  std::array<Letter, 2> group_one = {Letter::A, Letter::A};
};

using AnnouncementTranscript = std::vector<PairAnnouncement>;

// Deterministic core of the distinct-letter branch: given the label drawn
// for Bob's own group, produce the announced partition and both key bits.
// Alice takes the label of the group holding her letter; Bob takes the
// label of the group his letters are NOT in.
struct PairResolution {
  std::array<Letter, 2> group_zero;
  std::array<Letter, 2> group_one;
  int alice_bit = 0;
  int bob_bit = 0;
};

inline PairResolution resolve_distinct(Letter alice_letter, Letter bob_first,
                                       Letter bob_second, int label_bit) {
  require(bob_first != bob_second,
          "resolve_distinct: Bob's letters must differ");
  require(label_bit == 0 || label_bit == 1,
          "resolve_distinct: label must be a bit");
  std::array<Letter, 2> bob_group = {bob_first, bob_second};
  if (bob_group[0] > bob_group[1]) std::swap(bob_group[0], bob_group[1]);
  std::array<Letter, 2> rest{};
  std::size_t w = 0;
  for (int i = 0; i < 4; ++i) {
    const Letter l = static_cast<Letter>(i);
    if (l != bob_group[0] && l != bob_group[1]) rest[w++] = l;
  }
  PairResolution res{};
  res.group_zero = label_bit == 0 ? bob_group : rest;
  res.group_one = label_bit == 0 ? rest : bob_group;
  const bool alice_in_zero = alice_letter == res.group_zero[0] ||
                             alice_letter == res.group_zero[1];
  res.alice_bit = alice_in_zero ? 0 : 1;
  res.bob_bit = 1 - label_bit;
  return res;
}

struct SiftResult {
  std::vector<int> alice_bits;
  std::vector<int> bob_bits;
  LetterSequence alice_leftover;
  LetterSequence bob_leftover;
  AnnouncementTranscript transcript;
  std::size_t discarded = 0;
};

namespace detail {

inline void validate_sequence(const LetterSequence& seq, const char* who) {
  require(seq.letters.size() == seq.provenance.size(),
          std::string(who) + ": letters and provenance differ in length");
  std::vector<std::size_t> all;
  for (const Provenance& p : seq.provenance) {
    require(p.depth >= 1, std::string(who) + ": provenance depth must be >= 1");
    require(!p.sources.empty(),
            std::string(who) + ": provenance must name at least one source");
    all.insert(all.end(), p.sources.begin(), p.sources.end());
  }
  std::sort(all.begin(), all.end());
  require(std::adjacent_find(all.begin(), all.end()) == all.end(),
          std::string(who) + ": provenance sources must be unique");
}

}  // namespace detail

// One sifting round. Positions are bucketed by Alice's letter, each bucket
// is shuffled with the round's RNG and paired greedily, and at most one
// residual position per letter class is discarded. RNG consumption order:
// one shuffle per letter class in alphabet order, then one label bit per
// distinct-verdict pair in announcement order.
inline SiftResult sift_round(const LetterSequence& alice,
                             const LetterSequence& bob, SplitRng& rng) {
  detail::validate_sequence(alice, "sift_round(alice)");
  detail::validate_sequence(bob, "sift_round(bob)");
  require(alice.size() == bob.size(),
          "sift_round: sequences differ in length");
  for (std::size_t i = 0; i < alice.size(); ++i) {
    require(alice.provenance[i] == bob.provenance[i],
            "sift_round: sequences are not aligned by provenance");
  }

  std::array<std::vector<std::size_t>, 4> classes;
  for (std::size_t i = 0; i < alice.size(); ++i) {
    classes[static_cast<std::size_t>(alice.letters[i])].push_back(i);
  }

  SiftResult out;
  for (auto& cls : classes) {
    rng.shuffle(cls);
    if (cls.size() % 2 == 1) ++out.discarded;
  }
  for (std::size_t c = 0; c < 4; ++c) {
    const auto& cls = classes[c];
    for (std::size_t t = 0; t + 1 < cls.size(); t += 2) {
      const std::size_t i = cls[t];
      const std::size_t j = cls[t + 1];
      const Letter b1 = bob.letters[i];
      const Letter b2 = bob.letters[j];
      PairAnnouncement ann;
      ann.first_pos = i;
      ann.second_pos = j;
      ann.bob_distinct = b1 != b2;
      if (ann.bob_distinct) {
        const int label = static_cast<int>(rng.bit());
        const PairResolution res =
            resolve_distinct(alice.letters[i], b1, b2, label);
        ann.group_zero = res.group_zero;
        ann.group_one = res.group_one;
        out.alice_bits.push_back(res.alice_bit);
        out.bob_bits.push_back(res.bob_bit);
      } else {
        Provenance merged;
        merged.sources = alice.provenance[i].sources;
        merged.sources.insert(merged.sources.end(),
                              alice.provenance[j].sources.begin(),
                              alice.provenance[j].sources.end());
        std::sort(merged.sources.begin(), merged.sources.end());
        merged.depth =
            std::max(alice.provenance[i].depth, alice.provenance[j].depth) + 1;
        out.alice_leftover.letters.push_back(alice.letters[i]);
        out.alice_leftover.provenance.push_back(merged);
        out.bob_leftover.letters.push_back(b1);
        out.bob_leftover.provenance.push_back(std::move(merged));
      }
      out.transcript.push_back(ann);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical protocol runs
// ---------------------------------------------------------------------------

// Per-iteration empirical summary with plug-in standard errors. p_succ_emp
// is normalized per iteration-n slot (bits * 2^n / n_pairs), so it estimates
// the analytic p_succ_n directly; eps_est estimates the effective noise of
// the sequences entering the round from their same-letter frequency.
struct IterationReport {
  int n = 0;
  std::size_t letters_in = 0;
  std::size_t pairs = 0;
  std::size_t bits = 0;
  std::size_t errors = 0;
  std::size_t merges = 0;
  std::size_t discarded = 0;
  double eps_est = 0.0;
  double eps_est_se = 0.0;
  double p_succ_emp = 0.0;
  double p_succ_se = 0.0;
  double p_err_emp = 0.0;
  double p_err_se = 0.0;
  double i_ab_emp = 0.0;
  double i_ab_se = 0.0;
};

inline std::vector<IterationReport> run_protocol(double eps,
                                                 std::size_t n_pairs,
                                                 int max_iter, SplitRng& rng) {
  require(n_pairs >= 2, "run_protocol: need at least two transmissions");
  require(max_iter >= 1, "run_protocol: need at least one iteration");
  const JointTable joint = joint_probs_ab(eps);
  std::array<double, 16> cdf{};
  double acc = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    acc += joint.values()[i];
    cdf[i] = acc;
  }

  LetterSequence alice;
  LetterSequence bob;
  alice.letters.reserve(n_pairs);
  bob.letters.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const double u = rng.uniform01() * acc;
    const std::size_t idx = std::size_t(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const std::size_t safe = std::min<std::size_t>(idx, 15);
    alice.letters.push_back(static_cast<Letter>(safe / 4));
    bob.letters.push_back(static_cast<Letter>(safe % 4));
    alice.provenance.push_back(Provenance{{i}, 1});
    bob.provenance.push_back(Provenance{{i}, 1});
  }

  std::vector<IterationReport> reports;
  for (int n = 1; n <= max_iter && alice.size() >= 2; ++n) {
    IterationReport rep;
    rep.n = n;
    rep.letters_in = alice.size();
    std::size_t same = 0;
    for (std::size_t i = 0; i < alice.size(); ++i) {
      if (alice.letters[i] == bob.letters[i]) ++same;
    }
    const double f = double(same) / double(rep.letters_in);
    rep.eps_est = 4.0 * f;
    rep.eps_est_se =
        4.0 * std::sqrt(f * (1.0 - f) / double(rep.letters_in));

    SiftResult round = sift_round(alice, bob, rng);
    rep.pairs = round.transcript.size();
    rep.bits = round.alice_bits.size();
    for (std::size_t i = 0; i < round.alice_bits.size(); ++i) {
      if (round.alice_bits[i] != round.bob_bits[i]) ++rep.errors;
    }
    rep.merges = round.alice_leftover.size();
    rep.discarded = round.discarded;

    const double slots = std::ldexp(double(n_pairs), -n);
    rep.p_succ_emp = double(rep.bits) / slots;
    rep.p_succ_se =
        std::sqrt(std::max(rep.p_succ_emp * (1.0 - rep.p_succ_emp), 0.0) /
                  slots);
    if (rep.bits > 0) {
      rep.p_err_emp = double(rep.errors) / double(rep.bits);
      rep.p_err_se = std::sqrt(rep.p_err_emp * (1.0 - rep.p_err_emp) /
                               double(rep.bits));
    }
    const double key_info = i_key(rep.p_err_emp);
    rep.i_ab_emp = double(rep.bits) / double(n_pairs) * key_info;
    double err_term = 0.0;
    if (rep.p_err_emp > 0.0 && rep.p_err_emp < 1.0) {
      err_term = rep.p_succ_emp *
                 std::log2(rep.p_err_emp / (1.0 - rep.p_err_emp)) *
                 rep.p_err_se;
    }
    rep.i_ab_se =
        std::ldexp(std::hypot(key_info * rep.p_succ_se, err_term), -n);
    reports.push_back(std::move(rep));

    alice = std::move(round.alice_leftover);
    bob = std::move(round.bob_leftover);
  }
  return reports;
}

}  // namespace tetraqkd
