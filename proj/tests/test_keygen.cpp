// Tests for the key-generation module: the noise recursion, the
// mutual-information series, the sifting state machine, and empirical
// protocol runs against their analytic targets.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "tetraqkd/keygen.hpp"
#include "tetraqkd/rng.hpp"

using namespace tetraqkd;

namespace {

LetterSequence make_sequence(std::vector<Letter> letters) {
  LetterSequence seq;
  seq.letters = std::move(letters);
  for (std::size_t i = 0; i < seq.letters.size(); ++i) {
    seq.provenance.push_back(Provenance{{i}, 1});
  }
  return seq;
}

}  // namespace

TEST_CASE("noise recursion", "[keygen]") {
  SECTION("fixed points and the hand-solved midpoint") {
    CHECK(noise_recursion(0.0) == 0.0);
    CHECK(noise_recursion(1.0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(noise_recursion(0.4) == Catch::Approx(1.0 / 7.0).margin(1e-15));
  }

  SECTION("strictly contracting below the upper fixed point") {
    for (int i = 1; i < 100; ++i) {
      const double eps = i / 100.0;
      CHECK(noise_recursion(eps) < eps);
    }
  }

  SECTION("rejects noise outside [0, 1]") {
    CHECK_THROWS_AS(noise_recursion(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(noise_recursion(1.1), std::invalid_argument);
  }
}

TEST_CASE("per-iteration probabilities", "[keygen]") {
  SECTION("clean channel, first and second iteration") {
    const IterationStats s1 = iteration_probabilities(0.0, 1);
    CHECK(s1.q_n == Catch::Approx(2.0 / 3.0).margin(1e-15));
    CHECK(s1.p_succ_n == Catch::Approx(2.0 / 3.0).margin(1e-15));
    CHECK(s1.p_err_n == 0.0);
    const IterationStats s2 = iteration_probabilities(0.0, 2);
    CHECK(s2.p_succ_n == Catch::Approx(2.0 / 9.0).margin(1e-15));
    CHECK(s2.p_err_n == 0.0);
  }

  SECTION("second iteration at eps = 0.4 via both error-rate routes") {
    const IterationStats s = iteration_probabilities(0.4, 2);
    CHECK(s.eps_n == Catch::Approx(1.0 / 7.0).margin(1e-15));
    // Closed form: [1 + ((4 - eps)/(3 eps))^(2^(n-1))]^(-1) with the
    // original eps, here [1 + 3^2]^(-1) = 0.1 exactly.
    CHECK(s.p_err_n == Catch::Approx(0.1).margin(1e-15));
    CHECK(s.p_err_n ==
          Catch::Approx(3.0 * s.eps_n / (4.0 + 2.0 * s.eps_n)).margin(1e-15));
  }

  SECTION("closed-form and recursive error rates agree for n <= 6") {
    for (int i = 1; i <= 50; ++i) {
      const double eps = 0.02 * i;
      for (int n = 1; n <= 6; ++n) {
        const double recursive = iteration_probabilities(eps, n).p_err_n;
        const double power = std::pow((4.0 - eps) / (3.0 * eps),
                                      std::ldexp(1.0, n - 1));
        const double closed = 1.0 / (1.0 + power);
        CHECK(std::abs(recursive - closed) <= 1e-12);
      }
    }
  }

  SECTION("rejects iteration index below 1") {
    CHECK_THROWS_AS(iteration_probabilities(0.1, 0), std::invalid_argument);
  }
}

TEST_CASE("key-bit information content", "[keygen]") {
  CHECK(i_key(0.0) == 1.0);
  CHECK(i_key(1.0) == 1.0);
  CHECK(i_key(0.5) == Catch::Approx(0.0).margin(1e-15));
  for (int i = 0; i <= 20; ++i) {
    const double p = i / 20.0;
    CHECK(i_key(p) == Catch::Approx(i_key(1.0 - p)).margin(1e-14));
  }
  CHECK_THROWS_AS(i_key(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(i_key(1.1), std::invalid_argument);
}

TEST_CASE("per-iteration information contributions", "[keygen]") {
  SECTION("clean channel gives 2/6^n bits per pair") {
    CHECK(i_ab_n(0.0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK(i_ab_n(0.0, 2) == Catch::Approx(1.0 / 18.0).margin(1e-15));
    for (int n = 1; n <= 8; ++n) {
      CHECK(i_ab_n(0.0, n) ==
            Catch::Approx(2.0 * std::pow(6.0, -n)).margin(1e-15));
    }
  }

  SECTION("first-iteration value agrees with the expanded product form") {
    for (const double eps : {0.05, 0.2, 0.4, 0.6}) {
      const double ps = eps / 4.0;
      const double pd = (4.0 - eps) / 12.0;
      const double expanded =
          3.0 * pd *
          ((ps + pd) * (1.0 - std::log2(ps + pd)) + xlog2(ps) + xlog2(pd));
      CHECK(i_ab_n(eps, 1) == Catch::Approx(expanded).margin(1e-14));
    }
  }
}

TEST_CASE("information series and its tail bound", "[keygen]") {
  SECTION("frozen partial sums") {
    CHECK(i_ab_total(0.0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK(i_ab_total(0.0, 2) ==
          Catch::Approx(0.3888888888888889).margin(1e-12));
    CHECK(i_ab_total(0.0, 3) ==
          Catch::Approx(0.39814814814814814).margin(1e-12));
    CHECK(i_ab_total(0.0, 20) == Catch::Approx(0.4).margin(1e-9));
    CHECK(i_ab_total(2.0 / 3.0, 3) ==
          Catch::Approx(0.0276855).margin(1e-6));
    CHECK(i_ab_total(1.0, 5) == Catch::Approx(0.0).margin(1e-15));
  }

  SECTION("monotone in the truncation order") {
    for (const double eps : {0.0, 0.3, 2.0 / 3.0}) {
      double prev = 0.0;
      for (int n = 1; n <= 10; ++n) {
        const double cur = i_ab_total(eps, n);
        CHECK(cur >= prev);
        prev = cur;
      }
    }
  }

  SECTION("tail bound is exact at zero noise") {
    for (const int n : {1, 3, 5}) {
      const IabSeries s = i_ab_series(0.0, n);
      CHECK(s.total + s.tail_bound == Catch::Approx(0.4).margin(1e-12));
    }
  }

  SECTION("tail bound dominates the remaining terms") {
    for (int i = 0; i <= 20; ++i) {
      const double eps = i / 20.0;
      for (const int n : {2, 4}) {
        const IabSeries s = i_ab_series(eps, n);
        CHECK(s.tail_bound >= 0.0);
        CHECK(s.total + s.tail_bound >= i_ab_total(eps, n + 7) - 1e-15);
      }
    }
  }

  SECTION("successive terms shrink by at least half on the attack domain") {
    for (int i = 0; i <= 20; ++i) {
      const double eps = i * (2.0 / 3.0) / 20.0;
      const IabSeries s = i_ab_series(eps, 8);
      for (std::size_t t = 1; t < s.terms.size(); ++t) {
        CHECK(s.terms[t].i_ab_n <= 0.5 * s.terms[t - 1].i_ab_n + 1e-15);
      }
    }
  }

  SECTION("measured convergence rate of the truncation") {
    // Three iterations land within 0.01 bits of the 12-term proxy
    // everywhere on the attack domain. The relative gap at zero noise is
    // 0.46%, pinned on both sides so regressions surface.
    double worst_abs = 0.0;
    for (int i = 0; i <= 50; ++i) {
      const double eps = i * (2.0 / 3.0) / 50.0;
      const double gap = i_ab_total(eps, 12) - i_ab_total(eps, 3);
      CHECK(gap >= 0.0);
      worst_abs = std::max(worst_abs, gap);
    }
    CHECK(worst_abs < 0.01);
    const double rel0 = (i_ab_total(0.0, 12) - i_ab_total(0.0, 3)) /
                        i_ab_total(0.0, 12);
    CHECK(rel0 == Catch::Approx(0.00463).margin(2e-4));
  }
}

TEST_CASE("distinct-letter resolution", "[keygen]") {
  SECTION("anti-correlated letters agree for either label") {
    const PairResolution r0 =
        resolve_distinct(Letter::A, Letter::B, Letter::C, 0);
    CHECK(r0.group_zero == std::array<Letter, 2>{Letter::B, Letter::C});
    CHECK(r0.group_one == std::array<Letter, 2>{Letter::A, Letter::D});
    CHECK(r0.alice_bit == 1);
    CHECK(r0.bob_bit == 1);
    const PairResolution r1 =
        resolve_distinct(Letter::A, Letter::B, Letter::C, 1);
    CHECK(r1.alice_bit == 0);
    CHECK(r1.bob_bit == 0);
  }

  SECTION("Alice's letter inside Bob's group flips her bit") {
    const PairResolution r =
        resolve_distinct(Letter::A, Letter::A, Letter::C, 0);
    CHECK(r.group_zero == std::array<Letter, 2>{Letter::A, Letter::C});
    CHECK(r.group_one == std::array<Letter, 2>{Letter::B, Letter::D});
    CHECK(r.alice_bit == 0);
    CHECK(r.bob_bit == 1);
  }

  SECTION("rejects degenerate input") {
    CHECK_THROWS_AS(resolve_distinct(Letter::A, Letter::B, Letter::B, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(resolve_distinct(Letter::A, Letter::B, Letter::C, 2),
                    std::invalid_argument);
  }
}

TEST_CASE("sifting round", "[keygen]") {
  SECTION("equal Bob letters merge into provenance-tracked leftovers") {
    SplitRng rng(7);
    const LetterSequence alice = make_sequence({Letter::A, Letter::A});
    const LetterSequence bob = make_sequence({Letter::C, Letter::C});
    const SiftResult r = sift_round(alice, bob, rng);
    CHECK(r.alice_bits.empty());
    CHECK(r.bob_bits.empty());
    REQUIRE(r.alice_leftover.size() == 1);
    CHECK(r.alice_leftover.letters[0] == Letter::A);
    CHECK(r.bob_leftover.letters[0] == Letter::C);
    CHECK(r.alice_leftover.provenance[0].sources ==
          std::vector<std::size_t>{0, 1});
    CHECK(r.alice_leftover.provenance[0].depth == 2);
    CHECK(r.bob_leftover.provenance[0] == r.alice_leftover.provenance[0]);
    REQUIRE(r.transcript.size() == 1);
    CHECK_FALSE(r.transcript[0].bob_distinct);
    CHECK(r.discarded == 0);
  }

  SECTION("distinct Bob letters produce one agreeing bit") {
    SplitRng rng(7);
    const LetterSequence alice = make_sequence({Letter::A, Letter::A});
    const LetterSequence bob = make_sequence({Letter::B, Letter::C});
    const SiftResult r = sift_round(alice, bob, rng);
    REQUIRE(r.alice_bits.size() == 1);
    CHECK(r.alice_bits[0] == r.bob_bits[0]);
    CHECK(r.alice_leftover.size() == 0);
    REQUIRE(r.transcript.size() == 1);
    CHECK(r.transcript[0].bob_distinct);
    // The two announced groups partition the alphabet.
    std::array<int, 4> seen{};
    for (const Letter l : r.transcript[0].group_zero) ++seen[int(l)];
    for (const Letter l : r.transcript[0].group_one) ++seen[int(l)];
    CHECK(seen == std::array<int, 4>{1, 1, 1, 1});
  }

  SECTION("Alice's letter among Bob's letters produces an error bit") {
    SplitRng rng(7);
    const LetterSequence alice = make_sequence({Letter::A, Letter::A});
    const LetterSequence bob = make_sequence({Letter::A, Letter::C});
    const SiftResult r = sift_round(alice, bob, rng);
    REQUIRE(r.alice_bits.size() == 1);
    CHECK(r.alice_bits[0] != r.bob_bits[0]);
  }

  SECTION("odd class sizes discard at most one position per letter") {
    SplitRng rng(11);
    const LetterSequence alice = make_sequence(
        {Letter::A, Letter::A, Letter::A, Letter::B, Letter::C});
    const LetterSequence bob = make_sequence(
        {Letter::B, Letter::C, Letter::D, Letter::A, Letter::A});
    const SiftResult r = sift_round(alice, bob, rng);
    // Class A has three members (one pair, one residual); classes B and C
    // have one member each (residuals); class D is empty.
    CHECK(r.transcript.size() == 1);
    CHECK(r.discarded == 3);
  }

  SECTION("rejects misaligned or malformed sequences") {
    SplitRng rng(3);
    LetterSequence alice = make_sequence({Letter::A, Letter::A});
    LetterSequence bob = make_sequence({Letter::B, Letter::C});
    LetterSequence shorter = make_sequence({Letter::B});
    CHECK_THROWS_AS(sift_round(alice, shorter, rng), std::invalid_argument);

    LetterSequence shifted = bob;
    shifted.provenance[1].sources = {5};
    CHECK_THROWS_AS(sift_round(alice, shifted, rng), std::invalid_argument);

    LetterSequence duplicated = bob;
    duplicated.provenance[1].sources = {0};
    CHECK_THROWS_AS(sift_round(alice, duplicated, rng),
                    std::invalid_argument);

    LetterSequence shallow = bob;
    shallow.provenance[1].depth = 0;
    CHECK_THROWS_AS(sift_round(alice, shallow, rng), std::invalid_argument);
  }
}

TEST_CASE("exhaustive first-iteration oracle", "[keygen]") {
  // Enumerate every Alice letter, ordered Bob pair, and label draw, weighted
  // by the letter distribution of the noisy pair. Feeding each distinct case
  // through the same resolution code the protocol uses must reproduce the
  // analytic success and error rates exactly.
  for (const double eps : {0.1, 0.4, 0.63}) {
    const double ps = eps / 4.0;
    const double pd = (4.0 - eps) / 12.0;
    double p_succ = 0.0;
    double p_joint_err = 0.0;
    for (int a = 0; a < 4; ++a) {
      for (int b1 = 0; b1 < 4; ++b1) {
        for (int b2 = 0; b2 < 4; ++b2) {
          if (b1 == b2) continue;
          const double w = 0.25 * (b1 == a ? ps : pd) * (b2 == a ? ps : pd);
          p_succ += w;
          for (int label = 0; label < 2; ++label) {
            const PairResolution r = resolve_distinct(
                letter_from_index(a), letter_from_index(b1),
                letter_from_index(b2), label);
            if (r.alice_bit != r.bob_bit) p_joint_err += 0.5 * w;
          }
        }
      }
    }
    const IterationStats s = iteration_probabilities(eps, 1);
    CHECK(std::abs(p_succ - s.p_succ_n) <= 1e-14);
    CHECK(std::abs(p_joint_err / p_succ - s.p_err_n) <= 1e-14);
    // Structural form of the error event: disagreement exactly when
    // Alice's letter sits among Bob's letters, independent of the label.
    CHECK(std::abs(p_joint_err / p_succ - ps / (ps + pd)) <= 1e-14);
  }
}

TEST_CASE("empirical protocol runs", "[keygen]") {
  SECTION("deterministic for a fixed seed") {
    SplitRng rng_a(2024);
    SplitRng rng_b(2024);
    const auto a = run_protocol(0.4, 20000, 3, rng_a);
    const auto b = run_protocol(0.4, 20000, 3, rng_b);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].bits == b[i].bits);
      CHECK(a[i].errors == b[i].errors);
      CHECK(a[i].merges == b[i].merges);
    }
  }

  SECTION("accounting is exact every round") {
    SplitRng rng(99);
    const auto reports = run_protocol(0.5, 100001, 4, rng);
    REQUIRE(!reports.empty());
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const IterationReport& r = reports[i];
      CHECK(r.letters_in == 2 * r.pairs + r.discarded);
      CHECK(r.pairs == r.bits + r.merges);
      if (i + 1 < reports.size()) {
        CHECK(reports[i + 1].letters_in == r.merges);
      }
    }
  }

  SECTION("clean channel never errs and meets the analytic success rates") {
    SplitRng rng(5);
    const auto reports = run_protocol(0.0, 100000, 3, rng);
    REQUIRE(reports.size() == 3);
    for (const IterationReport& r : reports) {
      CHECK(r.errors == 0);
      CHECK(r.eps_est == 0.0);
      const double want = iteration_probabilities(0.0, r.n).p_succ_n;
      CHECK(std::abs(r.p_succ_emp - want) <= 4.0 * r.p_succ_se);
    }
  }

  SECTION("noisy channel matches error rate, recursion, and information") {
    SplitRng rng(31337);
    const auto reports = run_protocol(0.4, 200000, 3, rng);
    REQUIRE(reports.size() == 3);

    CHECK(std::abs(reports[0].p_err_emp - 0.25) <=
          4.0 * reports[0].p_err_se);
    CHECK(std::abs(reports[0].eps_est - 0.4) <= 4.0 * reports[0].eps_est_se);
    CHECK(std::abs(reports[1].eps_est - 1.0 / 7.0) <=
          4.0 * reports[1].eps_est_se);

    double total_emp = 0.0;
    double var = 0.0;
    for (const IterationReport& r : reports) {
      const IterationStats want = iteration_probabilities(0.4, r.n);
      CHECK(std::abs(r.p_succ_emp - want.p_succ_n) <= 4.0 * r.p_succ_se);
      CHECK(std::abs(r.i_ab_emp - want.i_ab_n) <= 4.0 * r.i_ab_se);
      total_emp += r.i_ab_emp;
      var += r.i_ab_se * r.i_ab_se;
    }
    CHECK(std::abs(total_emp - i_ab_total(0.4, 3)) <=
          4.0 * std::sqrt(var));
  }

  SECTION("rejects degenerate configurations") {
    SplitRng rng(1);
    CHECK_THROWS_AS(run_protocol(0.1, 1, 3, rng), std::invalid_argument);
    CHECK_THROWS_AS(run_protocol(0.1, 100, 0, rng), std::invalid_argument);
  }

  SECTION("tiny runs terminate cleanly") {
    SplitRng rng(8);
    const auto reports = run_protocol(0.3, 2, 5, rng);
    for (const IterationReport& r : reports) {
      CHECK(r.letters_in == 2 * r.pairs + r.discarded);
    }
  }
}
