#pragma once

// Finite joint probability tables over labeled outcomes, plus the classical
// mutual information. Tables are stored flat in row-major order with the
// last party's outcome index varying fastest.

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "tetraqkd/common.hpp"

namespace tetraqkd {

// One party of a joint distribution: a name and its ordered outcome labels.
struct Party {
  std::string name;
  std::vector<std::string> labels;
};

// Tolerance for treating a table as normalized. Looser than scalar_tol so
// that empirical frequency tables (normalized by a division) qualify.
inline constexpr double norm_tol = 1e-9;

class JointTable {
 public:
  JointTable(std::vector<Party> parties, std::vector<double> values)
      : parties_(std::move(parties)), p_(std::move(values)) {
    require(!parties_.empty(), "JointTable needs at least one party");
    std::size_t expect = 1;
    for (const Party& party : parties_) {
      require(!party.labels.empty(), "party '" + party.name + "' has no outcome labels");
      expect *= party.labels.size();
    }
    require(p_.size() == expect, "JointTable value count does not match outcome grid");
    for (double v : p_) {
      require(std::isfinite(v) && v >= 0.0, "JointTable entries must be finite and non-negative");
    }
  }

  std::size_t party_count() const { return parties_.size(); }
  const Party& party(std::size_t i) const { return parties_.at(i); }
  std::size_t dim(std::size_t i) const { return parties_.at(i).labels.size(); }
  std::size_t size() const { return p_.size(); }

  double flat(std::size_t i) const { return p_.at(i); }
  const std::vector<double>& values() const { return p_; }

  double at(std::initializer_list<std::size_t> idx) const {
    return p_[flatten(std::vector<std::size_t>(idx))];
  }
  double operator()(std::size_t i, std::size_t j) const { return at({i, j}); }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return at({i, j, k});
  }

  double total() const { return std::accumulate(p_.begin(), p_.end(), 0.0); }

  bool is_normalized(double tol = norm_tol) const {
    return std::abs(total() - 1.0) <= tol;
  }

  // Sum out every party not listed in keep. The kept parties appear in the
  // order given, so marginal({1, 0}) also transposes.
  JointTable marginal(const std::vector<std::size_t>& keep) const {
    require(!keep.empty(), "marginal needs at least one party");
    std::vector<bool> seen(parties_.size(), false);
    std::vector<Party> parties;
    for (std::size_t k : keep) {
      require(k < parties_.size(), "marginal party index out of range");
      require(!seen[k], "marginal party listed twice");
      seen[k] = true;
      parties.push_back(parties_[k]);
    }
    std::size_t out_size = 1;
    for (const Party& party : parties) out_size *= party.labels.size();
    std::vector<double> out(out_size, 0.0);
    std::vector<std::size_t> idx(parties_.size(), 0);
    for (std::size_t f = 0; f < p_.size(); ++f) {
      unflatten(f, idx);
      std::size_t g = 0;
      for (std::size_t k : keep) g = g * dim(k) + idx[k];
      out[g] += p_[f];
    }
    return JointTable(std::move(parties), std::move(out));
  }

  // Marginal probability vector of a single party.
  std::vector<double> marginal_of(std::size_t party_index) const {
    return marginal({party_index}).values();
  }

  // Rows of outcome labels plus the probability, comma separated. The
  // header line names the columns; callers prepend their own comment block.
  void write_csv(std::ostream& os) const {
    for (std::size_t i = 0; i < parties_.size(); ++i) {
      os << parties_[i].name << ',';
    }
    os << "probability\n";
    std::vector<std::size_t> idx(parties_.size(), 0);
    for (std::size_t f = 0; f < p_.size(); ++f) {
      unflatten(f, idx);
      for (std::size_t i = 0; i < parties_.size(); ++i) {
        os << parties_[i].labels[idx[i]] << ',';
      }
      os << p_[f] << '\n';
    }
  }

 private:
  std::size_t flatten(const std::vector<std::size_t>& idx) const {
    require(idx.size() == parties_.size(), "index arity does not match party count");
    std::size_t f = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      require(idx[i] < dim(i), "outcome index out of range");
      f = f * dim(i) + idx[i];
    }
    return f;
  }

  void unflatten(std::size_t f, std::vector<std::size_t>& idx) const {
    for (std::size_t i = parties_.size(); i-- > 0;) {
      idx[i] = f % dim(i);
      f /= dim(i);
    }
  }

  std::vector<Party> parties_;
  std::vector<double> p_;
};

// Classical mutual information of a normalized two-party table, in bits.
// Uses the convention 0 * log 0 = 0. Non-negative up to rounding; tiny
// negative rounding residue is clamped to zero.
inline double mutual_information(const JointTable& table) {
  require(table.party_count() == 2, "mutual_information needs a two-party table");
  require(table.is_normalized(), "mutual_information needs a normalized table (unnormalized input)");
  const std::size_t na = table.dim(0);
  const std::size_t nb = table.dim(1);
  std::vector<double> pa(na, 0.0), pb(nb, 0.0);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      pa[i] += table(i, j);
      pb[j] += table(i, j);
    }
  }
  double bits = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double p = table(i, j);
      if (p > 0.0) bits += p * std::log2(p / (pa[i] * pb[j]));
    }
  }
  return bits < 0.0 && bits > -scalar_tol ? 0.0 : bits;
}

}  // namespace tetraqkd
