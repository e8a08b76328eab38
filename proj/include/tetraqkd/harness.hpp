// Experiment runner behind the command-line tool: exact three-party outcome
// tables, seeded sampling, empirical information estimates, and the mode
// dispatch that writes CSV files.
//
// Output files carry a deterministic comment header (version, seed, config
// hash) and no timestamps, so identical configurations produce byte-identical
// files. Exit codes: 0 success, 2 configuration or input-data error, 3
// violated internal numerical contract.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "tetraqkd/channel.hpp"
#include "tetraqkd/common.hpp"
#include "tetraqkd/eve.hpp"
#include "tetraqkd/joint_table.hpp"
#include "tetraqkd/keygen.hpp"
#include "tetraqkd/qmath.hpp"
#include "tetraqkd/rng.hpp"
#include "tetraqkd/security.hpp"

namespace tetraqkd {

inline constexpr const char* tool_version = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Inclusive noise grid, expanded as start, start + step, ..., stop.
struct EpsGrid {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
};

inline std::vector<double> grid_points(const EpsGrid& grid) {
  require(std::isfinite(grid.start) && std::isfinite(grid.stop) &&
              std::isfinite(grid.step),
          "eps grid bounds must be finite");
  require(grid.step > 0.0, "eps grid step must be positive");
  require(grid.stop >= grid.start, "eps grid stop must be >= start");
  const auto count =
      std::size_t((grid.stop - grid.start) / grid.step + 1.0 + 1e-9);
  std::vector<double> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    points.push_back(
        std::min(grid.start + double(i) * grid.step, grid.stop));
  }
  return points;
}

struct ExperimentConfig {
  std::string mode = "analytic";
  double eps = 0.1;
  std::optional<EpsGrid> eps_grid;
  long long n_pairs = 100000;
  int max_iter = 5;
  std::uint64_t seed = 1;
  double phi = 0.0;
  double tol = 1e-6;                 // threshold-mode bisection tolerance
  std::string mu_policy = "four";    // four | five:<mu> | optimal
  std::string out;                   // output file; empty uses $TETRAQKD_OUT_DIR
  std::string overlay_sixstate_eve;  // compare mode: external curve, optional
};

namespace detail {

// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trimmed(std::string s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.back())) s.pop_back();
  std::size_t lead = 0;
  while (lead < s.size() && is_space(s[lead])) ++lead;
  return s.substr(lead);
}

inline double parse_double(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  require(used == text.size(), "trailing characters in number: '" + text + "'");
  require(std::isfinite(v), "number must be finite: '" + text + "'");
  return v;
}

inline long long parse_integer(const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not an integer: '" + text + "'");
  }
  require(used == text.size(),
          "trailing characters in integer: '" + text + "'");
  return v;
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline std::string format_grid(const EpsGrid& grid) {
  return detail::format_double(grid.start) + ":" +
         detail::format_double(grid.stop) + ":" +
         detail::format_double(grid.step);
}

inline EpsGrid parse_grid(const std::string& text) {
  std::array<std::string, 3> parts;
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t colon = i < 2 ? text.find(':', pos) : std::string::npos;
    require(i == 2 || colon != std::string::npos,
            "eps grid must look like start:stop:step");
    parts[std::size_t(i)] =
        text.substr(pos, (colon == std::string::npos ? text.size() : colon) - pos);
    pos = colon + 1;
  }
  const EpsGrid grid{detail::parse_double(parts[0]),
                     detail::parse_double(parts[1]),
                     detail::parse_double(parts[2])};
  grid_points(grid);
  return grid;
}

// Assign one configuration field from its textual form. Unknown keys and
// malformed values are configuration errors.
inline void set_config_field(ExperimentConfig& config, const std::string& key,
                             const std::string& value) {
  if (key == "mode") {
    config.mode = value;
  } else if (key == "eps") {
    config.eps = detail::parse_double(value);
    config.eps_grid.reset();
  } else if (key == "eps_grid") {
    if (value.empty()) {
      config.eps_grid.reset();
    } else {
      config.eps_grid = parse_grid(value);
    }
  } else if (key == "n_pairs") {
    config.n_pairs = detail::parse_integer(value);
  } else if (key == "max_iter") {
    config.max_iter = int(detail::parse_integer(value));
  } else if (key == "seed") {
    const long long s = detail::parse_integer(value);
    require(s >= 0, "seed must be non-negative");
    config.seed = std::uint64_t(s);
  } else if (key == "phi") {
    config.phi = detail::parse_double(value);
  } else if (key == "tol") {
    config.tol = detail::parse_double(value);
  } else if (key == "mu_policy") {
    config.mu_policy = value;
  } else if (key == "out") {
    config.out = value;
  } else if (key == "overlay_sixstate_eve") {
    config.overlay_sixstate_eve = value;
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

// Canonical key=value form, one field per line, fixed order. This string is
// what the config hash digests.
inline std::string dump_config(const ExperimentConfig& config) {
  std::string s;
  s += "mode=" + config.mode + "\n";
  s += "eps=" + detail::format_double(config.eps) + "\n";
  s += "eps_grid=" +
       (config.eps_grid ? format_grid(*config.eps_grid) : std::string()) +
       "\n";
  s += "n_pairs=" + std::to_string(config.n_pairs) + "\n";
  s += "max_iter=" + std::to_string(config.max_iter) + "\n";
  s += "seed=" + std::to_string(config.seed) + "\n";
  s += "phi=" + detail::format_double(config.phi) + "\n";
  s += "tol=" + detail::format_double(config.tol) + "\n";
  s += "mu_policy=" + config.mu_policy + "\n";
  s += "out=" + config.out + "\n";
  s += "overlay_sixstate_eve=" + config.overlay_sixstate_eve + "\n";
  return s;
}

inline std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                (unsigned long long)detail::fnv1a64(dump_config(config)));
  return buf;
}

// Flat key=value config file. Blank lines and lines starting with '#' are
// skipped; everything else must parse. Later assignments win.
inline ExperimentConfig load_config_file(const std::string& path,
                                         ExperimentConfig base = {}) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string entry = detail::trimmed(line);
    if (entry.empty() || entry.front() == '#') continue;
    const std::size_t eq = entry.find('=');
    require(eq != std::string::npos, path + ":" + std::to_string(lineno) +
                                         ": expected key=value");
    set_config_field(base, detail::trimmed(entry.substr(0, eq)),
                     detail::trimmed(entry.substr(eq + 1)));
  }
  return base;
}

// ---------------------------------------------------------------------------
// Three-party sampling
// ---------------------------------------------------------------------------

// Exact joint outcome table of Alice's and Bob's tetrahedron measurements
// and Eve's measurement on her two ancilla qubits, from the Born rule on the
// four-qubit purification. The two-party faces are re-checked against their
// closed forms; a deviation is an internal bug, not bad input.
inline JointTable triple_distribution(double eps, double phi,
                                      const Povm& eve_measurement) {
  require(eve_measurement.qubit_count() == 2,
          "triple_distribution: Eve's measurement must act on two qubits");
  const PureState state = purification(PurificationParams(eps, phi));
  JointTable table =
      born_joint(state, {MeasurementAssignment{"alice", tetra_povm(), {0}},
                         MeasurementAssignment{"bob", tetra_povm(), {1}},
                         MeasurementAssignment{"eve", eve_measurement, {2, 3}}});

  const std::vector<double> ab = table.marginal({0, 1}).values();
  const std::vector<double> ab_direct = joint_probs_ab(eps).values();
  double dev = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    dev = std::max(dev, std::abs(ab[i] - ab_direct[i]));
  }
  check_invariant(dev <= 1e-10,
                  "triple_distribution: Alice/Bob face deviates from the "
                  "two-party table");

  if (eve_measurement.size() == 4) {
    const std::vector<double> ae = table.marginal({0, 2}).values();
    const std::vector<double> ae_direct = alice_eve_joint(eps).values();
    dev = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      dev = std::max(dev, std::abs(ae[i] - ae_direct[i]));
    }
    check_invariant(dev <= 1e-10,
                    "triple_distribution: Alice/Eve face deviates from the "
                    "two-party table");
  }
  return table;
}

// One transmitted entangled pair: everyone's measured letter plus the
// transmission index it came from.
struct SampleRecord {
  long long index = 0;
  Letter alice = Letter::A;
  Letter bob = Letter::A;
  int eve = 0;  // index into the Eve measurement's outcome labels
};

namespace detail {

// Inverse-CDF draws from an unnormalized non-negative weight vector. One
// uniform per draw.
inline std::vector<std::size_t> sample_flat(const std::vector<double>& weights,
                                            long long n, SplitRng& rng) {
  require(n >= 0, "sample_flat: sample count must be non-negative");
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc;
  }
  require(acc > 0.0, "sample_flat: weights sum to zero");
  std::vector<std::size_t> out;
  out.reserve(std::size_t(n));
  for (long long i = 0; i < n; ++i) {
    const double u = rng.uniform01() * acc;
    out.push_back(std::size_t(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin()));
  }
  return out;
}

}  // namespace detail

inline std::vector<SampleRecord> sample_run(const JointTable& triple,
                                            long long n_pairs, SplitRng& rng) {
  require(triple.party_count() == 3,
          "sample_run: outcome table must have three parties");
  require(triple.dim(0) == 4 && triple.dim(1) == 4,
          "sample_run: Alice and Bob must each have four outcomes");
  require(triple.is_normalized(), "sample_run: table must be normalized");
  const std::size_t k = triple.dim(2);
  const std::vector<std::size_t> draws =
      detail::sample_flat(triple.values(), n_pairs, rng);
  std::vector<SampleRecord> records;
  records.reserve(std::size_t(n_pairs));
  for (long long i = 0; i < n_pairs; ++i) {
    const std::size_t f = draws[std::size_t(i)];
    records.push_back({i, letter_from_index(int(f / (4 * k))),
                       letter_from_index(int((f / k) % 4)), int(f % k)});
  }
  return records;
}

// Eve's measurement under the configured policy: the plain four-member
// family, a five-member family at a fixed weight, or whichever of the two
// is better at this noise level.
inline Povm eve_measurement_for(const ExperimentConfig& config) {
  if (config.mu_policy == "four") return eve_povm4(config.phi);
  if (config.mu_policy.rfind("five:", 0) == 0) {
    return eve_povm5(config.phi,
                     detail::parse_double(config.mu_policy.substr(5)));
  }
  if (config.mu_policy == "optimal") {
    const MuResult r = optimize_mu(config.eps, config.phi);
    return r.gain > 0.0 ? eve_povm5(config.phi, r.mu_star)
                        : eve_povm4(config.phi);
  }
  throw std::invalid_argument(
      "mu_policy must be four, five:<mu>, or optimal");
}

inline std::vector<SampleRecord> sample_run(const ExperimentConfig& config,
                                            SplitRng& rng) {
  return sample_run(
      triple_distribution(config.eps, config.phi, eve_measurement_for(config)),
      config.n_pairs, rng);
}

// ---------------------------------------------------------------------------
// Empirical information
// ---------------------------------------------------------------------------

// Plug-in mutual information of a contingency table. The estimator's
// first-order positive bias is reported alongside, never subtracted; the
// standard error comes from a nonparametric bootstrap.
struct MiEstimate {
  double bits = 0.0;
  double se = 0.0;
  double bias = 0.0;  // about (cells - 1) / (2 N ln 2)
  long long samples = 0;
};

namespace detail {

inline double plugin_mi(const std::vector<double>& cells, std::size_t rows,
                        std::size_t cols, double total) {
  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      row_sum[r] += cells[r * cols + c];
      col_sum[c] += cells[r * cols + c];
    }
  }
  double bits = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double n = cells[r * cols + c];
      if (n > 0.0) {
        bits += (n / total) * std::log2(n * total / (row_sum[r] * col_sum[c]));
      }
    }
  }
  return bits < 0.0 && bits > -scalar_tol ? 0.0 : bits;
}

}  // namespace detail

inline MiEstimate empirical_mi(const std::vector<std::vector<long long>>& counts,
                               SplitRng& rng, int resamples = 200) {
  require(!counts.empty() && !counts.front().empty(),
          "empirical_mi: counts must be non-empty");
  require(resamples >= 2, "empirical_mi: need at least two resamples");
  const std::size_t rows = counts.size();
  const std::size_t cols = counts.front().size();
  std::vector<double> cells;
  cells.reserve(rows * cols);
  long long total = 0;
  for (const std::vector<long long>& row : counts) {
    require(row.size() == cols, "empirical_mi: rows differ in length");
    for (const long long c : row) {
      require(c >= 0, "empirical_mi: counts must be non-negative");
      cells.push_back(double(c));
      total += c;
    }
  }
  require(total > 0, "empirical_mi: counts are all zero");

  MiEstimate out;
  out.samples = total;
  out.bits = detail::plugin_mi(cells, rows, cols, double(total));
  out.bias = (double(rows * cols) - 1.0) /
             (2.0 * double(total) * std::numbers::ln2);

  // Resample N observations from the empirical cell distribution per
  // replicate. Advancing the caller's generator once makes repeated calls
  // independent; replicate r then uses the derived child stream r.
  std::vector<double> cdf(cells.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    acc += cells[i];
    cdf[i] = acc;
  }
  const SplitRng replicate_base(rng.next_u64());
  double mean = 0.0;
  double m2 = 0.0;
  std::vector<double> boot(cells.size(), 0.0);
  for (int r = 0; r < resamples; ++r) {
    SplitRng child = replicate_base.split(std::uint64_t(r));
    std::fill(boot.begin(), boot.end(), 0.0);
    for (long long i = 0; i < total; ++i) {
      const double u = child.uniform01() * acc;
      boot[std::size_t(std::lower_bound(cdf.begin(), cdf.end(), u) -
                       cdf.begin())] += 1.0;
    }
    const double mi = detail::plugin_mi(boot, rows, cols, double(total));
    const double delta = mi - mean;
    mean += delta / double(r + 1);
    m2 += delta * (mi - mean);
  }
  out.se = std::sqrt(m2 / double(resamples - 1));
  return out;
}

// ---------------------------------------------------------------------------
// Mode dispatch
// ---------------------------------------------------------------------------

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> files;
  std::string message;
};

namespace detail {

inline std::vector<double> config_grid(const ExperimentConfig& config) {
  if (config.eps_grid) return grid_points(*config.eps_grid);
  return {config.eps};
}

// Fan work out over a small thread pool; results land by index, so the
// merge order never depends on scheduling. The first exception wins and is
// rethrown after the pool drains.
template <typename F>
auto parallel_map(std::size_t count, F&& f)
    -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(count);
  if (count == 0) return out;
  const unsigned workers = std::max(
      1u, std::min(std::thread::hardware_concurrency(), unsigned(count)));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  const auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = f(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

inline std::string resolve_out_path(const ExperimentConfig& config) {
  if (!config.out.empty()) return config.out;
  const char* dir = std::getenv("TETRAQKD_OUT_DIR");
  const std::string base = (dir != nullptr && *dir != '\0') ? dir : ".";
  return base + "/" + config.mode + ".csv";
}

inline std::string write_output(const ExperimentConfig& config,
                                const std::string& body, RunResult& out) {
  const std::string path = resolve_out_path(config);
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open output file '" + path + "'");
  os << "# tetraqkd " << tool_version << "\n"
     << "# mode=" << config.mode << "\n"
     << "# seed=" << config.seed << "\n"
     << "# config_hash=" << config_hash(config) << "\n";
  os << body;
  os.flush();
  require(os.good(), "failed writing output file '" + path + "'");
  out.files.push_back(path);
  return path;
}

inline void require_exact_cutoff(const ExperimentConfig& config) {
  require(config.max_iter >= 1 && config.max_iter <= 6,
          config.mode + " mode needs max_iter in 1..6");
}

inline void run_analytic(const ExperimentConfig& config, RunResult& out) {
  require_exact_cutoff(config);
  const std::vector<double> grid = config_grid(config);
  const std::vector<std::string> rows =
      parallel_map(grid.size(), [&](std::size_t i) {
        const YieldReport r = ck_yield(grid[i], config.max_iter);
        std::string row = format_double(r.eps);
        row += "," + format_double(accessible_info_ab(r.eps));
        row += "," + format_double(r.i_ab_total);
        row += "," + format_double(r.i_ae_total);
        row += "," + format_double(r.yield);
        row += "," + format_double(six_state_iab(r.eps));
        for (const double term : r.i_ab_terms) {
          row += "," + format_double(term);
        }
        for (const double term : r.i_ae_terms) {
          row += "," + format_double(term);
        }
        return row + "\n";
      });
  std::string body =
      "eps,accessible_info,i_ab_total,i_ae_total,yield,six_state_iab";
  for (int n = 1; n <= config.max_iter; ++n) {
    body += ",i_ab_" + std::to_string(n);
  }
  for (int n = 1; n <= config.max_iter; ++n) {
    body += ",i_ae_" + std::to_string(n);
  }
  body += "\n";
  for (const std::string& row : rows) body += row;
  const std::string path = write_output(config, body, out);
  out.message =
      "analytic: " + std::to_string(grid.size()) + " grid points -> " + path;
}

inline void run_simulate(const ExperimentConfig& config, RunResult& out) {
  require(!config.eps_grid, "simulate mode takes a single eps, not a grid");
  require(config.n_pairs >= 2, "simulate mode needs n_pairs >= 2");
  require(config.max_iter >= 1, "simulate mode needs max_iter >= 1");
  SplitRng rng(config.seed);
  const std::vector<IterationReport> reports = run_protocol(
      config.eps, std::size_t(config.n_pairs), config.max_iter, rng);
  const IabSeries series = i_ab_series(config.eps, config.max_iter);

  std::string body =
      "n,letters_in,pairs,bits,errors,merges,discarded,"
      "eps_est,eps_est_se,p_succ_emp,p_succ_se,p_err_emp,p_err_se,"
      "i_ab_emp,i_ab_se,eps_n,p_succ_n,p_err_n,i_ab_n\n";
  std::size_t key_bits = 0;
  for (const IterationReport& r : reports) {
    const IterationStats& s = series.terms[std::size_t(r.n - 1)];
    key_bits += r.bits;
    body += std::to_string(r.n);
    body += "," + std::to_string(r.letters_in);
    body += "," + std::to_string(r.pairs);
    body += "," + std::to_string(r.bits);
    body += "," + std::to_string(r.errors);
    body += "," + std::to_string(r.merges);
    body += "," + std::to_string(r.discarded);
    body += "," + format_double(r.eps_est);
    body += "," + format_double(r.eps_est_se);
    body += "," + format_double(r.p_succ_emp);
    body += "," + format_double(r.p_succ_se);
    body += "," + format_double(r.p_err_emp);
    body += "," + format_double(r.p_err_se);
    body += "," + format_double(r.i_ab_emp);
    body += "," + format_double(r.i_ab_se);
    body += "," + format_double(s.eps_n);
    body += "," + format_double(s.p_succ_n);
    body += "," + format_double(s.p_err_n);
    body += "," + format_double(s.i_ab_n);
    body += "\n";
  }
  const std::string path = write_output(config, body, out);
  out.message = "simulate: " + std::to_string(key_bits) + " key bits over " +
                std::to_string(reports.size()) + " iterations -> " + path;
}

inline void run_threshold(const ExperimentConfig& config, RunResult& out) {
  require_exact_cutoff(config);
  const double t = threshold(config.max_iter, config.tol);
  std::string body = "n_max,threshold,tol\n";
  body += std::to_string(config.max_iter);
  body += "," + format_double(t);
  body += "," + format_double(config.tol);
  body += "\n";
  const std::string path = write_output(config, body, out);
  char headline[128];
  std::snprintf(headline, sizeof headline,
                "threshold(n_max=%d) = %.6f (tol %g) -> ", config.max_iter, t,
                config.tol);
  out.message = headline + path;
}

inline void run_tomography(const ExperimentConfig& config, RunResult& out) {
  require(!config.eps_grid, "tomography mode takes a single eps");
  require(config.n_pairs >= 1, "tomography mode needs n_pairs >= 1");
  const JointTable exact = joint_probs_ab(config.eps);
  SplitRng rng(config.seed);
  const std::vector<std::size_t> draws =
      detail::sample_flat(exact.values(), config.n_pairs, rng);
  std::vector<double> counts(16, 0.0);
  for (const std::size_t f : draws) counts[f] += 1.0;
  std::vector<double> freq(16);
  for (std::size_t i = 0; i < 16; ++i) {
    freq[i] = counts[i] / double(config.n_pairs);
  }
  const JointTable empirical({exact.party(0), exact.party(1)},
                             std::move(freq));
  const DensityOperator recon = reconstruct_state(empirical);
  const DensityOperator target = rho_ab(config.eps);

  double max_dev = 0.0;
  std::string body = "row,col,target_re,target_im,recon_re,recon_im\n";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const Complex t = target.matrix()(r, c);
      const Complex m = recon.matrix()(r, c);
      max_dev = std::max(max_dev, std::abs(m - t));
      body += std::to_string(r);
      body += "," + std::to_string(c);
      body += "," + format_double(t.real());
      body += "," + format_double(t.imag());
      body += "," + format_double(m.real());
      body += "," + format_double(m.imag());
      body += "\n";
    }
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(recon.matrix());
  const std::string path = write_output(config, body, out);
  char headline[160];
  std::snprintf(headline, sizeof headline,
                "tomography: max entry deviation %.3e, "
                "min reconstructed eigenvalue %.3e -> ",
                max_dev, eig.eigenvalues()(0));
  out.message = headline + path;
}

inline void run_povm_check(const ExperimentConfig& config, RunResult& out) {
  std::string body = "povm,mu,completeness_dev,min_eigenvalue\n";
  double worst_dev = 0.0;
  int audited = 0;
  const auto audit = [&](const std::string& name, const std::string& mu_text,
                         const Povm& povm) {
    const auto dim = Eigen::Index(povm.dim());
    Matrix sum = Matrix::Zero(dim, dim);
    double min_eig = 0.0;
    for (std::size_t i = 0; i < povm.size(); ++i) {
      const Matrix& element = povm.element(i);
      check_invariant((element - Matrix(element.adjoint()))
                              .cwiseAbs()
                              .maxCoeff() <= 1e-12,
                      "povm-check: non-Hermitian element in " + name);
      sum += element;
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(element);
      min_eig = std::min(min_eig, eig.eigenvalues()(0));
    }
    const double dev =
        (sum - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff();
    check_invariant(dev <= 1e-10,
                    "povm-check: completeness violated for " + name);
    check_invariant(min_eig >= -1e-10,
                    "povm-check: negative element in " + name);
    worst_dev = std::max(worst_dev, dev);
    ++audited;
    body += name + "," + mu_text + "," + format_double(dev) + "," +
            format_double(min_eig) + "\n";
  };
  audit("tetra", "", tetra_povm());
  audit("eve4", "", eve_povm4(config.phi));
  for (int i = 0; i <= 10; ++i) {
    const double mu = 0.05 * double(i);
    audit("eve5", format_double(mu), eve_povm5(config.phi, mu));
  }
  const std::string path = write_output(config, body, out);
  char headline[128];
  std::snprintf(headline, sizeof headline,
                "povm-check: %d measurements audited, "
                "max completeness deviation %.3e -> ",
                audited, worst_dev);
  out.message = headline + path;
}

// Two-column eps,value curve from an external CSV. '#' comments, blank
// lines, and one optional non-numeric header row are tolerated.
struct OverlayCurve {
  std::vector<double> eps;
  std::vector<double> value;
};

inline OverlayCurve load_overlay_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open overlay CSV '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string entry = trimmed(line);
    if (entry.empty() || entry.front() == '#') continue;
    const std::size_t comma = entry.find(',');
    require(comma != std::string::npos,
            path + ":" + std::to_string(lineno) + ": expected eps,value");
    try {
      const double e = parse_double(trimmed(entry.substr(0, comma)));
      const double v = parse_double(trimmed(entry.substr(comma + 1)));
      rows.emplace_back(e, v);
    } catch (const std::invalid_argument&) {
      if (rows.empty()) continue;  // header row
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": malformed data row");
    }
  }
  require(!rows.empty(), "overlay CSV '" + path + "' has no data rows");
  std::sort(rows.begin(), rows.end());
  OverlayCurve curve;
  for (const auto& [e, v] : rows) {
    curve.eps.push_back(e);
    curve.value.push_back(v);
  }
  return curve;
}

// Linear interpolation inside the curve's range; nothing outside it.
inline std::optional<double> overlay_at(const OverlayCurve& curve, double x) {
  if (x < curve.eps.front() - 1e-12 || x > curve.eps.back() + 1e-12) {
    return std::nullopt;
  }
  const auto hi =
      std::lower_bound(curve.eps.begin(), curve.eps.end(), x);
  if (hi == curve.eps.begin()) return curve.value.front();
  if (hi == curve.eps.end()) return curve.value.back();
  const std::size_t j = std::size_t(hi - curve.eps.begin());
  const double x0 = curve.eps[j - 1];
  const double x1 = curve.eps[j];
  const double w = x1 > x0 ? (x - x0) / (x1 - x0) : 0.0;
  return (1.0 - w) * curve.value[j - 1] + w * curve.value[j];
}

inline void run_compare(const ExperimentConfig& config, RunResult& out) {
  require_exact_cutoff(config);
  std::optional<OverlayCurve> overlay;
  if (!config.overlay_sixstate_eve.empty()) {
    overlay = load_overlay_csv(config.overlay_sixstate_eve);
  }
  const std::vector<double> grid = config_grid(config);
  const std::vector<std::string> rows =
      parallel_map(grid.size(), [&](std::size_t i) {
        const YieldReport r = ck_yield(grid[i], config.max_iter);
        std::string row = format_double(r.eps);
        row += "," + format_double(r.i_ab_total);
        row += "," + format_double(r.i_ae_total);
        row += "," + format_double(r.yield);
        row += "," + format_double(six_state_iab(r.eps));
        row += ",";
        if (overlay) {
          if (const std::optional<double> v = overlay_at(*overlay, r.eps)) {
            row += format_double(*v);
          }
        }
        return row + "\n";
      });
  std::string body =
      "eps,i_ab_total,i_ae_total,yield,six_state_iab,sixstate_eve\n";
  for (const std::string& row : rows) body += row;
  const std::string path = write_output(config, body, out);
  out.message = "compare: " + std::to_string(grid.size()) +
                " grid points, " +
                (overlay ? std::to_string(overlay->eps.size()) +
                               " overlay points"
                         : std::string("no overlay")) +
                " -> " + path;
}

}  // namespace detail

// Dispatch one configured experiment. Never throws: configuration and input
// problems come back as exit code 2, violated internal numerical contracts
// as exit code 3.
inline RunResult run(const ExperimentConfig& config) {
  RunResult out;
  try {
    if (config.mode == "analytic") {
      detail::run_analytic(config, out);
    } else if (config.mode == "simulate") {
      detail::run_simulate(config, out);
    } else if (config.mode == "threshold") {
      detail::run_threshold(config, out);
    } else if (config.mode == "tomography") {
      detail::run_tomography(config, out);
    } else if (config.mode == "povm-check") {
      detail::run_povm_check(config, out);
    } else if (config.mode == "compare") {
      detail::run_compare(config, out);
    } else {
      throw std::invalid_argument("unknown mode '" + config.mode + "'");
    }
  } catch (const invariant_error& e) {
    out.exit_code = 3;
    out.message = e.what();
  } catch (const std::exception& e) {
    out.exit_code = 2;
    out.message = e.what();
  }
  return out;
}

}  // namespace tetraqkd
