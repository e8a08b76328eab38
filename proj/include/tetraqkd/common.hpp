#pragma once

// Shared numeric conventions, error types, and small helpers used by every
// tetraqkd header.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tetraqkd {

inline constexpr char version_string[] = "0.1.0";

// Tolerance for operator-level identities (POVM completeness, partial-trace
// contracts, Born-rule consistency checks).
inline constexpr double op_tol = 1e-10;

// Tolerance for scalar identities (probability normalizations, closed-form
// equalities between independent evaluation routes).
inline constexpr double scalar_tol = 1e-12;

// Thrown when an internal numerical contract is breached. This signals an
// implementation bug, never bad user input; the CLI maps it to exit code 3.
struct invariant_error : std::logic_error {
  explicit invariant_error(const std::string& what) : std::logic_error(what) {}
};

// Thrown for malformed configuration (CLI flags or config file contents).
// The CLI maps it to exit code 2.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Argument validation for public entry points.
inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Internal contract validation. See invariant_error.
inline void check_invariant(bool ok, const std::string& what) {
  if (!ok) throw invariant_error(what);
}

// x * log2(x) with the convention 0 * log 0 = 0.
inline double xlog2(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

// w * log2(x) with the convention that the whole term is 0 when w is 0.
// In every use site w and x vanish together, so the guard implements the
// standard continuous extension.
inline double wlog2(double w, double x) {
  return w != 0.0 ? w * std::log2(x) : 0.0;
}

}  // namespace tetraqkd
