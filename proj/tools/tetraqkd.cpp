// Command-line front end for the Singapore protocol toolkit.
//
// Grammar:
//   tetraqkd <mode> [options]
//   tetraqkd --dump-config [options]
//
// Configuration precedence: command-line flags override entries from a
// --config file, which override built-in defaults. Exit codes: 0 on success,
// 2 on any configuration or input problem, 3 when an internal numerical
// invariant is violated mid-run.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tetraqkd/harness.hpp"

namespace {

const char* const kFooter = R"(Modes and their CSV bodies:
  analytic    Exact per-epsilon key-rate analytics over a single point or a
              grid. Columns: eps,accessible_info,i_ab_total,i_ae_total,yield,
              six_state_iab, then i_ab_1..i_ab_K and i_ae_1..i_ae_K for
              K = --max-iter.
  simulate    Monte Carlo protocol run with per-iteration empirical estimates
              next to their exact counterparts. Columns: n,letters_in,pairs,
              bits,errors,merges,discarded,eps_est,eps_est_se,p_succ_emp,
              p_succ_se,p_err_emp,p_err_se,i_ab_emp,i_ab_se,eps_n,p_succ_n,
              p_err_n,i_ab_n.
  threshold   Bisection for the epsilon where the key yield crosses zero at
              the configured iteration cutoff. Columns: n_max,threshold,tol.
  tomography  Samples the two-party outcome table and reconstructs the state
              from the empirical frequencies. Columns: row,col,target_re,
              target_im,recon_re,recon_im.
  povm-check  Audits every measurement family for Hermiticity, completeness,
              and positivity. Columns: povm,mu,completeness_dev,
              min_eigenvalue.
  compare     Singapore-protocol curves over an epsilon grid, with an optional
              external six-state eavesdropper overlay interpolated onto the
              grid. Columns: eps,i_ab_total,i_ae_total,yield,six_state_iab,
              sixstate_eve.

Every output file starts with a comment block recording the tool version, the
seed, and a hash of the effective configuration; identical configurations
produce byte-identical files. Config files are flat key=value lines ('#'
comments and blank lines are skipped); keys match --dump-config output. The
TETRAQKD_OUT_DIR environment variable sets the default output directory when
--out is not given.)";

// Apply one optional command-line value through the shared config parser so
// flag values and file values go through identical validation.
void apply(tetraqkd::ExperimentConfig& config, const char* key,
           const std::optional<std::string>& value) {
  if (value) tetraqkd::set_config_field(config, key, *value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulator and exact analytics for the Singapore quantum key "
      "distribution protocol."};
  app.name("tetraqkd");
  app.footer(kFooter);
  app.get_formatter()->column_width(30);

  std::optional<std::string> mode;
  std::optional<std::string> config_path;
  std::optional<std::string> eps;
  std::optional<std::string> eps_grid;
  std::optional<std::string> pairs;
  std::optional<std::string> max_iter;
  std::optional<std::string> seed;
  std::optional<std::string> phi;
  std::optional<std::string> tol;
  std::optional<std::string> mu_policy;
  std::optional<std::string> out;
  std::optional<std::string> overlay;
  bool dump = false;

  app.add_option("mode", mode,
                 "analytic | simulate | threshold | tomography | povm-check "
                 "| compare");
  app.add_option("--config", config_path,
                 "Load defaults from a flat key=value file");
  CLI::Option* eps_opt =
      app.add_option("--eps", eps, "Depolarizing noise parameter in [0, 2/3]");
  app.add_option("--eps-grid", eps_grid,
                 "Noise grid start:stop:step (points run concurrently)")
      ->excludes(eps_opt);
  app.add_option("--pairs", pairs, "Qubit pairs to draw in sampling modes");
  app.add_option("--max-iter", max_iter,
                 "Iteration cutoff for the key-extraction series (1..6)");
  app.add_option("--seed", seed, "Root seed for the splittable generator");
  app.add_option("--phi", phi, "Free phase of the four-qubit purification");
  app.add_option("--tol", tol, "Bisection tolerance for threshold mode");
  app.add_option("--mu-policy", mu_policy,
                 "Eavesdropper measurement: four | five:<mu> | optimal");
  app.add_option("--out", out, "Output CSV path (default <mode>.csv)");
  app.add_option("--overlay-sixstate-eve", overlay,
                 "CSV of an external six-state eavesdropper curve to overlay "
                 "in compare mode");
  app.add_flag("--dump-config", dump,
               "Print the effective configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  tetraqkd::ExperimentConfig config;
  try {
    if (config_path) config = tetraqkd::load_config_file(*config_path);
    apply(config, "mode", mode);
    apply(config, "eps", eps);
    apply(config, "eps_grid", eps_grid);
    apply(config, "n_pairs", pairs);
    apply(config, "max_iter", max_iter);
    apply(config, "seed", seed);
    apply(config, "phi", phi);
    apply(config, "tol", tol);
    apply(config, "mu_policy", mu_policy);
    apply(config, "out", out);
    apply(config, "overlay_sixstate_eve", overlay);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tetraqkd: %s\n", e.what());
    return 2;
  }

  if (dump) {
    std::fputs(tetraqkd::dump_config(config).c_str(), stdout);
    return 0;
  }

  if (!mode && !config_path) {
    std::fprintf(stderr,
                 "tetraqkd: no mode given; run 'tetraqkd --help' for usage\n");
    return 2;
  }

  const tetraqkd::RunResult result = tetraqkd::run(config);
  if (!result.message.empty()) {
    std::fprintf(result.exit_code == 0 ? stdout : stderr, "%s\n",
                 result.message.c_str());
  }
  for (const std::string& file : result.files) {
    std::fprintf(stdout, "wrote %s\n", file.c_str());
  }
  return result.exit_code;
}
