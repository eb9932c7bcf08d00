// Command-line front end: run tests at a candidate beta0, invert confidence
// intervals, and execute the limit-experiment / calibrated-DGP power studies
// with reproducible seeds and machine-readable output.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "manyiv/csv.hpp"
#include "manyiv/errors.hpp"
#include "manyiv/inference.hpp"
#include "manyiv/parallel.hpp"
#include "manyiv/simulation.hpp"

namespace {

using manyiv::Interval;
using manyiv::IVDataset;
using manyiv::MuMethod;
using manyiv::SelectionConfig;
using manyiv::TestResult;
using manyiv::VarianceKind;
using ordered_json = nlohmann::ordered_json;

struct CommonOpts {
  std::string input;
  std::string output;  // empty = stdout
  double alpha = 0.05;
  std::string method = "krs";
  std::string variance = "crossfit";
  double p1 = 0.01, p2 = 1.1;
  int t_grid = 16;
  int delta_grid = 31;
  int mc_draws = 2000;
  double a_bar = 0.999;
  double blo = -0.5, bhi = 0.5;
  std::uint64_t seed = 1;
  int threads = manyiv::default_threads();
  int block_size = 256;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_input) {
  if (with_input)
    cmd->add_option("--input,-i", o.input, "dataset CSV (y, x, z1..zK, optional w1..wd)")
        ->required();
  cmd->add_option("--output,-o", o.output, "write the report here instead of stdout");
  cmd->add_option("--alpha", o.alpha, "significance level")->capture_default_str();
  cmd->add_option("--method", o.method, "mu_D proxy: pp or krs")
      ->check(CLI::IsMember({"pp", "krs"}))
      ->capture_default_str();
  cmd->add_option("--variance", o.variance, "variance family: standard or crossfit")
      ->check(CLI::IsMember({"standard", "crossfit"}))
      ->capture_default_str();
  cmd->add_option("--p1", o.p1, "lower-bound tuning constant")->capture_default_str();
  cmd->add_option("--p2", o.p2, "lower-bound tuning constant")->capture_default_str();
  cmd->add_option("--t-grid", o.t_grid, "weight grid points per axis")->capture_default_str();
  cmd->add_option("--delta-grid", o.delta_grid, "alternatives scanned over B")
      ->capture_default_str();
  cmd->add_option("--R", o.mc_draws, "Monte Carlo draws for critical values")
      ->capture_default_str();
  cmd->add_option("--abar", o.a_bar, "upper bound on a1 + a2")->capture_default_str();
  cmd->add_option("--blo", o.blo, "parameter space lower end")->capture_default_str();
  cmd->add_option("--bhi", o.bhi, "parameter space upper end")->capture_default_str();
  cmd->add_option("--seed", o.seed, "master RNG seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "worker cap (default: available parallelism)");
  cmd->add_option("--block-size", o.block_size, "rows per hat-matrix sweep block")
      ->capture_default_str();
}

SelectionConfig selection_config(const CommonOpts& o) {
  SelectionConfig cfg;
  cfg.p1 = o.p1;
  cfg.p2 = o.p2;
  cfg.t_grid = o.t_grid;
  cfg.delta_grid_size = o.delta_grid;
  cfg.mc.draws = o.mc_draws;
  cfg.mc.seed = o.seed;
  cfg.a_bar = o.a_bar;
  cfg.b_space = Interval{o.blo, o.bhi};
  cfg.validate();
  return cfg;
}

VarianceKind variance_kind(const CommonOpts& o) {
  return o.variance == "standard" ? VarianceKind::standard : VarianceKind::crossfit;
}

MuMethod mu_method(const CommonOpts& o) {
  return o.method == "pp" ? MuMethod::pp : MuMethod::krs;
}

void emit(const CommonOpts& o, const std::string& text) {
  if (o.output.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(o.output, std::ios::binary);
  if (!f) throw manyiv::DataError("cannot write '" + o.output + "'");
  f << text;
}

ordered_json result_json(const TestResult& r) {
  ordered_json j;
  j["test"] = r.test_name;
  j["statistic"] = r.statistic;
  j["critical_value"] = r.critical_value;
  j["reject"] = r.reject;
  j["alpha"] = r.alpha;
  if (r.weights) {
    j["weights"] = ordered_json{{"a1", r.weights->a1}, {"a2", r.weights->a2}};
  }
  if (!r.branch.empty()) j["branch"] = r.branch;
  ordered_json diag;
  for (const auto& [k, v] : r.diagnostics) diag[k] = v;
  j["diagnostics"] = std::move(diag);
  return j;
}

int run_test_cmd(const CommonOpts& o, double beta0) {
  const IVDataset loaded = manyiv::load_dataset_csv(o.input);
  const Eigen::Index d = loaded.num_controls();
  const IVDataset data = manyiv::partial_out(loaded);
  const manyiv::ProjectionContext ctx =
      manyiv::build_projection(data.Z, o.block_size);
  const SelectionConfig cfg = selection_config(o);
  const VarianceKind vk = variance_kind(o);

  ordered_json report;
  report["schema_version"] = 1;
  report["command"] = "test";
  report["input"] = o.input;
  report["seed"] = o.seed;
  report["alpha"] = o.alpha;
  report["beta0"] = beta0;
  report["method"] = o.method;
  report["variance"] = o.variance;
  report["b_space"] = ordered_json::array({o.blo, o.bhi});
  report["dataset"] = ordered_json{{"n", data.n()},
                                   {"K", data.num_instruments()},
                                   {"controls_partialled", d}};
  ordered_json results;
  results["ar"] = result_json(manyiv::simple_test(manyiv::SimpleTestKind::ar, ctx,
                                                  data, beta0, o.alpha, vk, o.threads));
  results["lm"] = result_json(manyiv::simple_test(manyiv::SimpleTestKind::lm, ctx,
                                                  data, beta0, o.alpha, vk, o.threads));
  results["lm_star"] = result_json(manyiv::simple_test(
      manyiv::SimpleTestKind::lm_star, ctx, data, beta0, o.alpha, vk, o.threads));
  results["clc"] = result_json(manyiv::clc_test(ctx, data, beta0, o.alpha,
                                                mu_method(o), vk, cfg, o.threads));
  results["jive_wald"] =
      result_json(manyiv::jive_wald(ctx, data, beta0, o.alpha, vk, o.threads));
  if (o.alpha == 0.05)
    results["two_step"] =
        result_json(manyiv::two_step_test(ctx, data, beta0, 0.05, vk, o.threads));
  report["results"] = std::move(results);
  emit(o, report.dump(2) + "\n");
  return 0;
}

int run_ci_cmd(const CommonOpts& o, const std::string& test, int grid_n,
               bool force_accept, const std::string& grid_out) {
  const IVDataset loaded = manyiv::load_dataset_csv(o.input);
  const IVDataset data = manyiv::partial_out(loaded);
  const manyiv::ProjectionContext ctx =
      manyiv::build_projection(data.Z, o.block_size);
  const SelectionConfig cfg = selection_config(o);
  const VarianceKind vk = variance_kind(o);
  const Interval B{o.blo, o.bhi};

  auto point_test = [&](double beta0, std::uint64_t point_seed) -> TestResult {
    if (force_accept) {
      TestResult t;
      t.test_name = "force_accept";
      t.alpha = o.alpha;
      t.reject = false;
      return t;
    }
    if (test == "ar")
      return manyiv::simple_test(manyiv::SimpleTestKind::ar, ctx, data, beta0, o.alpha, vk);
    if (test == "ar-two-sided")
      return manyiv::ar_two_sided_test(ctx, data, beta0, o.alpha, vk);
    if (test == "lm")
      return manyiv::simple_test(manyiv::SimpleTestKind::lm, ctx, data, beta0, o.alpha, vk);
    if (test == "lm_star")
      return manyiv::simple_test(manyiv::SimpleTestKind::lm_star, ctx, data, beta0, o.alpha, vk);
    if (test == "jive")
      return manyiv::jive_wald(ctx, data, beta0, o.alpha, vk);
    if (test == "two-step")
      return manyiv::two_step_test(ctx, data, beta0, o.alpha, vk);
    SelectionConfig point_cfg = cfg;
    point_cfg.mc.seed = point_seed;
    return manyiv::clc_test(ctx, data, beta0, o.alpha,
                            test == "clc-pp" ? MuMethod::pp : MuMethod::krs, vk,
                            point_cfg);
  };

  std::vector<int> decisions;
  const manyiv::ConfidenceInterval ci = manyiv::confidence_interval(
      point_test, B, grid_n, o.seed, o.threads, &decisions);

  ordered_json report;
  report["schema_version"] = 1;
  report["command"] = "ci";
  report["input"] = o.input;
  report["test"] = test;
  report["alpha"] = o.alpha;
  report["b_space"] = ordered_json::array({o.blo, o.bhi});
  report["grid_n"] = ci.grid_n;
  report["seed"] = o.seed;
  if (ci.empty) {
    report["empty"] = true;
    report["lower"] = nullptr;
    report["upper"] = nullptr;
  } else {
    report["empty"] = false;
    report["lower"] = ci.lower;
    report["upper"] = ci.upper;
  }
  report["disconnected"] = ci.disconnected;
  report["accepted_count"] = ci.accepted_count;
  report["error_count"] = ci.error_count;
  emit(o, report.dump(2) + "\n");

  if (!grid_out.empty()) {
    std::string csv = "beta0,decision\n";
    for (int j = 0; j < grid_n; ++j) {
      const double b = B.lo + (B.hi - B.lo) * j / (grid_n - 1);
      csv += manyiv::format_double(b) + "," +
             std::to_string(decisions[static_cast<std::size_t>(j)]) + "\n";
    }
    std::ofstream f(grid_out, std::ios::binary);
    if (!f) throw manyiv::DataError("cannot write '" + grid_out + "'");
    f << csv;
  }
  return 0;
}

std::string panel_filename(const std::string& base, double rho, double conc) {
  std::string stem = base;
  const auto dot = stem.rfind(".csv");
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return stem + "_rho" + manyiv::format_double(rho) + "_C" +
         manyiv::format_double(conc) + ".csv";
}

int run_power_limit(const CommonOpts& o, std::vector<double> rhos,
                    std::vector<double> concs, int reps, int beta_points,
                    bool figure_layout, double blim) {
  if (reps < 1) throw manyiv::DataError("power-limit: need reps >= 1");
  if ((rhos.size() > 1 || concs.size() > 1) && !figure_layout)
    throw manyiv::DataError(
        "power-limit: multiple (rho, C) pairs need --figure-layout");
  for (double rho : rhos) {
    for (double conc : concs) {
      manyiv::LimitSimConfig cfg;
      cfg.rho = rho;
      cfg.conc = conc;
      if (blim > 0) cfg.b_space = Interval{-blim, blim};
      cfg.beta_points = beta_points;
      cfg.reps = reps;
      cfg.alpha = o.alpha;
      cfg.seed = o.seed;
      cfg.threads = o.threads;
      cfg.sel = selection_config(o);
      const std::string csv = manyiv::power_table_csv(manyiv::run_limit_power_study(cfg));
      if (figure_layout) {
        const std::string path =
            panel_filename(o.output.empty() ? "power_limit.csv" : o.output, rho, conc);
        std::ofstream f(path, std::ios::binary);
        if (!f) throw manyiv::DataError("cannot write '" + path + "'");
        f << csv;
        std::cout << path << "\n";
      } else {
        emit(o, csv);
      }
    }
  }
  return 0;
}

int run_power_dgp(const CommonOpts& o, const std::string& calibration,
                  int synthetic_n, int synthetic_k, std::uint64_t cal_seed,
                  int variant, double kappa1, double kappa2, double prune,
                  double beta0, int reps, int beta_points) {
  if (reps < 1) throw manyiv::DataError("power-dgp: need reps >= 1");
  manyiv::CalibratedDgpConfig cfg;
  if (!calibration.empty()) {
    cfg.cal = manyiv::load_calibration_csv(calibration);
  } else {
    cfg.cal = manyiv::synthetic_calibration(synthetic_n, synthetic_k, cal_seed);
  }
  cfg.variant = variant;
  cfg.kappa1 = kappa1;
  cfg.kappa2 = kappa2;
  cfg.prune_threshold = prune;
  cfg.beta0 = beta0;
  cfg.b_space = Interval{o.blo, o.bhi};
  cfg.reps = reps;
  cfg.alpha = o.alpha;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.sel = selection_config(o);
  for (int i = 0; i < beta_points; ++i)
    cfg.beta_grid.push_back(beta_points == 1
                                ? 0.5 * (o.blo + o.bhi)
                                : o.blo + (o.bhi - o.blo) * i / (beta_points - 1));
  const std::string csv = manyiv::power_table_csv(manyiv::run_dgp_power_study(cfg));
  emit(o, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-identification-robust tests and confidence intervals for "
               "linear IV with many instruments"};
  app.require_subcommand(1);

  CommonOpts o;

  auto* test_cmd = app.add_subcommand("test", "run the tests at a candidate beta0");
  double beta0 = 0.0;
  add_common(test_cmd, o, true);
  test_cmd->add_option("--beta0", beta0, "null value of beta")->required();

  auto* ci_cmd = app.add_subcommand("ci", "invert a test over a grid of beta0");
  std::string ci_test = "clc-krs";
  int grid_n = 10000;
  bool force_accept = false;
  std::string grid_out;
  add_common(ci_cmd, o, true);
  ci_cmd->add_option("--test", ci_test, "test to invert")
      ->check(CLI::IsMember({"ar", "ar-two-sided", "lm", "lm_star", "clc-pp",
                             "clc-krs", "two-step", "jive"}))
      ->capture_default_str();
  ci_cmd->add_option("--grid-n", grid_n, "grid points over B")->capture_default_str();
  ci_cmd->add_flag("--force-accept", force_accept,
                   "debug: accept every grid point");
  ci_cmd->add_option("--grid-out", grid_out, "also write per-point decisions CSV");

  auto* pl_cmd = app.add_subcommand("power-limit", "limit-experiment power study");
  std::vector<double> rhos{0.4};
  std::vector<double> concs{6.0};
  int reps = 5000;
  int beta_points = 31;
  bool figure_layout = false;
  add_common(pl_cmd, o, false);
  pl_cmd->add_option("--rho", rhos, "endogeneity correlation(s)")->capture_default_str();
  pl_cmd->add_option("--conc", concs, "concentration parameter(s) C")->capture_default_str();
  pl_cmd->add_option("--reps", reps, "replications per beta")->capture_default_str();
  pl_cmd->add_option("--beta-points", beta_points, "beta grid size")->capture_default_str();
  pl_cmd->add_flag("--figure-layout", figure_layout,
                   "one CSV per (rho, C) pair, paper panel structure");
  double blim = 0.0;
  pl_cmd->add_option("--blim", blim,
                     "half-width of the beta space (0 = 6/C convention)")
      ->capture_default_str();

  auto* pd_cmd = app.add_subcommand("power-dgp", "calibrated-DGP power study");
  std::string calibration;
  int synthetic_n = 1600, synthetic_k = 40;
  std::uint64_t cal_seed = 7;
  int variant = 1;
  double kappa1 = 1.7, kappa2 = 0.1, prune = 5.0, dgp_beta0 = 0.1;
  int dgp_reps = 1000, dgp_beta_points = 31;
  add_common(pd_cmd, o, false);
  pd_cmd->add_option("--calibration", calibration, "calibration CSV (sbar, omega, z1..zK)");
  pd_cmd->add_option("--synthetic-n", synthetic_n, "rows of the synthetic calibration")
      ->capture_default_str();
  pd_cmd->add_option("--synthetic-k", synthetic_k, "instruments of the synthetic calibration")
      ->capture_default_str();
  pd_cmd->add_option("--cal-seed", cal_seed, "synthetic calibration seed")->capture_default_str();
  pd_cmd->add_option("--variant", variant, "DGP variant: 1 or 2")->capture_default_str();
  pd_cmd->add_option("--kappa1", kappa1, "first-stage noise scale (variant 1)")
      ->capture_default_str();
  pd_cmd->add_option("--kappa2", kappa2, "outcome noise mix")->capture_default_str();
  pd_cmd->add_option("--prune", prune, "minimum instrument column sum")->capture_default_str();
  pd_cmd->add_option("--beta0", dgp_beta0, "null value tested")->capture_default_str();
  pd_cmd->add_option("--reps", dgp_reps, "replications per beta")->capture_default_str();
  pd_cmd->add_option("--beta-points", dgp_beta_points, "beta grid size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*test_cmd) return run_test_cmd(o, beta0);
    if (*ci_cmd) return run_ci_cmd(o, ci_test, grid_n, force_accept, grid_out);
    if (*pl_cmd)
      return run_power_limit(o, rhos, concs, reps, beta_points, figure_layout, blim);
    if (*pd_cmd)
      return run_power_dgp(o, calibration, synthetic_n, synthetic_k, cal_seed,
                           variant, kappa1, kappa2, prune, dgp_beta0, dgp_reps,
                           dgp_beta_points);
  } catch (const manyiv::NumericalError& e) {
    std::cerr << "numerical degeneracy: " << e.what() << "\n";
    return 3;
  } catch (const manyiv::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
