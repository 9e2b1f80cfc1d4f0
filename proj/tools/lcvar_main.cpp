// lcvar command line: simulate, granger, estimate-cov, estimate-vem, check, bench.
// Exit codes: 0 success, 1 validation error, 2 numeric failure.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>

#include "lcvar/csv.hpp"
#include "lcvar/experiment.hpp"
#include "lcvar/granger.hpp"
#include "lcvar/json_io.hpp"
#include "lcvar/model_check.hpp"
#include "lcvar/var_core.hpp"
#include "lcvar/vem.hpp"

namespace {

using lcvar::Json;

void emit(const Json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    lcvar::write_json_file(out_path, j);
  }
}

int run_simulate(const std::string& config_path, int length, std::uint64_t seed,
                 const std::string& out_path, bool full, bool gaussian) {
  const Json j = lcvar::read_json_file(config_path);
  const lcvar::VarParams params = lcvar::var_params_from_json(j);
  lcvar::TimeSeriesSample w;
  if (gaussian || !j.contains("noise")) {
    w = lcvar::simulate(params, length, seed);
  } else {
    w = lcvar::simulate(params, lcvar::noise_from_json(j), length, seed);
  }
  const lcvar::TimeSeriesSample out =
      full ? w : lcvar::observed_part(w, params.k_x);
  if (out_path.empty()) {
    lcvar::write_csv(std::cout, out);
  } else {
    lcvar::write_csv_file(out_path, out);
  }
  return 0;
}

int run_granger(const std::string& csv_path, const std::string& out_path) {
  const auto x = lcvar::ingest_csv(csv_path, /*center=*/true);
  const auto est = lcvar::practical_granger(lcvar::sample_autocov(x, 1));
  Json j;
  j["method"] = "granger";
  j["B_pG"] = lcvar::matrix_to_json(est.b_pg);
  j["gram_condition"] = est.gram_condition;
  emit(j, out_path);
  return 0;
}

int run_estimate_cov(const std::string& csv_path, const std::string& out_path) {
  const auto x = lcvar::ingest_csv(csv_path, /*center=*/true);
  const auto report = lcvar::estimate_cov(x);
  emit(lcvar::to_json(report), out_path);
  return report.error_stage.empty() ? 0 : 2;
}

int run_estimate_vem(const std::string& csv_path, int k_z, int components, int restarts,
                     int max_iters, double tol, std::uint64_t seed, bool verbose,
                     const std::string& out_path) {
  const auto x = lcvar::ingest_csv(csv_path, /*center=*/true);
  lcvar::VemConfig config;
  config.k_z = k_z;
  config.components = components;
  config.restarts = restarts;
  config.max_iters = max_iters;
  config.tol = tol;
  config.seed = seed;
  config.verbose = verbose;
  const lcvar::FitResult result = lcvar::fit(x, config);
  Json j = lcvar::to_json(result.report);
  j["theta"] = lcvar::to_json(result.params);
  Json jt = Json::array();
  for (const auto& t : result.traces) jt.push_back(lcvar::to_json(t));
  j["traces"] = std::move(jt);
  emit(j, out_path);
  return 0;
}

int run_check(const std::string& csv_path, double alpha, int lag_budget,
              std::uint64_t seed, const std::string& out_path) {
  const auto x = lcvar::ingest_csv(csv_path, /*center=*/true);
  const auto report = lcvar::model_check(x, alpha, lag_budget, seed);

  std::cout << "model check (alpha = " << alpha << ", J = " << lag_budget << ")\n";
  std::cout << "  channel   KS stat     p-value   verdict\n";
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    const auto& ks = report.ks[i];
    std::printf("  %-9zu %-10.4f %-9.4f %s\n", i + 1, ks.statistic, ks.p_value,
                ks.p_value < alpha ? "non-Gaussian" : "Gaussian not rejected");
  }
  if (report.ansatz_found) {
    std::printf("  independence: stat %.3f, dof %d, p %.4f -> %s\n",
                report.independence.statistic, report.independence.dof,
                report.independence.p_value,
                report.independence_rejected ? "REJECTED" : "not rejected");
  } else {
    std::cout << "  independence: ansatz not found -> REJECTED\n";
  }
  std::cout << "  overall: " << (report.pass ? "pass" : "fail") << "\n";
  if (!out_path.empty()) emit(lcvar::to_json(report), out_path);
  return 0;
}

int run_bench(const std::string& config_path, const std::string& scenario, bool full,
              std::uint64_t seed, bool seed_set, const std::string& out_prefix) {
  lcvar::ExperimentConfig config;
  if (!config_path.empty()) {
    config = lcvar::ExperimentConfig::from_json(lcvar::read_json_file(config_path));
  } else if (scenario == "fig1") {
    config = lcvar::ExperimentConfig::fig1(full);
  } else if (scenario == "fig2") {
    config = lcvar::ExperimentConfig::fig2();
  } else {
    throw lcvar::Error(lcvar::ErrorKind::validation,
                       "bench needs --config or --scenario fig1|fig2");
  }
  if (seed_set) config.master_seed = seed;
  const auto results = lcvar::run_experiment(config);
  const std::string prefix = out_prefix.empty() ? "bench" : out_prefix;
  {
    std::ofstream csv(prefix + "_results.csv", std::ios::binary);
    if (!csv) {
      throw lcvar::Error(lcvar::ErrorKind::validation,
                         "cannot write " + prefix + "_results.csv");
    }
    csv << results.csv();
  }
  lcvar::write_json_file(prefix + "_summary.json", results.summary);
  std::cout << results.summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal structure estimation for partially observed VAR processes"};
  app.require_subcommand(1);

  std::string out_path;
  std::uint64_t seed = 0;

  auto* sim = app.add_subcommand("simulate", "simulate a VAR sample to CSV");
  std::string sim_config;
  int sim_length = 1000;
  bool sim_full = false, sim_gaussian = false;
  sim->add_option("--config", sim_config, "system JSON (blocks + optional noise)")
      ->required();
  sim->add_option("--length", sim_length, "sample length");
  sim->add_option("--seed", seed, "rng seed");
  sim->add_option("--out", out_path, "output CSV path (default stdout)");
  sim->add_flag("--full", sim_full, "emit all channels, not just the observed part");
  sim->add_flag("--gaussian", sim_gaussian, "force Gaussian noise from sigma");

  auto* gr = app.add_subcommand("granger", "practical Granger estimate from CSV");
  std::string gr_csv;
  gr->add_option("csv", gr_csv, "input CSV")->required();
  gr->add_option("--out", out_path, "output JSON path");

  auto* cov = app.add_subcommand("estimate-cov", "covariance-structure estimate (Algorithm 2)");
  std::string cov_csv;
  cov->add_option("csv", cov_csv, "input CSV")->required();
  cov->add_option("--out", out_path, "output JSON path");

  auto* vem = app.add_subcommand("estimate-vem", "variational EM estimate (Algorithm 1)");
  std::string vem_csv;
  int vem_kz = 1, vem_components = 2, vem_restarts = 5, vem_iters = 500;
  double vem_tol = 1e-6;
  bool vem_verbose = false;
  vem->add_option("csv", vem_csv, "input CSV")->required();
  vem->add_option("--k-z", vem_kz, "hidden channel count");
  vem->add_option("--components", vem_components, "mixture components per channel");
  vem->add_option("--restarts", vem_restarts, "independent restarts");
  vem->add_option("--max-iters", vem_iters, "EM iteration cap");
  vem->add_option("--tol", vem_tol, "relative ELBO tolerance");
  vem->add_option("--seed", seed, "rng seed");
  vem->add_flag("--verbose", vem_verbose, "log one line per iteration to stderr");
  vem->add_option("--out", out_path, "output JSON path");

  auto* chk = app.add_subcommand("check", "residual-independence and KS model checks");
  std::string chk_csv;
  double chk_alpha = 0.05;
  int chk_lag = 2;
  chk->add_option("csv", chk_csv, "input CSV")->required();
  chk->add_option("--alpha", chk_alpha, "significance level");
  chk->add_option("--lags", chk_lag, "lag budget J");
  chk->add_option("--seed", seed, "rng seed for the bootstrap");
  chk->add_option("--out", out_path, "output JSON path");

  auto* bench = app.add_subcommand("bench", "seeded experiment sweeps");
  std::string bench_config, bench_scenario;
  bool bench_full = false;
  bench->add_option("--config", bench_config, "experiment config JSON");
  bench->add_option("--scenario", bench_scenario, "fig1 or fig2");
  bench->add_flag("--full", bench_full, "extend fig1 lengths to 1e6/1e7");
  auto* bench_seed_opt = bench->add_option("--seed", seed, "master seed");
  bench->add_option("--out", out_path, "output prefix (default 'bench')");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return run_simulate(sim_config, sim_length, seed, out_path, sim_full, sim_gaussian);
    }
    if (gr->parsed()) return run_granger(gr_csv, out_path);
    if (cov->parsed()) return run_estimate_cov(cov_csv, out_path);
    if (vem->parsed()) {
      return run_estimate_vem(vem_csv, vem_kz, vem_components, vem_restarts, vem_iters,
                              vem_tol, seed, vem_verbose, out_path);
    }
    if (chk->parsed()) return run_check(chk_csv, chk_alpha, chk_lag, seed, out_path);
    if (bench->parsed()) {
      return run_bench(bench_config, bench_scenario, bench_full, seed,
                       bench_seed_opt->count() > 0, out_path);
    }
  } catch (const lcvar::Error& err) {
    std::cerr << "lcvar: " << err.what() << "\n";
    return lcvar::is_validation_kind(err.kind()) ? 1 : 2;
  } catch (const std::exception& err) {
    std::cerr << "lcvar: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
