#include "lcvar/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "lcvar/cov_estimator.hpp"
#include "lcvar/granger.hpp"
#include "lcvar/metrics.hpp"
#include "lcvar/var_core.hpp"

namespace lcvar {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t length, std::uint64_t run) {
  return splitmix64(splitmix64(splitmix64(master) ^ length) ^ run);
}

void ExperimentConfig::validate() const {
  if (runs < 1) {
    throw Error(ErrorKind::validation, "runs must be >= 1");
  }
  if (lengths.empty()) {
    throw Error(ErrorKind::validation, "at least one sample length required");
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) {
      throw Error(ErrorKind::validation, "lengths must be positive");
    }
    if (i > 0 && lengths[i] <= lengths[i - 1]) {
      throw Error(ErrorKind::validation, "lengths must be strictly increasing");
    }
  }
  if (k_x < 1 || k_z < 0 || k_z > k_x) {
    throw Error(ErrorKind::validation, "need 1 <= k_x and 0 <= k_z <= k_x");
  }
  if (estimators.empty()) {
    throw Error(ErrorKind::validation, "at least one estimator required");
  }
  for (const auto& e : estimators) {
    if (e != "granger" && e != "cov" && e != "vem") {
      throw Error(ErrorKind::validation, "unknown estimator '" + e + "'");
    }
  }
  if (vem_restarts < 1 || vem_max_iters < 1 || vem_components < 1) {
    throw Error(ErrorKind::validation, "VEM settings must be positive");
  }
}

ExperimentConfig ExperimentConfig::fig1(bool full) {
  ExperimentConfig c;
  c.scenario = Scenario::fig1;
  c.k_x = 1;
  c.k_z = 1;
  c.lengths = {100, 1000, 10000, 100000};
  if (full) {
    c.lengths.push_back(1000000);
    c.lengths.push_back(10000000);
  }
  c.runs = 20;
  c.mixture_noise = false;
  c.d_zero = true;
  c.unit_sigma = true;
  c.estimators = {"granger", "cov"};
  return c;
}

ExperimentConfig ExperimentConfig::fig2() {
  ExperimentConfig c;
  c.scenario = Scenario::fig2;
  c.k_x = 2;
  c.k_z = 1;
  c.lengths = {100, 500, 1000, 5000};
  c.runs = 20;
  c.mixture_noise = true;
  c.d_zero = false;
  c.unit_sigma = true;
  c.estimators = {"granger", "vem"};
  return c;
}

namespace {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::fig1: return "fig1";
    case Scenario::fig2: return "fig2";
    case Scenario::custom: return "custom";
  }
  return "custom";
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResults results;
  results.scenario = scenario_name(config.scenario);

  for (int length : config.lengths) {
    for (int run = 0; run < config.runs; ++run) {
      const std::uint64_t seed =
          derive_seed(config.master_seed, static_cast<std::uint64_t>(length),
                      static_cast<std::uint64_t>(run));
      SampleConstraints constraints;
      constraints.d_zero = config.d_zero;
      constraints.diagonal_sigma = true;
      VarParams system = sample_stable_var(config.k_x, config.k_z, constraints, seed);
      if (config.unit_sigma) {
        system.sigma = Eigen::MatrixXd::Identity(system.k(), system.k());
      }
      const Eigen::MatrixXd b_true = system.b();

      TimeSeriesSample w =
          config.mixture_noise
              ? simulate(system, super_gaussian_mixture(system.k()), length,
                         splitmix64(seed))
              : simulate(system, length, splitmix64(seed));
      TimeSeriesSample x = observed_part(w, config.k_x);

      for (const auto& method : config.estimators) {
        RunRow row;
        row.length = length;
        row.run = run;
        row.method = method;
        const auto start = std::chrono::steady_clock::now();
        try {
          if (method == "granger") {
            const GrangerEstimate g = practical_granger(sample_autocov(x, 1));
            row.fro_error = (g.b_pg - b_true).norm();
          } else if (method == "cov") {
            const EstimationReport rep = estimate_cov(x);
            if (!rep.error_stage.empty()) {
              row.status = "error:" + rep.error_stage;
            } else if (rep.candidates.empty()) {
              row.status = "error:no_candidates";
            } else {
              row.fro_error = (best_candidate(rep.candidates, b_true).second - b_true).norm();
            }
          } else {
            VemConfig vc;
            vc.k_z = config.k_z;
            vc.components = config.vem_components;
            vc.max_iters = config.vem_max_iters;
            vc.tol = config.vem_tol;
            vc.restarts = config.vem_restarts;
            vc.seed = splitmix64(seed ^ 0x5eedull);
            const FitResult fr = fit(x, vc);
            row.fro_error = (*fr.report.estimate - b_true).norm();
          }
          if (row.status.empty()) row.status = "ok";
        } catch (const Error& err) {
          row.status = std::string("error:") + error_kind_name(err.kind());
          row.fro_error = std::numeric_limits<double>::quiet_NaN();
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
        results.rows.push_back(std::move(row));
      }
    }
  }

  std::sort(results.rows.begin(), results.rows.end(), [](const RunRow& a, const RunRow& b) {
    if (a.length != b.length) return a.length < b.length;
    if (a.run != b.run) return a.run < b.run;
    return a.method < b.method;
  });

  // Aggregate RMSE = sqrt(mean over ok runs of squared Frobenius error).
  Json summary;
  summary["scenario"] = results.scenario;
  summary["rmse_definition"] = "sqrt(mean over runs of squared Frobenius deviation)";
  Json per_length = Json::array();
  for (int length : config.lengths) {
    Json entry;
    entry["length"] = length;
    for (const auto& method : config.estimators) {
      double acc = 0.0;
      int n = 0, failures = 0;
      for (const auto& row : results.rows) {
        if (row.length != length || row.method != method) continue;
        if (row.status == "ok") {
          acc += row.fro_error * row.fro_error;
          ++n;
        } else {
          ++failures;
        }
      }
      Json m;
      if (n > 0) {
        m["rmse"] = std::sqrt(acc / n);
      } else {
        m["rmse"] = nullptr;
      }
      m["ok_runs"] = n;
      m["failed_runs"] = failures;
      entry[method] = std::move(m);
    }
    per_length.push_back(std::move(entry));
  }
  summary["per_length"] = std::move(per_length);
  summary["master_seed"] = config.master_seed;
  results.summary = std::move(summary);
  return results;
}

std::string ExperimentResults::csv() const {
  // Timings stay out of the CSV so reruns with one seed are byte-identical.
  std::string out = "scenario,length,run,method,fro_error,sq_error,status\n";
  for (const auto& row : rows) {
    out += scenario;
    out += ',';
    out += std::to_string(row.length);
    out += ',';
    out += std::to_string(row.run);
    out += ',';
    out += row.method;
    out += ',';
    out += std::isnan(row.fro_error) ? "nan" : format_double(row.fro_error);
    out += ',';
    out += std::isnan(row.fro_error) ? "nan"
                                     : format_double(row.fro_error * row.fro_error);
    out += ',';
    out += row.status;
    out += '\n';
  }
  return out;
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["scenario"] = scenario_name(scenario);
  j["k_x"] = k_x;
  j["k_z"] = k_z;
  j["lengths"] = lengths;
  j["runs"] = runs;
  j["mixture_noise"] = mixture_noise;
  j["d_zero"] = d_zero;
  j["unit_sigma"] = unit_sigma;
  j["estimators"] = estimators;
  j["vem"] = Json{{"restarts", vem_restarts},
                  {"max_iters", vem_max_iters},
                  {"tol", vem_tol},
                  {"components", vem_components}};
  j["master_seed"] = master_seed;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  const std::string name = j.value("scenario", "custom");
  if (name == "fig1") {
    c = fig1();
  } else if (name == "fig2") {
    c = fig2();
  } else if (name != "custom") {
    throw Error(ErrorKind::validation, "unknown scenario '" + name + "'");
  }
  if (j.contains("k_x")) c.k_x = j["k_x"].get<int>();
  if (j.contains("k_z")) c.k_z = j["k_z"].get<int>();
  if (j.contains("lengths")) c.lengths = j["lengths"].get<std::vector<int>>();
  if (j.contains("runs")) c.runs = j["runs"].get<int>();
  if (j.contains("mixture_noise")) c.mixture_noise = j["mixture_noise"].get<bool>();
  if (j.contains("d_zero")) c.d_zero = j["d_zero"].get<bool>();
  if (j.contains("unit_sigma")) c.unit_sigma = j["unit_sigma"].get<bool>();
  if (j.contains("estimators")) {
    c.estimators = j["estimators"].get<std::vector<std::string>>();
  }
  if (j.contains("vem")) {
    const Json& v = j["vem"];
    c.vem_restarts = v.value("restarts", c.vem_restarts);
    c.vem_max_iters = v.value("max_iters", c.vem_max_iters);
    c.vem_tol = v.value("tol", c.vem_tol);
    c.vem_components = v.value("components", c.vem_components);
  }
  if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
  c.validate();
  return c;
}

}  // namespace lcvar
