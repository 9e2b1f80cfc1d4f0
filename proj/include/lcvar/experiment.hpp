#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcvar/json_io.hpp"
#include "lcvar/types.hpp"
#include "lcvar/vem.hpp"

namespace lcvar {

// Counter-based split: identical systems and samples for every estimator
// within a (length, run) cell, fresh ones across cells.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t length, std::uint64_t run);

enum class Scenario { fig1, fig2, custom };

struct ExperimentConfig {
  Scenario scenario = Scenario::custom;
  int k_x = 1;
  int k_z = 1;
  std::vector<int> lengths;
  int runs = 1;
  bool mixture_noise = false;  // super-Gaussian mixture vs Gaussian
  bool d_zero = false;
  bool unit_sigma = false;  // force sigma = I for the generated systems
  std::vector<std::string> estimators;  // subset of {"granger", "cov", "vem"}
  int vem_restarts = 5;
  int vem_max_iters = 500;
  double vem_tol = 1e-6;
  int vem_components = 2;
  std::uint64_t master_seed = 1;

  void validate() const;

  // Scalar D = 0 Gaussian scenario, lengths 10^2..10^5.
  static ExperimentConfig fig1(bool full = false);
  // K_X = 2, K_Z = 1, super-Gaussian mixture noise, lengths per the protocol.
  static ExperimentConfig fig2();

  static ExperimentConfig from_json(const Json& j);
  Json to_json() const;
};

struct RunRow {
  int length = 0;
  int run = 0;
  std::string method;
  double fro_error = 0.0;  // per-run |B_hat - B|_F (oracle-best for "cov")
  double wall_ms = 0.0;
  std::string status;  // "ok" or an error code
};

struct ExperimentResults {
  std::string scenario;
  std::vector<RunRow> rows;
  Json summary;  // per-length aggregate RMSE per method

  // Deterministic bytes: fixed column order, fixed float formatting, rows
  // sorted by (length, run, method), LF endings.
  std::string csv() const;
};

ExperimentResults run_experiment(const ExperimentConfig& config);

}  // namespace lcvar
