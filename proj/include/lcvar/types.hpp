#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcvar/errors.hpp"

namespace lcvar {

// Full VAR(1) system w_t = A w_{t-1} + n_t over K = k_x + k_z channels.
// The first k_x channels are observed (X), the trailing k_z are hidden (Z).
// A is tiled as [[B, C], [D, E]] with B the k_x-by-k_x structural matrix.
struct VarParams {
  Eigen::MatrixXd A;      // K x K transition matrix
  Eigen::MatrixXd sigma;  // K x K noise covariance
  int k_x = 0;
  int k_z = 0;

  int k() const { return k_x + k_z; }

  Eigen::MatrixXd b() const { return A.topLeftCorner(k_x, k_x); }
  Eigen::MatrixXd c() const { return A.topRightCorner(k_x, k_z); }
  Eigen::MatrixXd d() const { return A.bottomLeftCorner(k_z, k_x); }
  Eigen::MatrixXd e() const { return A.bottomRightCorner(k_z, k_z); }

  static VarParams from_blocks(const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                               const Eigen::MatrixXd& d, const Eigen::MatrixXd& e,
                               const Eigen::MatrixXd& sigma);

  // Checks dimensions, k_z <= k_x, symmetry and positive semidefiniteness of
  // sigma. Stability is a separate concern (see spectral_radius) because some
  // callers intentionally hold transient unstable iterates.
  void validate() const;
};

// Per-channel Gaussian mixture: weights sum to one, variances positive.
struct GmmChannel {
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd variances;

  int components() const { return static_cast<int>(weights.size()); }
  double total_mean() const;
  double total_variance() const;
  void validate() const;
};

// Independent per-channel mixtures for all K channels, in W order (X first).
struct GmmNoiseModel {
  std::vector<GmmChannel> channels;

  int dims() const { return static_cast<int>(channels.size()); }
  void validate() const;
};

// A finite realization, row t = observation at time t.
struct TimeSeriesSample {
  Eigen::MatrixXd values;  // L x d
  std::vector<std::string> labels;
  std::optional<std::uint64_t> seed;

  int length() const { return static_cast<int>(values.rows()); }
  int dims() const { return static_cast<int>(values.cols()); }
  void validate() const;
};

// Autocovariance matrices Gamma_0 .. Gamma_m with Gamma_i = Cov(x_t, x_{t-i}).
struct AutocovSequence {
  enum class Source { analytic, sample };

  std::vector<Eigen::MatrixXd> gammas;
  Source source = Source::analytic;

  int max_lag() const { return static_cast<int>(gammas.size()) - 1; }
  int dim() const { return gammas.empty() ? 0 : static_cast<int>(gammas.front().rows()); }
  const Eigen::MatrixXd& gamma(int lag) const;

  // Leading d-by-d blocks of every lag (the restriction to the observed part).
  AutocovSequence head_block(int d) const;
  void validate() const;
};

// Output of any estimator, uniform across methods. Exactly one of
// `estimate` / `candidates` is populated.
struct EstimationReport {
  std::string method;
  std::optional<Eigen::MatrixXd> estimate;
  std::vector<Eigen::MatrixXd> candidates;
  std::optional<Eigen::MatrixXd> c_estimate;

  // Diagnostics; which fields are meaningful depends on the method.
  double ansatz_residual = 0.0;
  double condition_number = 0.0;
  bool g2_distinct_roots = true;
  bool assumptions_unverified = false;
  double final_elbo = 0.0;
  int iterations = 0;
  std::string error_stage;  // non-empty when a pipeline stage failed
  std::string note;

  std::uint64_t run_seed = 0;
  double wall_ms = 0.0;

  void validate() const;
};

}  // namespace lcvar
