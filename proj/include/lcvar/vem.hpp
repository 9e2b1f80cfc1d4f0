#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lcvar/types.hpp"

namespace lcvar {

// Full parameter vector theta of the mixture-noise latent VAR: the transition
// matrix (with its blocks) plus one Gaussian mixture per channel. Channels are
// stored in W order: X channels 0..k_x-1, Z channels k_x..K-1. Z-channel
// mixtures are gauge-fixed to zero mean and unit total variance, absorbing the
// column-scaling indeterminacy of C.
struct VemParams {
  Eigen::MatrixXd A;  // K x K
  int k_x = 0;
  int k_z = 0;
  std::vector<GmmChannel> noise;  // size K, W order

  int k() const { return k_x + k_z; }
  Eigen::MatrixXd b() const { return A.topLeftCorner(k_x, k_x); }
  Eigen::MatrixXd c() const { return A.topRightCorner(k_x, k_z); }
  Eigen::MatrixXd d() const { return A.bottomLeftCorner(k_z, k_x); }
  Eigen::MatrixXd e() const { return A.bottomRightCorner(k_z, k_z); }
  // sigma implied by the mixtures (diagonal of total variances).
  Eigen::MatrixXd implied_sigma() const;
  void validate() const;
};

// Mean-field indicator marginals q(v_{l,i} = c), one L x p_i matrix per channel.
struct IndicatorMarginals {
  std::vector<Eigen::MatrixXd> q_x;  // per X channel
  std::vector<Eigen::MatrixXd> q_z;  // per Z channel
};

// Smoothed moments of the latent states under the surrogate LDS, plus the
// Gaussian entropy of the full joint q(z_{1:L}).
struct StateMoments {
  Eigen::MatrixXd mean;                    // L x K_Z
  std::vector<Eigen::MatrixXd> cov;        // L of K_Z x K_Z (smoothed marginal)
  std::vector<Eigen::MatrixXd> cross_cov;  // index l >= 1: Cov(z_l, z_{l-1} | x)
  double entropy = 0.0;

  int length() const { return static_cast<int>(mean.rows()); }
};

struct VemPosterior {
  IndicatorMarginals indicators;
  StateMoments states;
};

struct ElboTrace {
  std::vector<double> values;
  bool converged = false;
  int iterations = 0;
};

struct VemConfig {
  int k_z = 1;
  int components = 2;  // p_i for every channel
  int max_iters = 500;
  double tol = 1e-6;
  int restarts = 5;
  std::uint64_t seed = 0;
  bool center = true;    // subtract channel means before fitting
  bool verbose = false;  // one line per iteration on stderr
};

// Granger-regression B, small random C/D/E, X-channel mixtures moment-matched
// to the regression residual variance with perturbed means, Z-channel mixtures
// at zero mean / unit total variance. Projects A to spectral radius 0.95 if
// the initializer lands outside the stable region.
VemParams init_params(const TimeSeriesSample& x, int k_z, int components,
                      std::uint64_t seed);

// Coordinate update of the indicator marginals given state moments (log-space).
IndicatorMarginals e_step_indicators(const TimeSeriesSample& x, const VemParams& theta,
                                     const StateMoments& states);

// Exact posterior of the surrogate time-varying LDS: forward Kalman filter
// plus RTS smoother. Also valid for k_z = 0 (returns empty moments).
StateMoments e_step_states(const TimeSeriesSample& x, const VemParams& theta,
                           const IndicatorMarginals& indicators);

// Closed-form block coordinate M-step: pi, X-channel means, variances, then
// rows of E, D, C, B, each conditionally optimal given the current values of
// the other blocks. Z-channel means stay at zero (gauge). Singular
// normal-equation rows are left unchanged and counted.
struct MStepInfo {
  int skipped_rows = 0;
};
VemParams m_step(const TimeSeriesSample& x, const VemParams& theta,
                 const VemPosterior& posterior, MStepInfo* info = nullptr);

// The variational lower bound for arbitrary (theta, posterior).
double elbo(const TimeSeriesSample& x, const VemParams& theta,
            const VemPosterior& posterior);

// Exact gauge transform z -> diag(scales) z: rescales C, D, E, the Z-channel
// mixtures, and (when given) the posterior state moments and entropy. Leaves
// the ELBO invariant.
void rescale_z_channels(VemParams& theta, const Eigen::VectorXd& scales,
                        VemPosterior* posterior);

// Divides each Z channel by the square root of its mixture total variance.
void normalize_z_gauge(VemParams& theta, VemPosterior* posterior);

struct VemRun {
  VemParams params;
  VemPosterior posterior;
  ElboTrace trace;
};

// One EM run from one seed.
VemRun fit_single(const TimeSeriesSample& x, const VemConfig& config);

struct FitResult {
  EstimationReport report;   // B and C estimates plus diagnostics
  VemParams params;          // the full fitted theta of the best restart
  std::vector<ElboTrace> traces;  // one per restart (empty for failed ones)
};

// Runs `restarts` independent seeds and keeps the best final ELBO.
FitResult fit(const TimeSeriesSample& x, const VemConfig& config);

}  // namespace lcvar
