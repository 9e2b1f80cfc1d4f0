#pragma once

#include <cstdint>

#include "lcvar/types.hpp"

namespace lcvar {

// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Eigen::MatrixXd& m);

struct SampleConstraints {
  bool d_zero = false;
  bool diagonal_sigma = true;
};

// Draws a stable system: entries iid uniform on [-1,1], rescaled so the
// spectral radius equals a uniform draw from [0.2, 0.95]. Deterministic in
// the seed. Throws ErrorKind::sampling if every draw in the budget has a
// degenerate (zero) spectral radius.
VarParams sample_stable_var(int k_x, int k_z, const SampleConstraints& constraints,
                            std::uint64_t seed);

// Zero-mean unit-variance two-component scale mixture with excess kurtosis
// about +5.7, one channel each: pi = (0.8, 0.2), sigma = (0.5, 2.0) rescaled.
GmmNoiseModel super_gaussian_mixture(int dims);

// Gaussian noise packaged as one-component mixtures (requires diagonal sigma).
GmmNoiseModel gaussian_noise(const Eigen::MatrixXd& sigma);

// Simulates w_{1:L} from the stationary process (1000-step burn-in from a
// zero state, discarded). Gaussian noise with the covariance in `params`;
// handles non-diagonal sigma via Cholesky.
TimeSeriesSample simulate(const VarParams& params, int length, std::uint64_t seed);

// Same, with independent per-channel mixture noise.
TimeSeriesSample simulate(const VarParams& params, const GmmNoiseModel& noise,
                          int length, std::uint64_t seed);

// First k_x channels of a full-W sample.
TimeSeriesSample observed_part(const TimeSeriesSample& w, int k_x);

// Gamma_0 from vec(Gamma_0) = (I - A (x) A)^{-1} vec(sigma), then
// Gamma_i = A Gamma_{i-1}.
AutocovSequence analytic_autocov(const VarParams& params, int max_lag);

// Gamma_hat_i = (1/L) sum_t (x_t - xbar)(x_{t-i} - xbar)^T over valid t,
// with Gamma_hat_0 symmetrized. Requires L > max_lag + 1.
AutocovSequence sample_autocov(const TimeSeriesSample& x, int max_lag);

}  // namespace lcvar
