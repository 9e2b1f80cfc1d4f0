#pragma once

#include <cstdint>

#include "lcvar/cov_estimator.hpp"
#include "lcvar/types.hpp"

namespace lcvar {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool bootstrap = false;  // true: parametric bootstrap; false: asymptotic
                           // Kolmogorov p (anticonservative caveat applies
                           // because mean and variance are estimated)
};

// Kolmogorov-Smirnov distance between the standardized series and the
// standard normal. Strict mode draws 199 parametric resamples; the statistic
// is pivotal under the Gaussian null, so that p-value is exact up to Monte
// Carlo error.
KsResult ks_gaussianity(const Eigen::VectorXd& series, bool bootstrap = false,
                        std::uint64_t seed = 0);

struct IndependenceResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Portmanteau test of linear dependence between the residual channels and
// the lagged observed channels x_{t-2-j}, j = 0..J. Cross-correlations are
// aggregated with a Bartlett-type covariance estimate so the chi-square
// reference stays calibrated under serially dependent residuals.
IndependenceResult independence_portmanteau(const Eigen::MatrixXd& residuals,
                                            const TimeSeriesSample& x, int lag_budget);

// Independence check on the residuals of a given ansatz.
IndependenceResult residual_independence(const TimeSeriesSample& x,
                                         const ResidualAnsatz& ansatz, int lag_budget);

struct CheckReport {
  std::vector<KsResult> ks;          // per observed channel
  IndependenceResult independence;
  int lag_budget = 2;
  double alpha = 0.05;
  bool ansatz_found = true;          // false: the ansatz solve failed, which the
                                     // check treats as an immediate failure
  bool gaussianity_rejected_all = false;  // every channel non-Gaussian at
                                          // alpha / K_X (Bonferroni): evidence
                                          // for the non-Gaussianity assumption
  bool independence_rejected = false;
  bool pass = false;  // no test rejects at alpha

  std::string note;
};

// Runs both checks on a sample: ansatz from the covariance pipeline, the
// independence portmanteau, and a bootstrap KS per channel.
CheckReport model_check(const TimeSeriesSample& x, double alpha = 0.05,
                        int lag_budget = 2, std::uint64_t seed = 0);

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 lambda^2}.
double kolmogorov_survival(double lambda);

}  // namespace lcvar
