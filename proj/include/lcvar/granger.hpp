#pragma once

#include "lcvar/types.hpp"

namespace lcvar {

struct GrangerEstimate {
  Eigen::MatrixXd b_pg;
  AutocovSequence::Source source = AutocovSequence::Source::analytic;
  double gram_condition = 0.0;
};

// B_pG = Gamma_1 Gamma_0^{-1}, solved as a linear system (never an explicit
// inverse). Throws ErrorKind::conditioning when cond(Gamma_0) > 1e12.
GrangerEstimate practical_granger(const AutocovSequence& x_gammas);

// Regression of present on past over the sample pairs (x_{t-1}, x_t),
// t = 2..L: B = (sum x_t x_{t-1}^T)(sum x_{t-1} x_{t-1}^T)^{-1}. This is the
// plain least-squares form; it agrees with the autocovariance form up to
// O(1/L) edge terms.
GrangerEstimate granger_regression(const TimeSeriesSample& x);

}  // namespace lcvar
