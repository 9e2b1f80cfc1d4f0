#include "lcvar/granger.hpp"

#include <Eigen/SVD>

namespace lcvar {

namespace {

constexpr double kMaxCondition = 1e12;

// Solves X * gram = rhs for X with a condition check on the (symmetric) gram.
Eigen::MatrixXd right_divide(const Eigen::MatrixXd& rhs, const Eigen::MatrixXd& gram,
                             double* condition) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram.transpose(),
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) <= 0.0
                          ? std::numeric_limits<double>::infinity()
                          : sv(0) / sv(sv.size() - 1);
  if (condition) *condition = cond;
  if (!(cond < kMaxCondition)) {
    throw Error(ErrorKind::conditioning, "Gram matrix condition number exceeds 1e12");
  }
  // X gram = rhs  <=>  gram^T X^T = rhs^T
  return svd.solve(rhs.transpose()).transpose();
}

}  // namespace

GrangerEstimate practical_granger(const AutocovSequence& x_gammas) {
  x_gammas.validate();
  if (x_gammas.max_lag() < 1) {
    throw Error(ErrorKind::validation, "practical Granger needs Gamma_0 and Gamma_1");
  }
  GrangerEstimate est;
  est.source = x_gammas.source;
  est.b_pg = right_divide(x_gammas.gamma(1), x_gammas.gamma(0), &est.gram_condition);
  if (!est.b_pg.allFinite()) {
    throw Error(ErrorKind::numeric, "practical Granger estimate is non-finite");
  }
  return est;
}

GrangerEstimate granger_regression(const TimeSeriesSample& x) {
  x.validate();
  if (x.length() < 3) {
    throw Error(ErrorKind::insufficient_data, "regression needs at least 3 rows");
  }
  const auto& v = x.values;
  const int n = x.length();
  Eigen::MatrixXd past = v.topRows(n - 1);
  Eigen::MatrixXd present = v.bottomRows(n - 1);
  Eigen::MatrixXd gram = past.transpose() * past;
  Eigen::MatrixXd cross = present.transpose() * past;
  GrangerEstimate est;
  est.source = AutocovSequence::Source::sample;
  est.b_pg = right_divide(cross, gram, &est.gram_condition);
  return est;
}

}  // namespace lcvar
