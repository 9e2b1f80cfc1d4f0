#include "lcvar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lcvar {

double rmse(const std::vector<Eigen::MatrixXd>& estimates,
            const std::vector<Eigen::MatrixXd>& truths) {
  if (estimates.size() != truths.size() || estimates.empty()) {
    throw Error(ErrorKind::dimension, "rmse needs equal-length non-empty lists");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].rows() != truths[i].rows() || estimates[i].cols() != truths[i].cols()) {
      throw Error(ErrorKind::dimension, "rmse shape mismatch at run " + std::to_string(i));
    }
    acc += (estimates[i] - truths[i]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

std::pair<int, Eigen::MatrixXd> best_candidate(
    const std::vector<Eigen::MatrixXd>& candidates, const Eigen::MatrixXd& truth) {
  if (candidates.empty()) {
    throw Error(ErrorKind::validation, "candidate list is empty");
  }
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].rows() != truth.rows() || candidates[i].cols() != truth.cols()) {
      throw Error(ErrorKind::dimension, "candidate shape mismatch");
    }
    const double err = (candidates[i] - truth).squaredNorm();
    if (err < best_err) {
      best_err = err;
      best = static_cast<int>(i);
    }
  }
  return {best, candidates[static_cast<std::size_t>(best)]};
}

double match_c_columns(const Eigen::MatrixXd& c_est, const Eigen::MatrixXd& c_true) {
  if (c_est.rows() != c_true.rows() || c_est.cols() != c_true.cols()) {
    throw Error(ErrorKind::dimension, "column matching needs equal shapes");
  }
  const int m = static_cast<int>(c_est.cols());
  if (m == 0) return 0.0;

  auto pair_cost = [&](int je, int jt) {
    const double ne = c_est.col(je).norm();
    const double nt = c_true.col(jt).norm();
    const bool ze = ne < 1e-12;
    const bool zt = nt < 1e-12;
    if (ze && zt) return 0.0;
    if (ze != zt) return 1.0;
    return 1.0 - std::abs(c_est.col(je).dot(c_true.col(jt))) / (ne * nt);
  };

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int j = 0; j < m; ++j) cost += pair_cost(j, perm[static_cast<std::size_t>(j)]);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace lcvar
