#include "lcvar/types.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace lcvar {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::validation, std::string(what) + " contains non-finite entries");
  }
}

}  // namespace

VarParams VarParams::from_blocks(const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                                 const Eigen::MatrixXd& d, const Eigen::MatrixXd& e,
                                 const Eigen::MatrixXd& sigma) {
  const int k_x = static_cast<int>(b.rows());
  const int k_z = static_cast<int>(e.rows());
  if (b.cols() != k_x || c.rows() != k_x || c.cols() != k_z || d.rows() != k_z ||
      d.cols() != k_x || e.cols() != k_z) {
    throw Error(ErrorKind::dimension, "inconsistent block shapes for VarParams");
  }
  VarParams p;
  p.k_x = k_x;
  p.k_z = k_z;
  p.A.resize(k_x + k_z, k_x + k_z);
  p.A.topLeftCorner(k_x, k_x) = b;
  p.A.topRightCorner(k_x, k_z) = c;
  p.A.bottomLeftCorner(k_z, k_x) = d;
  p.A.bottomRightCorner(k_z, k_z) = e;
  p.sigma = sigma;
  p.validate();
  return p;
}

void VarParams::validate() const {
  if (k_x <= 0 || k_z < 0) {
    throw Error(ErrorKind::validation, "need k_x >= 1 and k_z >= 0");
  }
  if (k_z > k_x) {
    throw Error(ErrorKind::validation, "the model requires k_z <= k_x");
  }
  if (A.rows() != k() || A.cols() != k()) {
    throw Error(ErrorKind::dimension, "A must be (k_x+k_z) square");
  }
  if (sigma.rows() != k() || sigma.cols() != k()) {
    throw Error(ErrorKind::dimension, "sigma must be (k_x+k_z) square");
  }
  require_finite(A, "A");
  require_finite(sigma, "sigma");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::validation, "sigma must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::numeric, "eigensolver failed on sigma");
  }
  if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw Error(ErrorKind::validation, "sigma must be positive semidefinite");
  }
}

double GmmChannel::total_mean() const { return weights.dot(means); }

double GmmChannel::total_variance() const {
  const double m = total_mean();
  return weights.dot((variances + means.cwiseProduct(means)).eval()) - m * m;
}

void GmmChannel::validate() const {
  const int p = components();
  if (p < 1) {
    throw Error(ErrorKind::validation, "mixture channel needs at least one component");
  }
  if (means.size() != p || variances.size() != p) {
    throw Error(ErrorKind::dimension, "mixture weight/mean/variance lengths differ");
  }
  if (weights.minCoeff() < 0.0) {
    throw Error(ErrorKind::validation, "mixture weights must be nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw Error(ErrorKind::validation, "mixture weights must sum to 1 within 1e-12");
  }
  if (variances.minCoeff() <= 0.0) {
    throw Error(ErrorKind::validation, "mixture variances must be strictly positive");
  }
  if (!weights.allFinite() || !means.allFinite() || !variances.allFinite()) {
    throw Error(ErrorKind::validation, "mixture parameters contain non-finite entries");
  }
}

void GmmNoiseModel::validate() const {
  if (channels.empty()) {
    throw Error(ErrorKind::validation, "noise model has no channels");
  }
  for (const auto& ch : channels) ch.validate();
}

void TimeSeriesSample::validate() const {
  if (length() < 1) {
    throw Error(ErrorKind::validation, "time series must have L >= 1");
  }
  if (dims() < 1) {
    throw Error(ErrorKind::validation, "time series must have at least one channel");
  }
  if (!values.allFinite()) {
    throw Error(ErrorKind::validation, "time series contains non-finite entries");
  }
  if (!labels.empty() && static_cast<int>(labels.size()) != dims()) {
    throw Error(ErrorKind::dimension, "label count does not match channel count");
  }
}

const Eigen::MatrixXd& AutocovSequence::gamma(int lag) const {
  if (lag < 0 || lag > max_lag()) {
    throw Error(ErrorKind::validation, "autocovariance lag out of range");
  }
  return gammas[static_cast<std::size_t>(lag)];
}

AutocovSequence AutocovSequence::head_block(int d) const {
  if (d < 1 || d > dim()) {
    throw Error(ErrorKind::dimension, "head_block size out of range");
  }
  AutocovSequence out;
  out.source = source;
  out.gammas.reserve(gammas.size());
  for (const auto& g : gammas) out.gammas.push_back(g.topLeftCorner(d, d));
  return out;
}

void AutocovSequence::validate() const {
  if (gammas.empty()) {
    throw Error(ErrorKind::validation, "autocovariance sequence is empty");
  }
  const int d = dim();
  for (const auto& g : gammas) {
    if (g.rows() != d || g.cols() != d) {
      throw Error(ErrorKind::dimension, "autocovariance matrices must share one shape");
    }
    if (!g.allFinite()) {
      throw Error(ErrorKind::validation, "autocovariance contains non-finite entries");
    }
  }
  const double scale = std::max(1.0, gammas[0].cwiseAbs().maxCoeff());
  if ((gammas[0] - gammas[0].transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::validation, "Gamma_0 must be symmetric");
  }
}

void EstimationReport::validate() const {
  const bool single = estimate.has_value();
  const bool multi = !candidates.empty();
  if (error_stage.empty() && single == multi) {
    throw Error(ErrorKind::validation,
                "report must carry exactly one of {estimate, candidate list}");
  }
}

}  // namespace lcvar
