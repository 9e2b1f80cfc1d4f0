#include "lcvar/vem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>

#include "lcvar/granger.hpp"
#include "lcvar/var_core.hpp"

namespace lcvar {

namespace {

constexpr double kJitter = 1e-10;
constexpr double kVarFloor = 1e-10;
constexpr double kRespFloor = 1e-12;

inline double xlogy(double x, double y) {
  return x > 0.0 ? x * std::log(y) : 0.0;
}

inline double entropy_term(double q) { return q > 0.0 ? -q * std::log(q) : 0.0; }

// Effective precision lam = sum_c q_c / s2_c and precision-weighted mean
// offset mut = (sum_c q_c mu_c / s2_c) / lam for one channel at one time.
struct Effective {
  Eigen::MatrixXd lam;  // L x channels
  Eigen::MatrixXd mut;  // L x channels
};

Effective effective_noise(const std::vector<Eigen::MatrixXd>& q,
                          const std::vector<GmmChannel>& channels, int first, int count,
                          int length) {
  Effective eff;
  eff.lam.resize(length, count);
  eff.mut.resize(length, count);
  for (int i = 0; i < count; ++i) {
    const GmmChannel& ch = channels[static_cast<std::size_t>(first + i)];
    const Eigen::VectorXd inv_var = ch.variances.cwiseInverse();
    const Eigen::VectorXd mu_over_var = ch.means.cwiseProduct(inv_var);
    eff.lam.col(i) = q[static_cast<std::size_t>(i)] * inv_var;
    eff.mut.col(i) =
        (q[static_cast<std::size_t>(i)] * mu_over_var).cwiseQuotient(eff.lam.col(i));
  }
  return eff;
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace

Eigen::MatrixXd VemParams::implied_sigma() const {
  Eigen::VectorXd diag(k());
  for (int i = 0; i < k(); ++i) diag(i) = noise[static_cast<std::size_t>(i)].total_variance();
  return diag.asDiagonal();
}

void VemParams::validate() const {
  if (k_x < 1 || k_z < 0 || k_z > k_x) {
    throw Error(ErrorKind::validation, "need 1 <= k_x and 0 <= k_z <= k_x");
  }
  if (A.rows() != k() || A.cols() != k()) {
    throw Error(ErrorKind::dimension, "A must be (k_x+k_z) square");
  }
  if (static_cast<int>(noise.size()) != k()) {
    throw Error(ErrorKind::dimension, "need one mixture per channel");
  }
  for (const auto& ch : noise) ch.validate();
}

VemParams init_params(const TimeSeriesSample& x, int k_z, int components,
                      std::uint64_t seed) {
  x.validate();
  if (x.length() < 10) {
    throw Error(ErrorKind::insufficient_data, "initialization needs L >= 10");
  }
  if (k_z < 0 || k_z > x.dims()) {
    throw Error(ErrorKind::validation, "need 0 <= k_z <= k_x");
  }
  if (components < 1) {
    throw Error(ErrorKind::validation, "need at least one mixture component");
  }
  const int k_x = x.dims();
  const int k = k_x + k_z;
  for (int i = 0; i < k_x; ++i) {
    const double sd = std::sqrt(
        (x.values.col(i).array() - x.values.col(i).mean()).square().mean());
    if (sd < 1e-12) {
      throw Error(ErrorKind::initialization,
                  "channel " + std::to_string(i) + " has zero variance");
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-0.2, 0.2);

  const Eigen::MatrixXd b = granger_regression(x).b_pg;
  VemParams theta;
  theta.k_x = k_x;
  theta.k_z = k_z;
  theta.A.setZero(k, k);
  theta.A.topLeftCorner(k_x, k_x) = b;
  for (int i = 0; i < k_x; ++i) {
    for (int j = k_x; j < k; ++j) theta.A(i, j) = 0.1 * gauss(rng);
  }
  for (int i = k_x; i < k; ++i) {
    for (int j = 0; j < k; ++j) theta.A(i, j) = 0.1 * gauss(rng);
  }
  const double rho = spectral_radius(theta.A);
  if (rho >= 1.0) theta.A *= 0.95 / rho;

  // X channels: moment-match the Granger residual variance, means perturbed.
  const int n = x.length();
  Eigen::MatrixXd resid =
      x.values.bottomRows(n - 1) - x.values.topRows(n - 1) * b.transpose();
  for (int i = 0; i < k_x; ++i) {
    const double v = resid.col(i).squaredNorm() / static_cast<double>(n - 1);
    GmmChannel ch;
    ch.weights = Eigen::VectorXd::Constant(components, 1.0 / components);
    ch.means.resize(components);
    ch.variances.resize(components);
    for (int c = 0; c < components; ++c) {
      ch.means(c) = components == 1 ? 0.0 : unif(rng) * std::sqrt(v);
    }
    // Spreads average to one under the uniform weights, so the channel's
    // second moment matches the residual variance v.
    const double m2 = ch.weights.dot(ch.means.cwiseProduct(ch.means).eval());
    for (int c = 0; c < components; ++c) {
      const double spread =
          components == 1 ? 1.0 : 0.6 + 0.8 * c / static_cast<double>(components - 1);
      ch.variances(c) = std::max((v - m2) * spread, std::max(1e-4 * v, kVarFloor));
    }
    theta.noise.push_back(std::move(ch));
  }
  // Z channels: zero mean, unit total variance.
  for (int i = 0; i < k_z; ++i) {
    GmmChannel ch;
    ch.weights = Eigen::VectorXd::Constant(components, 1.0 / components);
    ch.means = Eigen::VectorXd::Zero(components);
    ch.variances.resize(components);
    for (int c = 0; c < components; ++c) {
      ch.variances(c) =
          components == 1 ? 1.0 : 0.6 + 0.8 * c / static_cast<double>(components - 1);
    }
    ch.variances /= ch.weights.dot(ch.variances);
    theta.noise.push_back(std::move(ch));
  }
  theta.validate();
  return theta;
}

IndicatorMarginals e_step_indicators(const TimeSeriesSample& x, const VemParams& theta,
                                     const StateMoments& states) {
  theta.validate();
  const int n = x.length();
  const int k_x = theta.k_x;
  const int k_z = theta.k_z;
  const Eigen::MatrixXd b = theta.b();
  const Eigen::MatrixXd c_mat = theta.c();
  const Eigen::MatrixXd d_mat = theta.d();
  const Eigen::MatrixXd e_mat = theta.e();

  IndicatorMarginals out;
  out.q_x.resize(static_cast<std::size_t>(k_x));
  out.q_z.resize(static_cast<std::size_t>(k_z));

  auto normalize_rows = [](Eigen::MatrixXd& logq) {
    for (int l = 0; l < logq.rows(); ++l) {
      const double m = logq.row(l).maxCoeff();
      logq.row(l) = (logq.row(l).array() - m).exp();
      logq.row(l) /= logq.row(l).sum();
    }
  };

  // Second moments of the states, needed for the Z-channel residuals.
  std::vector<Eigen::MatrixXd> second;
  if (k_z > 0) {
    second.resize(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
      second[static_cast<std::size_t>(l)] =
          states.cov[static_cast<std::size_t>(l)] +
          states.mean.row(l).transpose() * states.mean.row(l);
    }
  }

  for (int i = 0; i < k_x; ++i) {
    const GmmChannel& ch = theta.noise[static_cast<std::size_t>(i)];
    const int p = ch.components();
    Eigen::MatrixXd logq(n, p);
    for (int c = 0; c < p; ++c) {
      const double lw = ch.weights(c) > 0.0 ? std::log(ch.weights(c))
                                            : -std::numeric_limits<double>::infinity();
      const double s2 = ch.variances(c);
      const double log_s = std::log(s2);
      {
        const double r = x.values(0, i) - ch.means(c);
        logq(0, c) = lw - 0.5 * (r * r / s2 + log_s);
      }
      for (int l = 1; l < n; ++l) {
        double pred = x.values(l, i) - b.row(i).dot(x.values.row(l - 1)) - ch.means(c);
        double var_term = 0.0;
        if (k_z > 0) {
          pred -= c_mat.row(i).dot(states.mean.row(l - 1));
          var_term = c_mat.row(i) * states.cov[static_cast<std::size_t>(l - 1)] *
                     c_mat.row(i).transpose();
        }
        logq(l, c) = lw - 0.5 * ((pred * pred + var_term) / s2 + log_s);
      }
    }
    normalize_rows(logq);
    out.q_x[static_cast<std::size_t>(i)] = std::move(logq);
  }

  for (int i = 0; i < k_z; ++i) {
    const GmmChannel& ch = theta.noise[static_cast<std::size_t>(k_x + i)];
    const int p = ch.components();
    Eigen::MatrixXd logq(n, p);
    for (int c = 0; c < p; ++c) {
      const double lw = ch.weights(c) > 0.0 ? std::log(ch.weights(c))
                                            : -std::numeric_limits<double>::infinity();
      const double s2 = ch.variances(c);
      const double log_s = std::log(s2);
      {
        // <(z_{1,i} - mu_c)^2>
        const double r = second[0](i, i) - 2.0 * ch.means(c) * states.mean(0, i) +
                         ch.means(c) * ch.means(c);
        logq(0, c) = lw - 0.5 * (r / s2 + log_s);
      }
      for (int l = 1; l < n; ++l) {
        const double a =
            d_mat.row(i).dot(x.values.row(l - 1)) + ch.means(c);
        const Eigen::RowVectorXd ei = e_mat.row(i);
        const double t1 = second[static_cast<std::size_t>(l)](i, i);
        const double t2 =
            -2.0 * ei.dot(states.cross_cov[static_cast<std::size_t>(l)].row(i) +
                          states.mean(l, i) * states.mean.row(l - 1));
        const double t3 = ei * second[static_cast<std::size_t>(l - 1)] * ei.transpose();
        const double t4 =
            -2.0 * a * (states.mean(l, i) - ei.dot(states.mean.row(l - 1)));
        const double r = t1 + t2 + t3 + t4 + a * a;
        logq(l, c) = lw - 0.5 * (r / s2 + log_s);
      }
    }
    normalize_rows(logq);
    out.q_z[static_cast<std::size_t>(i)] = std::move(logq);
  }
  return out;
}

StateMoments e_step_states(const TimeSeriesSample& x, const VemParams& theta,
                           const IndicatorMarginals& indicators) {
  theta.validate();
  const int n = x.length();
  const int k_x = theta.k_x;
  const int k_z = theta.k_z;

  StateMoments out;
  out.mean.resize(n, k_z);
  out.cov.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(k_z, k_z));
  out.cross_cov.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(k_z, k_z));
  out.entropy = 0.0;
  if (k_z == 0) return out;

  const Eigen::MatrixXd b = theta.b();
  const Eigen::MatrixXd c_mat = theta.c();
  const Eigen::MatrixXd d_mat = theta.d();
  const Eigen::MatrixXd e_mat = theta.e();

  const Effective ez = effective_noise(indicators.q_z, theta.noise, k_x, k_z, n);
  const Effective ex = effective_noise(indicators.q_x, theta.noise, 0, k_x, n);
  if ((ez.lam.array() <= 0.0).any() || (ex.lam.array() <= 0.0).any()) {
    throw Error(ErrorKind::numeric, "non-positive effective precision");
  }

  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(k_z, k_z);
  Eigen::MatrixXd m_pred(n, k_z), m_filt(n, k_z);
  std::vector<Eigen::MatrixXd> p_pred(static_cast<std::size_t>(n)),
      p_filt(static_cast<std::size_t>(n));

  for (int l = 0; l < n; ++l) {
    Eigen::VectorXd mp;
    Eigen::MatrixXd pp;
    if (l == 0) {
      mp = ez.mut.row(0).transpose();
      pp = ez.lam.row(0).cwiseInverse().asDiagonal();
    } else {
      const Eigen::VectorXd u =
          d_mat * x.values.row(l - 1).transpose() + ez.mut.row(l).transpose();
      mp = e_mat * m_filt.row(l - 1).transpose() + u;
      pp = e_mat * p_filt[static_cast<std::size_t>(l - 1)] * e_mat.transpose();
      pp += Eigen::MatrixXd(ez.lam.row(l).cwiseInverse().asDiagonal());
      pp = symmetrized(pp);
    }
    // An unstable E iterate makes the predicted covariance blow up
    // geometrically; kill the run before overflow poisons the bound.
    if (!mp.allFinite() || !pp.allFinite() || pp.cwiseAbs().maxCoeff() > 1e12 ||
        mp.cwiseAbs().maxCoeff() > 1e9) {
      throw Error(ErrorKind::numeric,
                  "filter divergence at time index " + std::to_string(l));
    }
    m_pred.row(l) = mp.transpose();
    p_pred[static_cast<std::size_t>(l)] = pp;

    if (l + 1 < n) {
      // Pseudo-observation tied to z_l: x_{l+1} - B x_l - mut^X_{l+1} = C z_l + eps.
      const Eigen::VectorXd y = x.values.row(l + 1).transpose() -
                                b * x.values.row(l).transpose() -
                                ex.mut.row(l + 1).transpose();
      const Eigen::MatrixXd r_cov =
          Eigen::MatrixXd(ex.lam.row(l + 1).cwiseInverse().asDiagonal());
      Eigen::MatrixXd s_cov = c_mat * pp * c_mat.transpose() + r_cov;
      s_cov.diagonal().array() += kJitter;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrized(s_cov));
      if (ldlt.info() != Eigen::Success) {
        throw Error(ErrorKind::numeric,
                    "filter divergence at time index " + std::to_string(l));
      }
      const Eigen::MatrixXd gain = (ldlt.solve(c_mat * pp)).transpose();
      m_filt.row(l) = (mp + gain * (y - c_mat * mp)).transpose();
      const Eigen::MatrixXd ikc = ident - gain * c_mat;
      p_filt[static_cast<std::size_t>(l)] =
          symmetrized(ikc * pp * ikc.transpose() + gain * r_cov * gain.transpose());
    } else {
      m_filt.row(l) = mp.transpose();
      p_filt[static_cast<std::size_t>(l)] = pp;
    }
    if (!m_filt.row(l).allFinite()) {
      throw Error(ErrorKind::numeric,
                  "filter divergence at time index " + std::to_string(l));
    }
  }

  // RTS smoother, lag-one covariances, and the joint Gaussian entropy
  // through the backward Markov factorization.
  auto logdet_entropy = [&](const Eigen::MatrixXd& cov) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrized(cov));
    double logdet = 0.0;
    for (int i = 0; i < k_z; ++i) {
      logdet += std::log(std::max(ldlt.vectorD()(i), kJitter * kJitter));
    }
    return 0.5 * (k_z * std::log(2.0 * M_PI * M_E) + logdet);
  };

  out.mean.row(n - 1) = m_filt.row(n - 1);
  out.cov[static_cast<std::size_t>(n - 1)] = p_filt[static_cast<std::size_t>(n - 1)];
  out.entropy = logdet_entropy(p_filt[static_cast<std::size_t>(n - 1)]);
  for (int l = n - 2; l >= 0; --l) {
    const Eigen::MatrixXd& pp_next = p_pred[static_cast<std::size_t>(l + 1)];
    Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrized(pp_next));
    const Eigen::MatrixXd gain =
        ldlt.solve(e_mat * p_filt[static_cast<std::size_t>(l)]).transpose();
    out.mean.row(l) =
        m_filt.row(l) +
        (gain * (out.mean.row(l + 1) - m_pred.row(l + 1)).transpose()).transpose();
    out.cov[static_cast<std::size_t>(l)] = symmetrized(
        p_filt[static_cast<std::size_t>(l)] +
        gain * (out.cov[static_cast<std::size_t>(l + 1)] - pp_next) * gain.transpose());
    out.cross_cov[static_cast<std::size_t>(l + 1)] =
        out.cov[static_cast<std::size_t>(l + 1)] * gain.transpose();
    // Conditional covariance of z_l given z_{l+1} (constant in z_{l+1}).
    out.entropy += logdet_entropy(p_filt[static_cast<std::size_t>(l)] -
                                  gain * pp_next * gain.transpose());
  }
  return out;
}

namespace {

// <z_l z_{l-1}^T> from the smoothed moments.
Eigen::MatrixXd cross_second(const StateMoments& s, int l) {
  return s.cross_cov[static_cast<std::size_t>(l)] +
         s.mean.row(l).transpose() * s.mean.row(l - 1);
}

Eigen::MatrixXd marginal_second(const StateMoments& s, int l) {
  return s.cov[static_cast<std::size_t>(l)] +
         s.mean.row(l).transpose() * s.mean.row(l);
}

}  // namespace

VemParams m_step(const TimeSeriesSample& x, const VemParams& theta,
                 const VemPosterior& posterior, MStepInfo* info) {
  theta.validate();
  const int n = x.length();
  const int k_x = theta.k_x;
  const int k_z = theta.k_z;
  const StateMoments& st = posterior.states;
  const IndicatorMarginals& q = posterior.indicators;

  VemParams next = theta;
  Eigen::MatrixXd b = theta.b();
  Eigen::MatrixXd c_mat = theta.c();
  Eigen::MatrixXd d_mat = theta.d();
  Eigen::MatrixXd e_mat = theta.e();
  MStepInfo local;

  std::vector<Eigen::MatrixXd> second;
  if (k_z > 0) {
    second.resize(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) second[static_cast<std::size_t>(l)] = marginal_second(st, l);
  }

  // pi for every channel.
  for (int i = 0; i < k_x; ++i) {
    next.noise[static_cast<std::size_t>(i)].weights =
        q.q_x[static_cast<std::size_t>(i)].colwise().mean().transpose();
  }
  for (int i = 0; i < k_z; ++i) {
    next.noise[static_cast<std::size_t>(k_x + i)].weights =
        q.q_z[static_cast<std::size_t>(i)].colwise().mean().transpose();
  }

  // X-channel means. Z-channel means stay at zero: the shift is an intercept
  // of the zero-mean process and the gauge pins it. A single-component X mean
  // is likewise a pure intercept (data is mean-centered), so it stays fixed;
  // with two or more components the means carry shape and are updated.
  for (int i = 0; i < k_x; ++i) {
    GmmChannel& ch = next.noise[static_cast<std::size_t>(i)];
    if (ch.components() == 1) continue;
    const Eigen::MatrixXd& qi = q.q_x[static_cast<std::size_t>(i)];
    Eigen::VectorXd resid(n);
    resid(0) = x.values(0, i);
    for (int l = 1; l < n; ++l) {
      double r = x.values(l, i) - b.row(i).dot(x.values.row(l - 1));
      if (k_z > 0) r -= c_mat.row(i).dot(st.mean.row(l - 1));
      resid(l) = r;
    }
    for (int c = 0; c < ch.components(); ++c) {
      const double den = qi.col(c).sum();
      if (den < kRespFloor) continue;
      ch.means(c) = qi.col(c).dot(resid) / den;
    }
  }

  // Variances, using the just-updated means.
  for (int i = 0; i < k_x; ++i) {
    GmmChannel& ch = next.noise[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd& qi = q.q_x[static_cast<std::size_t>(i)];
    for (int c = 0; c < ch.components(); ++c) {
      const double den = qi.col(c).sum();
      if (den < kRespFloor) continue;
      double num = 0.0;
      {
        const double r = x.values(0, i) - ch.means(c);
        num += qi(0, c) * r * r;
      }
      for (int l = 1; l < n; ++l) {
        double r = x.values(l, i) - b.row(i).dot(x.values.row(l - 1)) - ch.means(c);
        double var_term = 0.0;
        if (k_z > 0) {
          r -= c_mat.row(i).dot(st.mean.row(l - 1));
          var_term = c_mat.row(i) * st.cov[static_cast<std::size_t>(l - 1)] *
                     c_mat.row(i).transpose();
        }
        num += qi(l, c) * (r * r + var_term);
      }
      ch.variances(c) = std::max(num / den, kVarFloor);
    }
  }
  for (int i = 0; i < k_z; ++i) {
    GmmChannel& ch = next.noise[static_cast<std::size_t>(k_x + i)];
    const Eigen::MatrixXd& qi = q.q_z[static_cast<std::size_t>(i)];
    for (int c = 0; c < ch.components(); ++c) {
      const double den = qi.col(c).sum();
      if (den < kRespFloor) continue;
      double num = 0.0;
      {
        const double r = second[0](i, i) - 2.0 * ch.means(c) * st.mean(0, i) +
                         ch.means(c) * ch.means(c);
        num += qi(0, c) * r;
      }
      for (int l = 1; l < n; ++l) {
        const double a = d_mat.row(i).dot(x.values.row(l - 1)) + ch.means(c);
        const Eigen::RowVectorXd ei = e_mat.row(i);
        const double t1 = second[static_cast<std::size_t>(l)](i, i);
        const double t2 = -2.0 * ei.dot(cross_second(st, l).row(i));
        const double t3 = ei * second[static_cast<std::size_t>(l - 1)] * ei.transpose();
        const double t4 = -2.0 * a * (st.mean(l, i) - ei.dot(st.mean.row(l - 1)));
        num += qi(l, c) * (t1 + t2 + t3 + t4 + a * a);
      }
      ch.variances(c) = std::max(num / den, kVarFloor);
    }
  }

  const Effective ez =
      k_z > 0 ? effective_noise(q.q_z, next.noise, k_x, k_z, n) : Effective{};
  const Effective ex = effective_noise(q.q_x, next.noise, 0, k_x, n);

  auto solve_row = [&](const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                       Eigen::RowVectorXd& row) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrized(gram));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      ++local.skipped_rows;
      return;
    }
    const Eigen::VectorXd sol = ldlt.solve(rhs);
    if (!sol.allFinite()) {
      ++local.skipped_rows;
      return;
    }
    row = sol.transpose();
  };

  // Rows of E, then D (with the new E), then C, then B (with the new C).
  for (int i = 0; i < k_z; ++i) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k_z, k_z);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k_z);
    for (int l = 1; l < n; ++l) {
      const double w = ez.lam(l, i);
      gram += w * second[static_cast<std::size_t>(l - 1)];
      const double off = d_mat.row(i).dot(x.values.row(l - 1)) + ez.mut(l, i);
      rhs += w * (cross_second(st, l).row(i).transpose() -
                  off * st.mean.row(l - 1).transpose());
    }
    Eigen::RowVectorXd row = e_mat.row(i);
    solve_row(gram, rhs, row);
    e_mat.row(i) = row;
  }
  for (int i = 0; i < k_z; ++i) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k_x, k_x);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k_x);
    for (int l = 1; l < n; ++l) {
      const double w = ez.lam(l, i);
      const Eigen::VectorXd xp = x.values.row(l - 1).transpose();
      gram += w * xp * xp.transpose();
      const double target =
          st.mean(l, i) - e_mat.row(i).dot(st.mean.row(l - 1)) - ez.mut(l, i);
      rhs += w * target * xp;
    }
    Eigen::RowVectorXd row = d_mat.row(i);
    solve_row(gram, rhs, row);
    d_mat.row(i) = row;
  }
  for (int i = 0; i < k_x && k_z > 0; ++i) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k_z, k_z);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k_z);
    for (int l = 1; l < n; ++l) {
      const double w = ex.lam(l, i);
      gram += w * second[static_cast<std::size_t>(l - 1)];
      const double target =
          x.values(l, i) - b.row(i).dot(x.values.row(l - 1)) - ex.mut(l, i);
      rhs += w * target * st.mean.row(l - 1).transpose();
    }
    Eigen::RowVectorXd row = c_mat.row(i);
    solve_row(gram, rhs, row);
    c_mat.row(i) = row;
  }
  for (int i = 0; i < k_x; ++i) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k_x, k_x);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k_x);
    for (int l = 1; l < n; ++l) {
      const double w = ex.lam(l, i);
      const Eigen::VectorXd xp = x.values.row(l - 1).transpose();
      gram += w * xp * xp.transpose();
      double target = x.values(l, i) - ex.mut(l, i);
      if (k_z > 0) target -= c_mat.row(i).dot(st.mean.row(l - 1));
      rhs += w * target * xp;
    }
    Eigen::RowVectorXd row = b.row(i);
    solve_row(gram, rhs, row);
    b.row(i) = row;
  }

  next.A.topLeftCorner(k_x, k_x) = b;
  next.A.topRightCorner(k_x, k_z) = c_mat;
  next.A.bottomLeftCorner(k_z, k_x) = d_mat;
  next.A.bottomRightCorner(k_z, k_z) = e_mat;
  if (info) *info = local;
  return next;
}

double elbo(const TimeSeriesSample& x, const VemParams& theta,
            const VemPosterior& posterior) {
  theta.validate();
  const int n = x.length();
  const int k_x = theta.k_x;
  const int k_z = theta.k_z;
  const StateMoments& st = posterior.states;
  const IndicatorMarginals& q = posterior.indicators;
  const Eigen::MatrixXd b = theta.b();
  const Eigen::MatrixXd c_mat = theta.c();
  const Eigen::MatrixXd d_mat = theta.d();
  const Eigen::MatrixXd e_mat = theta.e();
  const double log2pi = std::log(2.0 * M_PI);

  double value = 0.0;
  auto check = [&](double term, const char* label) {
    if (!std::isfinite(term)) {
      throw Error(ErrorKind::numeric, std::string("non-finite ELBO term: ") + label);
    }
    value += term;
  };

  std::vector<Eigen::MatrixXd> second;
  if (k_z > 0) {
    second.resize(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) second[static_cast<std::size_t>(l)] = marginal_second(st, l);
  }

  for (int i = 0; i < k_x; ++i) {
    const GmmChannel& ch = theta.noise[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd& qi = q.q_x[static_cast<std::size_t>(i)];
    double t_pi = 0.0, t_lik = 0.0, t_ent = 0.0;
    for (int c = 0; c < ch.components(); ++c) {
      const double s2 = ch.variances(c);
      for (int l = 0; l < n; ++l) {
        const double qc = qi(l, c);
        t_pi += xlogy(qc, ch.weights(c));
        t_ent += entropy_term(qc);
        if (qc <= 0.0) continue;
        double r, var_term = 0.0;
        if (l == 0) {
          r = x.values(0, i) - ch.means(c);
        } else {
          r = x.values(l, i) - b.row(i).dot(x.values.row(l - 1)) - ch.means(c);
          if (k_z > 0) {
            r -= c_mat.row(i).dot(st.mean.row(l - 1));
            var_term = c_mat.row(i) * st.cov[static_cast<std::size_t>(l - 1)] *
                       c_mat.row(i).transpose();
          }
        }
        t_lik += qc * (-0.5) * ((r * r + var_term) / s2 + log2pi + std::log(s2));
      }
    }
    check(t_pi, "x mixture prior");
    check(t_lik, "x likelihood");
    check(t_ent, "x indicator entropy");
  }

  for (int i = 0; i < k_z; ++i) {
    const GmmChannel& ch = theta.noise[static_cast<std::size_t>(k_x + i)];
    const Eigen::MatrixXd& qi = q.q_z[static_cast<std::size_t>(i)];
    double t_pi = 0.0, t_lik = 0.0, t_ent = 0.0;
    for (int c = 0; c < ch.components(); ++c) {
      const double s2 = ch.variances(c);
      for (int l = 0; l < n; ++l) {
        const double qc = qi(l, c);
        t_pi += xlogy(qc, ch.weights(c));
        t_ent += entropy_term(qc);
        if (qc <= 0.0) continue;
        double r;
        if (l == 0) {
          r = second[0](i, i) - 2.0 * ch.means(c) * st.mean(0, i) +
              ch.means(c) * ch.means(c);
        } else {
          const double a = d_mat.row(i).dot(x.values.row(l - 1)) + ch.means(c);
          const Eigen::RowVectorXd ei = e_mat.row(i);
          r = second[static_cast<std::size_t>(l)](i, i) -
              2.0 * ei.dot(cross_second(st, l).row(i)) +
              ei * second[static_cast<std::size_t>(l - 1)] * ei.transpose() -
              2.0 * a * (st.mean(l, i) - ei.dot(st.mean.row(l - 1))) + a * a;
        }
        t_lik += qc * (-0.5) * (r / s2 + log2pi + std::log(s2));
      }
    }
    check(t_pi, "z mixture prior");
    check(t_lik, "z likelihood");
    check(t_ent, "z indicator entropy");
  }

  check(st.entropy, "state entropy");
  return value;
}

void rescale_z_channels(VemParams& theta, const Eigen::VectorXd& scales,
                        VemPosterior* posterior) {
  const int k_x = theta.k_x;
  const int k_z = theta.k_z;
  if (scales.size() != k_z) {
    throw Error(ErrorKind::dimension, "one scale per Z channel required");
  }
  if ((scales.array() <= 0.0).any()) {
    throw Error(ErrorKind::validation, "scales must be positive");
  }
  if (k_z == 0) return;
  const Eigen::MatrixXd lam = scales.asDiagonal();
  const Eigen::MatrixXd lam_inv = scales.cwiseInverse().asDiagonal();
  theta.A.topRightCorner(k_x, k_z) = theta.c() * lam_inv;
  theta.A.bottomLeftCorner(k_z, k_x) = lam * theta.d();
  theta.A.bottomRightCorner(k_z, k_z) = lam * theta.e() * lam_inv;
  for (int i = 0; i < k_z; ++i) {
    GmmChannel& ch = theta.noise[static_cast<std::size_t>(k_x + i)];
    ch.means *= scales(i);
    ch.variances *= scales(i) * scales(i);
  }
  if (posterior) {
    StateMoments& st = posterior->states;
    const int n = st.length();
    st.mean = st.mean * lam;  // row-wise scale
    for (int l = 0; l < n; ++l) {
      st.cov[static_cast<std::size_t>(l)] =
          lam * st.cov[static_cast<std::size_t>(l)] * lam;
      st.cross_cov[static_cast<std::size_t>(l)] =
          lam * st.cross_cov[static_cast<std::size_t>(l)] * lam;
    }
    st.entropy += n * scales.array().log().sum();
  }
}

void normalize_z_gauge(VemParams& theta, VemPosterior* posterior) {
  if (theta.k_z == 0) return;
  Eigen::VectorXd scales(theta.k_z);
  for (int i = 0; i < theta.k_z; ++i) {
    const double tv =
        theta.noise[static_cast<std::size_t>(theta.k_x + i)].total_variance();
    scales(i) = 1.0 / std::sqrt(std::max(tv, kVarFloor));
  }
  rescale_z_channels(theta, scales, posterior);
}

VemRun fit_single(const TimeSeriesSample& x, const VemConfig& config) {
  TimeSeriesSample data = x;
  if (config.center) {
    data.values.rowwise() -= x.values.colwise().mean().eval();
  }
  VemRun run;
  run.params = init_params(data, config.k_z, config.components, config.seed);

  // Bootstrap the alternation with prior indicator marginals.
  IndicatorMarginals q;
  const int n = data.length();
  for (int i = 0; i < run.params.k_x; ++i) {
    q.q_x.push_back(run.params.noise[static_cast<std::size_t>(i)]
                        .weights.transpose()
                        .replicate(n, 1));
  }
  for (int i = 0; i < config.k_z; ++i) {
    q.q_z.push_back(run.params.noise[static_cast<std::size_t>(run.params.k_x + i)]
                        .weights.transpose()
                        .replicate(n, 1));
  }
  StateMoments states = e_step_states(data, run.params, q);

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iters; ++it) {
    q = e_step_indicators(data, run.params, states);
    states = e_step_states(data, run.params, q);
    VemPosterior posterior{q, states};
    run.params = m_step(data, run.params, posterior);
    normalize_z_gauge(run.params, &posterior);
    states = posterior.states;
    const double bound = elbo(data, run.params, posterior);
    run.trace.values.push_back(bound);
    run.trace.iterations = it + 1;
    if (config.verbose) {
      std::cerr << "vem iter " << (it + 1) << " elbo " << bound << " delta "
                << (bound - prev) << "\n";
    }
    if (!std::isfinite(config.tol)) {
      run.trace.converged = true;
      break;
    }
    if (it > 0 && std::abs(bound - prev) <= config.tol * (1.0 + std::abs(prev))) {
      run.trace.converged = true;
      prev = bound;
      break;
    }
    prev = bound;
  }
  run.posterior = VemPosterior{std::move(q), std::move(states)};
  return run;
}

FitResult fit(const TimeSeriesSample& x, const VemConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.restarts < 1) {
    throw Error(ErrorKind::validation, "need at least one restart");
  }
  FitResult out;
  std::string failures;
  bool have_best = false;
  VemRun best;
  for (int r = 0; r < config.restarts; ++r) {
    VemConfig c = config;
    c.seed = config.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(r);
    try {
      VemRun run = fit_single(x, c);
      out.traces.push_back(run.trace);
      if (!have_best || run.trace.values.back() > best.trace.values.back()) {
        best = std::move(run);
        have_best = true;
      }
    } catch (const Error& err) {
      failures += "restart " + std::to_string(r) + ": " + err.what() + "; ";
      out.traces.emplace_back();
    }
  }
  if (!have_best) {
    throw Error(ErrorKind::estimation, "all restarts failed: " + failures);
  }
  out.report.method = "vem";
  out.report.estimate = best.params.b();
  if (config.k_z > 0) out.report.c_estimate = best.params.c();
  out.report.final_elbo = best.trace.values.back();
  out.report.iterations = best.trace.iterations;
  out.report.note = failures;
  out.report.run_seed = config.seed;
  out.report.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  out.params = std::move(best.params);
  return out;
}

}  // namespace lcvar
