#include "lcvar/var_core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

namespace lcvar {

namespace {

constexpr int kBurnIn = 1000;
constexpr double kStabilityMargin = 0.95;

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::dimension, "spectral radius needs a square matrix");
  }
  if (!m.allFinite()) {
    throw Error(ErrorKind::validation, "matrix contains non-finite entries");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::numeric, "eigensolver did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

VarParams sample_stable_var(int k_x, int k_z, const SampleConstraints& constraints,
                            std::uint64_t seed) {
  if (k_x < 1 || k_z < 0 || k_z > k_x) {
    throw Error(ErrorKind::validation, "need 1 <= k_x and 0 <= k_z <= k_x");
  }
  const int k = k_x + k_z;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> rho_target(0.2, kStabilityMargin);
  std::uniform_real_distribution<double> sig_diag(0.5, 1.5);

  constexpr int kBudget = 100;
  for (int attempt = 0; attempt < kBudget; ++attempt) {
    Eigen::MatrixXd a(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) a(i, j) = unit(rng);
    }
    if (constraints.d_zero && k_z > 0) {
      a.bottomLeftCorner(k_z, k_x).setZero();
    }
    const double rho = spectral_radius(a);
    if (rho < 1e-12) continue;  // degenerate draw, retry
    a *= rho_target(rng) / rho;

    Eigen::MatrixXd sigma;
    if (constraints.diagonal_sigma) {
      Eigen::VectorXd diag(k);
      for (int i = 0; i < k; ++i) diag(i) = sig_diag(rng);
      sigma = diag.asDiagonal();
    } else {
      Eigen::MatrixXd g(k, k);
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) g(i, j) = unit(rng);
      }
      sigma = g * g.transpose() / static_cast<double>(k) +
              0.1 * Eigen::MatrixXd::Identity(k, k);
    }

    VarParams p;
    p.A = a;
    p.sigma = sigma;
    p.k_x = k_x;
    p.k_z = k_z;
    p.validate();
    return p;
  }
  throw Error(ErrorKind::sampling,
              "no usable system in " + std::to_string(kBudget) + " attempts");
}

GmmNoiseModel super_gaussian_mixture(int dims) {
  // pi = (0.8, 0.2), sigma = (0.5, 2.0) rescaled to unit total variance.
  Eigen::VectorXd w(2), mu(2), v(2);
  w << 0.8, 0.2;
  mu << 0.0, 0.0;
  v << 0.25, 4.0;
  const double tv = w.dot(v);
  v /= tv;
  GmmNoiseModel model;
  model.channels.assign(static_cast<std::size_t>(dims), GmmChannel{w, mu, v});
  model.validate();
  return model;
}

GmmNoiseModel gaussian_noise(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) {
    throw Error(ErrorKind::dimension, "sigma must be square");
  }
  if (!sigma.isDiagonal(1e-12)) {
    throw Error(ErrorKind::validation,
                "per-channel mixture noise requires diagonal sigma");
  }
  GmmNoiseModel model;
  for (int i = 0; i < sigma.rows(); ++i) {
    Eigen::VectorXd w(1), mu(1), v(1);
    w << 1.0;
    mu << 0.0;
    v << sigma(i, i);
    model.channels.push_back(GmmChannel{w, mu, v});
  }
  model.validate();
  return model;
}

namespace {

TimeSeriesSample run_simulation(const VarParams& params, int length, std::uint64_t seed,
                                const GmmNoiseModel* gmm) {
  params.validate();
  if (length < 1) {
    throw Error(ErrorKind::validation, "simulation length must be >= 1");
  }
  if (spectral_radius(params.A) >= 1.0) {
    throw Error(ErrorKind::model, "transition matrix is not stable");
  }
  const int k = params.k();
  if (gmm && gmm->dims() != k) {
    throw Error(ErrorKind::dimension, "noise model channel count must equal K");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::MatrixXd chol;
  if (!gmm) {
    Eigen::LLT<Eigen::MatrixXd> llt(
        params.sigma + 1e-14 * Eigen::MatrixXd::Identity(k, k));
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::numeric, "Cholesky of sigma failed");
    }
    chol = llt.matrixL();
  }

  auto draw_noise = [&](Eigen::VectorXd& n) {
    if (gmm) {
      for (int i = 0; i < k; ++i) {
        const GmmChannel& ch = gmm->channels[static_cast<std::size_t>(i)];
        double u = unif(rng);
        int c = 0;
        double acc = ch.weights(0);
        while (u > acc && c + 1 < ch.components()) acc += ch.weights(++c);
        n(i) = ch.means(c) + std::sqrt(ch.variances(c)) * gauss(rng);
      }
    } else {
      for (int i = 0; i < k; ++i) n(i) = gauss(rng);
      n = (chol * n).eval();
    }
  };

  TimeSeriesSample out;
  out.values.resize(length, k);
  out.seed = seed;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd n(k);
  for (int t = 0; t < kBurnIn + length; ++t) {
    draw_noise(n);
    w = params.A * w + n;
    if (t >= kBurnIn) out.values.row(t - kBurnIn) = w.transpose();
  }
  return out;
}

}  // namespace

TimeSeriesSample simulate(const VarParams& params, int length, std::uint64_t seed) {
  return run_simulation(params, length, seed, nullptr);
}

TimeSeriesSample simulate(const VarParams& params, const GmmNoiseModel& noise,
                          int length, std::uint64_t seed) {
  noise.validate();
  return run_simulation(params, length, seed, &noise);
}

TimeSeriesSample observed_part(const TimeSeriesSample& w, int k_x) {
  if (k_x < 1 || k_x > w.dims()) {
    throw Error(ErrorKind::dimension, "observed channel count out of range");
  }
  TimeSeriesSample out;
  out.values = w.values.leftCols(k_x);
  out.seed = w.seed;
  if (!w.labels.empty()) {
    out.labels.assign(w.labels.begin(), w.labels.begin() + k_x);
  }
  return out;
}

AutocovSequence analytic_autocov(const VarParams& params, int max_lag) {
  params.validate();
  if (max_lag < 0) {
    throw Error(ErrorKind::validation, "max_lag must be >= 0");
  }
  if (spectral_radius(params.A) >= 1.0) {
    throw Error(ErrorKind::model, "analytic autocovariance needs a stable system");
  }
  const int k = params.k();
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(k * k, k * k) - kron(params.A, params.A);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  const double rcond = lu.rcond();
  if (!lu.isInvertible() || rcond < 1e-14) {
    throw Error(ErrorKind::conditioning, "I - A (x) A is numerically singular");
  }
  Eigen::VectorXd vec_sigma(Eigen::Map<const Eigen::VectorXd>(params.sigma.data(), k * k));
  Eigen::VectorXd vec_g0 = lu.solve(vec_sigma);
  Eigen::MatrixXd g0 = Eigen::Map<Eigen::MatrixXd>(vec_g0.data(), k, k);
  g0 = 0.5 * (g0 + g0.transpose().eval());

  AutocovSequence out;
  out.source = AutocovSequence::Source::analytic;
  out.gammas.push_back(g0);
  for (int i = 1; i <= max_lag; ++i) {
    out.gammas.push_back(params.A * out.gammas.back());
  }
  out.validate();
  return out;
}

AutocovSequence sample_autocov(const TimeSeriesSample& x, int max_lag) {
  x.validate();
  if (max_lag < 0) {
    throw Error(ErrorKind::validation, "max_lag must be >= 0");
  }
  const int n = x.length();
  if (n <= max_lag + 1) {
    throw Error(ErrorKind::insufficient_data,
                "need L > max_lag + 1, got L = " + std::to_string(n));
  }
  const int d = x.dims();
  const Eigen::RowVectorXd mean = x.values.colwise().mean();
  Eigen::MatrixXd centered = x.values.rowwise() - mean;

  AutocovSequence out;
  out.source = AutocovSequence::Source::sample;
  for (int lag = 0; lag <= max_lag; ++lag) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    for (int t = lag; t < n; ++t) {
      g.noalias() += centered.row(t).transpose() * centered.row(t - lag);
    }
    g /= static_cast<double>(n);
    if (lag == 0) g = 0.5 * (g + g.transpose().eval());
    out.gammas.push_back(std::move(g));
  }
  out.validate();
  return out;
}

}  // namespace lcvar
