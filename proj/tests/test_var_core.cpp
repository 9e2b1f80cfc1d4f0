#include "lcvar/var_core.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracle_helpers.hpp"

using namespace lcvar;

TEST(SpectralRadius, KnownValues) {
  EXPECT_DOUBLE_EQ(spectral_radius(Eigen::MatrixXd::Identity(2, 2)), 1.0);

  // Upper-triangular example: eigenvalues are the diagonal entries.
  EXPECT_NEAR(spectral_radius(oracles::paper_example_system().A), 0.9, 1e-12);

  Eigen::MatrixXd rot(2, 2);
  rot << 0.0, 1.0, -0.25, 0.0;  // lambda^2 + 0.25 = 0, roots +-0.5i
  EXPECT_NEAR(spectral_radius(rot), 0.5, 1e-12);
}

TEST(SpectralRadius, RejectsNonSquare) {
  Eigen::MatrixXd m(2, 3);
  m.setZero();
  try {
    spectral_radius(m);
    FAIL() << "expected dimension error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::dimension);
  }
}

TEST(SampleStableVar, HonorsConstraints) {
  SampleConstraints c;
  c.d_zero = true;
  const VarParams p = sample_stable_var(1, 1, c, 7);
  EXPECT_EQ(p.k(), 2);
  EXPECT_DOUBLE_EQ(p.A(1, 0), 0.0);
  EXPECT_LT(spectral_radius(p.A), 0.95 + 1e-12);

  const VarParams q = sample_stable_var(2, 1, SampleConstraints{}, 9);
  EXPECT_EQ(q.k(), 3);
  EXPECT_LT(spectral_radius(q.A), 0.95 + 1e-12);
  EXPECT_TRUE(q.sigma.isDiagonal(1e-15));
}

TEST(SampleStableVar, DeterministicInSeed) {
  const VarParams a = sample_stable_var(2, 2, SampleConstraints{}, 1234);
  const VarParams b = sample_stable_var(2, 2, SampleConstraints{}, 1234);
  EXPECT_EQ((a.A - b.A).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.sigma - b.sigma).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulate, NoDynamicsGivesIidNoise) {
  VarParams p;
  p.A = Eigen::MatrixXd::Zero(2, 2);
  p.sigma = Eigen::MatrixXd::Identity(2, 2);
  p.k_x = 2;
  p.k_z = 0;
  const TimeSeriesSample w = simulate(p, 20000, 5);
  const AutocovSequence g = sample_autocov(w, 1);
  EXPECT_LT((g.gamma(0) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT(g.gamma(1).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Simulate, MatchesAnalyticAutocov) {
  // Gamma_0 entries reach ~71 for this system, so the 0.05 band is relative.
  const VarParams p = oracles::paper_example_system();
  const TimeSeriesSample w = simulate(p, 100000, 11);
  const TimeSeriesSample x = observed_part(w, 2);
  const AutocovSequence sample_g = sample_autocov(x, 0);
  const AutocovSequence analytic = analytic_autocov(p, 0).head_block(2);
  const double rel = (sample_g.gamma(0) - analytic.gamma(0)).cwiseAbs().maxCoeff() /
                     analytic.gamma(0).cwiseAbs().maxCoeff();
  EXPECT_LT(rel, 0.05);
}

TEST(Simulate, DeterministicInSeed) {
  const VarParams p = sample_stable_var(2, 1, SampleConstraints{}, 3);
  const TimeSeriesSample a = simulate(p, 100, 42);
  const TimeSeriesSample b = simulate(p, 100, 42);
  EXPECT_EQ((a.values - b.values).cwiseAbs().maxCoeff(), 0.0);

  const GmmNoiseModel noise = super_gaussian_mixture(3);
  const TimeSeriesSample c = simulate(p, noise, 100, 42);
  const TimeSeriesSample d = simulate(p, noise, 100, 42);
  EXPECT_EQ((c.values - d.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulate, RejectsUnstableSystem) {
  VarParams p;
  p.A = 1.2 * Eigen::MatrixXd::Identity(2, 2);
  p.sigma = Eigen::MatrixXd::Identity(2, 2);
  p.k_x = 1;
  p.k_z = 1;
  try {
    simulate(p, 10, 0);
    FAIL() << "expected model error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::model);
  }
}

TEST(AnalyticAutocov, ScalarClosedForm) {
  VarParams p;
  p.A = Eigen::MatrixXd::Constant(1, 1, 0.5);
  p.sigma = Eigen::MatrixXd::Identity(1, 1);
  p.k_x = 1;
  p.k_z = 0;
  const AutocovSequence g = analytic_autocov(p, 1);
  EXPECT_NEAR(g.gamma(0)(0, 0), 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(g.gamma(1)(0, 0), 2.0 / 3.0, 1e-12);
}

TEST(AnalyticAutocov, CoupledBlockClosedForm) {
  VarParams p;
  p.A.resize(2, 2);
  p.A << 0.5, 0.5, 0.0, 0.5;
  p.sigma = Eigen::MatrixXd::Identity(2, 2);
  p.k_x = 1;
  p.k_z = 1;
  const AutocovSequence g = analytic_autocov(p, 0);
  Eigen::MatrixXd expected(2, 2);
  expected << 56.0 / 27.0, 4.0 / 9.0, 4.0 / 9.0, 4.0 / 3.0;
  EXPECT_LT((g.gamma(0) - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AnalyticAutocov, ZeroDynamics) {
  VarParams p;
  p.A = Eigen::MatrixXd::Zero(2, 2);
  p.sigma = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.k_x = 2;
  p.k_z = 0;
  const AutocovSequence g = analytic_autocov(p, 2);
  EXPECT_LT((g.gamma(0) - p.sigma).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(g.gamma(1).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(g.gamma(2).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AnalyticAutocov, LyapunovResidualProperty) {
  for (int seed = 0; seed < 100; ++seed) {
    const int k_x = 1 + seed % 3;
    const int k_z = seed % (k_x + 1);
    const VarParams p =
        sample_stable_var(k_x, k_z, SampleConstraints{}, 1000 + seed);
    const AutocovSequence g = analytic_autocov(p, 0);
    const Eigen::MatrixXd resid = g.gamma(0) - p.A * g.gamma(0) * p.A.transpose() - p.sigma;
    EXPECT_LT(resid.cwiseAbs().maxCoeff(), 1e-10) << "seed " << seed;
  }
}

TEST(SampleAutocov, ConstantSeriesGivesZero) {
  TimeSeriesSample s;
  s.values = Eigen::MatrixXd::Constant(50, 2, 3.25);
  const AutocovSequence g = sample_autocov(s, 2);
  for (int lag = 0; lag <= 2; ++lag) {
    EXPECT_EQ(g.gamma(lag).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(SampleAutocov, IidNormalVarianceBand) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TimeSeriesSample s;
  s.values.resize(100000, 1);
  for (int i = 0; i < s.length(); ++i) s.values(i, 0) = gauss(rng);
  const AutocovSequence g = sample_autocov(s, 0);
  EXPECT_GT(g.gamma(0)(0, 0), 0.97);
  EXPECT_LT(g.gamma(0)(0, 0), 1.03);
}

TEST(SampleAutocov, RejectsShortSeries) {
  TimeSeriesSample s;
  s.values = Eigen::MatrixXd::Zero(4, 1);
  try {
    sample_autocov(s, 3);
    FAIL() << "expected insufficient-data error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::insufficient_data);
  }
}

TEST(SampleAutocov, ConvergesToAnalytic) {
  const VarParams p = oracles::paper_example_system();
  const TimeSeriesSample x = observed_part(simulate(p, 1000000, 23), 2);
  const AutocovSequence sample_g = sample_autocov(x, 3);
  const AutocovSequence analytic = analytic_autocov(p, 3).head_block(2);
  const double scale = analytic.gamma(0).cwiseAbs().maxCoeff();
  for (int lag = 0; lag <= 3; ++lag) {
    const double rel =
        (sample_g.gamma(lag) - analytic.gamma(lag)).cwiseAbs().maxCoeff() / scale;
    EXPECT_LT(rel, 0.02) << "lag " << lag;
  }
}

TEST(SampleAutocov, ConsistencyImprovementInMedian) {
  const VarParams p = sample_stable_var(2, 1, SampleConstraints{}, 99);
  const AutocovSequence analytic = analytic_autocov(p, 2).head_block(2);
  std::vector<double> med_errs;
  for (int length : {1000, 10000, 100000}) {
    std::vector<double> errs;
    for (int seed = 0; seed < 20; ++seed) {
      const TimeSeriesSample x =
          observed_part(simulate(p, length, 5000 + seed), 2);
      const AutocovSequence g = sample_autocov(x, 2);
      double err = 0.0;
      for (int lag = 0; lag <= 2; ++lag) {
        err = std::max(err, (g.gamma(lag) - analytic.gamma(lag)).cwiseAbs().maxCoeff());
      }
      errs.push_back(err);
    }
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    med_errs.push_back(errs[10]);
  }
  EXPECT_GT(med_errs[0], med_errs[1]);
  EXPECT_GT(med_errs[1], med_errs[2]);
}

TEST(GmmNoise, SuperGaussianMomentsWithinThreeStandardErrors) {
  const GmmNoiseModel noise = super_gaussian_mixture(2);
  VarParams p;
  p.A = Eigen::MatrixXd::Zero(2, 2);
  p.sigma = Eigen::MatrixXd::Identity(2, 2);
  p.k_x = 2;
  p.k_z = 0;
  const int n = 200000;
  const TimeSeriesSample w = simulate(p, noise, n, 31);
  // Targets: mean 0, variance 1; fourth moment 9.75 fixes the variance SE.
  const double se_mean = 1.0 / std::sqrt(static_cast<double>(n));
  const double se_var = std::sqrt((9.75 - 1.0) / static_cast<double>(n));
  for (int i = 0; i < 2; ++i) {
    const double mean = w.values.col(i).mean();
    const double var = (w.values.col(i).array() - mean).square().mean();
    EXPECT_LT(std::abs(mean - 0.0), 3.0 * se_mean);
    EXPECT_LT(std::abs(var - 1.0), 3.0 * se_var);
  }
}
