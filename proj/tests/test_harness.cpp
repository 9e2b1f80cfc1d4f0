#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "lcvar/csv.hpp"
#include "lcvar/experiment.hpp"
#include "lcvar/metrics.hpp"
#include "lcvar/var_core.hpp"

using namespace lcvar;

namespace {

Eigen::MatrixXd scalar_mat(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

std::filesystem::path temp_csv_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(Rmse, KnownValues) {
  std::vector<Eigen::MatrixXd> est = {scalar_mat(0.5), scalar_mat(0.3)};
  EXPECT_DOUBLE_EQ(rmse(est, est), 0.0);
  EXPECT_NEAR(rmse({scalar_mat(0.6)}, {scalar_mat(0.5)}), 0.1, 1e-15);
  try {
    rmse({scalar_mat(1.0)}, {Eigen::MatrixXd::Zero(2, 2)});
    FAIL() << "expected dimension error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::dimension);
  }
}

TEST(BestCandidate, PicksArgminAndBreaksTiesLow) {
  const auto [idx, mat] = best_candidate({scalar_mat(0.5), scalar_mat(0.3)}, scalar_mat(0.5));
  EXPECT_EQ(idx, 0);
  EXPECT_DOUBLE_EQ(mat(0, 0), 0.5);

  const auto [tie_idx, tie] =
      best_candidate({scalar_mat(0.4), scalar_mat(0.6)}, scalar_mat(0.5));
  EXPECT_EQ(tie_idx, 0);

  std::vector<Eigen::MatrixXd> diags = {
      Eigen::Vector2d(1, 3).asDiagonal(), Eigen::Vector2d(1, 4).asDiagonal(),
      Eigen::Vector2d(2, 3).asDiagonal(), Eigen::Vector2d(2, 4).asDiagonal()};
  const Eigen::MatrixXd truth = Eigen::Vector2d(1, 3).asDiagonal();
  EXPECT_EQ(best_candidate(diags, truth).first, 0);

  try {
    best_candidate({}, scalar_mat(0.0));
    FAIL() << "expected validation error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::validation);
  }
}

TEST(BestCandidate, NeverWorseThanAnyFixedIndex) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Eigen::MatrixXd> cands;
    for (int c = 0; c < 4; ++c) {
      Eigen::MatrixXd m(2, 2);
      for (int i = 0; i < 4; ++i) m(i / 2, i % 2) = gauss(rng);
      cands.push_back(m);
    }
    Eigen::MatrixXd truth(2, 2);
    for (int i = 0; i < 4; ++i) truth(i / 2, i % 2) = gauss(rng);
    const double best_err = (best_candidate(cands, truth).second - truth).norm();
    for (const auto& c : cands) {
      EXPECT_LE(best_err, (c - truth).norm() + 1e-15);
    }
  }
}

TEST(MatchCColumns, ScaleAndPermutationBlind) {
  Eigen::MatrixXd c(3, 2);
  c << 1.0, 0.0, 2.0, 1.0, 0.0, -1.0;
  EXPECT_NEAR(match_c_columns(2.0 * c, c), 0.0, 1e-12);

  Eigen::MatrixXd swapped(3, 2);
  swapped << 0.0, 1.0, 1.0, 2.0, -1.0, 0.0;
  EXPECT_NEAR(match_c_columns(swapped, c), 0.0, 1e-12);

  Eigen::MatrixXd e1(2, 1), e2(2, 1);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  EXPECT_NEAR(match_c_columns(e1, e2), 1.0, 1e-12);

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 1);
  EXPECT_NEAR(match_c_columns(zero, zero), 0.0, 1e-12);
  EXPECT_NEAR(match_c_columns(e1, zero), 1.0, 1e-12);

  try {
    match_c_columns(e1, c);
    FAIL() << "expected dimension error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::dimension);
  }
}

TEST(IngestCsv, ParsesRectangularFile) {
  const auto path = temp_csv_path("lcvar_ingest.csv");
  {
    std::ofstream out(path);
    out << "cheese,butter,milk\n";
    for (int i = 0; i < 340; ++i) {
      out << (1.0 + i) << "," << (2.0 + i) << "," << (3.0 + i) << "\n";
    }
  }
  const TimeSeriesSample s = ingest_csv(path.string(), false);
  EXPECT_EQ(s.length(), 340);
  EXPECT_EQ(s.dims(), 3);
  EXPECT_EQ(s.labels[0], "cheese");
  EXPECT_DOUBLE_EQ(s.values(339, 2), 342.0);

  const TimeSeriesSample centered = ingest_csv(path.string(), true);
  EXPECT_LT(centered.values.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  std::filesystem::remove(path);
}

TEST(IngestCsv, HeaderOnlyFails) {
  const auto path = temp_csv_path("lcvar_header_only.csv");
  {
    std::ofstream out(path);
    out << "a,b\n";
  }
  try {
    ingest_csv(path.string(), false);
    FAIL() << "expected parse error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::parse);
  }
  std::filesystem::remove(path);
}

TEST(IngestCsv, RaggedAndNonNumericCarryLineNumbers) {
  const auto path = temp_csv_path("lcvar_ragged.csv");
  {
    std::ofstream out(path);
    out << "a,b\n1.0,2.0\n3.0\n";
  }
  try {
    ingest_csv(path.string(), false);
    FAIL() << "expected parse error";
  } catch (const Error& err) {
    EXPECT_NE(std::string(err.what()).find("line 3"), std::string::npos);
  }
  {
    std::ofstream out(path);
    out << "a,b\n1.0,x\n";
  }
  try {
    ingest_csv(path.string(), false);
    FAIL() << "expected parse error";
  } catch (const Error& err) {
    EXPECT_NE(std::string(err.what()).find("line 2"), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(IngestCsv, RoundTripPreservesValues) {
  const VarParams p = sample_stable_var(2, 1, SampleConstraints{}, 9);
  TimeSeriesSample w = simulate(p, 100, 10);
  w.labels = {"x1", "x2", "z1"};
  const auto path = temp_csv_path("lcvar_roundtrip.csv");
  write_csv_file(path.string(), w);
  const TimeSeriesSample back = read_csv_file(path.string());
  EXPECT_EQ(back.length(), w.length());
  EXPECT_EQ(back.labels, w.labels);
  EXPECT_EQ((back.values - w.values).cwiseAbs().maxCoeff(), 0.0);
  std::filesystem::remove(path);
}

TEST(DeriveSeed, DeterministicAndCellDistinct) {
  EXPECT_EQ(derive_seed(1, 100, 0), derive_seed(1, 100, 0));
  EXPECT_NE(derive_seed(1, 100, 0), derive_seed(1, 100, 1));
  EXPECT_NE(derive_seed(1, 100, 0), derive_seed(1, 1000, 0));
  EXPECT_NE(derive_seed(1, 100, 0), derive_seed(2, 100, 0));
}

TEST(RunExperiment, ZeroRunsRejected) {
  ExperimentConfig c = ExperimentConfig::fig1();
  c.runs = 0;
  try {
    run_experiment(c);
    FAIL() << "expected validation error";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::validation);
  }
}

TEST(RunExperiment, Fig1MiniTrendAndErrorRows) {
  ExperimentConfig c = ExperimentConfig::fig1();
  c.lengths = {100, 1000, 10000};
  c.runs = 5;
  c.master_seed = 11;
  const ExperimentResults res = run_experiment(c);
  EXPECT_EQ(res.rows.size(), 3u * 5u * 2u);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& entry : res.summary["per_length"]) {
    ASSERT_TRUE(entry["cov"]["rmse"].is_number());
    const double cur = entry["cov"]["rmse"].get<double>();
    if (entry["length"].get<int>() >= 1000) {
      EXPECT_LT(cur, prev);
    }
    prev = cur;
  }
}

TEST(RunExperiment, ByteIdenticalReruns) {
  ExperimentConfig c = ExperimentConfig::fig1();
  c.lengths = {100, 1000};
  c.runs = 3;
  c.master_seed = 77;
  const std::string csv_a = run_experiment(c).csv();
  const std::string csv_b = run_experiment(c).csv();
  EXPECT_EQ(csv_a, csv_b);
  EXPECT_NE(csv_a.find("scenario,length,run,method"), std::string::npos);
}

TEST(RunExperiment, MedianBestErrorNonIncreasingAcrossSweeps) {
  int monotone = 0;
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    ExperimentConfig c = ExperimentConfig::fig1();
    c.lengths = {1000, 10000, 100000};
    c.runs = 9;
    c.estimators = {"cov"};
    c.master_seed = 500 + rep;
    const ExperimentResults res = run_experiment(c);
    std::vector<double> medians;
    for (int length : c.lengths) {
      std::vector<double> errs;
      for (const auto& row : res.rows) {
        if (row.length == length && row.status == "ok") errs.push_back(row.fro_error);
      }
      if (errs.empty()) {
        medians.push_back(std::numeric_limits<double>::infinity());
        continue;
      }
      std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
      medians.push_back(errs[errs.size() / 2]);
    }
    if (medians[0] >= medians[1] && medians[1] >= medians[2]) ++monotone;
  }
  EXPECT_GE(monotone, 9) << "of " << reps;
}

#include "lcvar/cov_estimator.hpp"
#include "lcvar/json_io.hpp"

TEST(JsonIo, VarParamsBlockNamesRoundTrip) {
  const VarParams p = sample_stable_var(2, 1, SampleConstraints{}, 33);
  const Json j = to_json(p);
  for (const char* key : {"B", "C", "D", "E", "sigma"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const VarParams back = var_params_from_json(j);
  EXPECT_EQ(back.k_x, p.k_x);
  EXPECT_EQ(back.k_z, p.k_z);
  EXPECT_LT((back.A - p.A).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((back.sigma - p.sigma).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(JsonIo, NoiseModelRoundTrip) {
  const GmmNoiseModel noise = super_gaussian_mixture(3);
  const GmmNoiseModel back = noise_from_json(to_json(noise));
  ASSERT_EQ(back.dims(), 3);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT((back.channels[i].weights - noise.channels[i].weights).cwiseAbs().maxCoeff(),
              1e-15);
    EXPECT_LT((back.channels[i].variances - noise.channels[i].variances)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
  }
}

TEST(JsonIo, SolventSetUsesReImPairs) {
  ResidualAnsatz a;
  a.u1 = Eigen::MatrixXd::Constant(1, 1, 0.2);
  a.u2 = Eigen::MatrixXd::Constant(1, 1, -0.5);  // roots 0.1 +- 0.7i
  const SolventSet s = enumerate_solvents(a);
  const Json j = to_json(s);
  ASSERT_EQ(j["latent_roots"].size(), 2u);
  EXPECT_TRUE(j["latent_roots"][0].contains("re"));
  EXPECT_TRUE(j["latent_roots"][0].contains("im"));
  EXPECT_NEAR(j["latent_roots"][1]["re"].get<double>(), 0.1, 1e-12);
  EXPECT_NEAR(std::abs(j["latent_roots"][1]["im"].get<double>()), 0.7, 1e-12);
  // Complex conjugate pair admits no real 1x1 solvent.
  EXPECT_TRUE(j["candidates"].empty());
}

#ifdef LCVAR_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LCVAR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Cli, EndToEndWorkflowAndExitCodes) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "lcvar_cli_smoke";
  fs::create_directories(dir);

  const VarParams p = sample_stable_var(2, 1, SampleConstraints{}, 55);
  write_json_file((dir / "system.json").string(),
                  system_to_json(p, super_gaussian_mixture(3)));

  EXPECT_EQ(run_cli("simulate --config " + (dir / "system.json").string() +
                    " --length 2000 --seed 7 --out " + (dir / "x.csv").string()),
            0);
  EXPECT_EQ(run_cli("granger " + (dir / "x.csv").string() + " --out " +
                    (dir / "granger.json").string()),
            0);
  EXPECT_EQ(run_cli("estimate-cov " + (dir / "x.csv").string() + " --out " +
                    (dir / "cov.json").string()),
            0);
  EXPECT_EQ(run_cli("estimate-vem " + (dir / "x.csv").string() +
                    " --k-z 1 --restarts 1 --max-iters 30 --out " +
                    (dir / "vem.json").string()),
            0);
  EXPECT_EQ(run_cli("check " + (dir / "x.csv").string() + " --out " +
                    (dir / "check.json").string()),
            0);

  const Json granger = read_json_file((dir / "granger.json").string());
  EXPECT_TRUE(granger.contains("B_pG"));
  const Json vem = read_json_file((dir / "vem.json").string());
  EXPECT_TRUE(vem.contains("estimate"));
  EXPECT_TRUE(vem.contains("C_estimate"));
  const Json check = read_json_file((dir / "check.json").string());
  EXPECT_TRUE(check.contains("independence"));

  // Validation failures exit 1.
  EXPECT_EQ(run_cli("granger " + (dir / "missing.csv").string()), 1);
  EXPECT_EQ(run_cli("bench"), 1);
  fs::remove_all(dir);
}
#endif

TEST(Rmse, CovSweepAtMillionSamples) {
  // Twenty scalar D = 0 systems at L = 1e6: aggregate best-candidate RMSE
  // sits well under 0.02. Draws near a G2 violation may legitimately yield
  // no real solvent; those become error rows, as in the bench harness.
  std::vector<Eigen::MatrixXd> est, truths;
  SampleConstraints constraints;
  constraints.d_zero = true;
  int failed = 0;
  for (int run = 0; run < 20; ++run) {
    const std::uint64_t seed = derive_seed(606, 1000000, run);
    VarParams system = sample_stable_var(1, 1, constraints, seed);
    system.sigma = Eigen::MatrixXd::Identity(2, 2);
    const TimeSeriesSample x =
        observed_part(simulate(system, 1000000, splitmix64(seed)), 1);
    const EstimationReport rep = estimate_cov(x);
    if (!rep.error_stage.empty() || rep.candidates.empty()) {
      ++failed;
      continue;
    }
    truths.push_back(system.b());
    est.push_back(best_candidate(rep.candidates, system.b()).second);
  }
  EXPECT_LE(failed, 2);
  EXPECT_LT(rmse(est, truths), 0.02);
}

TEST(RunExperiment, Fig2MiniVemPath) {
  ExperimentConfig c = ExperimentConfig::fig2();
  c.lengths = {200, 500};
  c.runs = 2;
  c.vem_restarts = 2;
  c.vem_max_iters = 60;
  c.master_seed = 9;
  const ExperimentResults res = run_experiment(c);
  EXPECT_EQ(res.rows.size(), 2u * 2u * 2u);
  int vem_ok = 0;
  for (const auto& row : res.rows) {
    if (row.method == "vem" && row.status == "ok") ++vem_ok;
  }
  EXPECT_GE(vem_ok, 3);
}
