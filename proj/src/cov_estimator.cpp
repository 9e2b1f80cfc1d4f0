#include "lcvar/cov_estimator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "lcvar/var_core.hpp"

namespace lcvar {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kRankTolRel = 1e-12;
constexpr double kCollinearCondLimit = 1e10;

struct AnsatzSystem {
  Eigen::MatrixXd m;     // 2K x 2K block matrix [[G1, G2], [G0, G1]]
  Eigen::MatrixXd rhs;   // K x 2K, (G2, G3)
  Eigen::MatrixXd gram;  // 2K x 2K Cov((x_{t-1}; x_{t-2})) = [[G0, G1], [G1^T, G0]]
  Eigen::MatrixXd gvec;  // K x 2K, Cov(x_t, (x_{t-1}; x_{t-2})) = (G1, G2)
};

AnsatzSystem build_system(const AutocovSequence& g) {
  const int k = g.dim();
  AnsatzSystem s;
  s.m.resize(2 * k, 2 * k);
  s.m.topLeftCorner(k, k) = g.gamma(1);
  s.m.topRightCorner(k, k) = g.gamma(2);
  s.m.bottomLeftCorner(k, k) = g.gamma(0);
  s.m.bottomRightCorner(k, k) = g.gamma(1);
  s.rhs.resize(k, 2 * k);
  s.rhs.leftCols(k) = g.gamma(2);
  s.rhs.rightCols(k) = g.gamma(3);
  s.gram.resize(2 * k, 2 * k);
  s.gram.topLeftCorner(k, k) = g.gamma(0);
  s.gram.topRightCorner(k, k) = g.gamma(1);
  s.gram.bottomLeftCorner(k, k) = g.gamma(1).transpose();
  s.gram.bottomRightCorner(k, k) = g.gamma(0);
  s.gvec.resize(k, 2 * k);
  s.gvec.leftCols(k) = g.gamma(1);
  s.gvec.rightCols(k) = g.gamma(2);
  return s;
}

}  // namespace

ResidualAnsatz solve_ansatz(const AutocovSequence& x_gammas) {
  x_gammas.validate();
  if (x_gammas.max_lag() < 3) {
    throw Error(ErrorKind::validation, "ansatz needs Gamma_0 .. Gamma_3");
  }
  const int k = x_gammas.dim();
  const AnsatzSystem sys = build_system(x_gammas);

  // Row-wise system M^T u_i = rhs_i^T for each row u_i of (U1, U2).
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.m.transpose(),
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  const double cond =
      smin <= 0.0 ? std::numeric_limits<double>::infinity() : smax / smin;

  const double rank_tol = smax * kRankTolRel;
  int rank = 0;
  while (rank < sv.size() && sv(rank) > rank_tol) ++rank;

  ResidualAnsatz out;
  out.condition = cond;
  out.effective_rank = rank;
  out.rank_deficient = rank < 2 * k;
  Eigen::MatrixXd u_rows(k, 2 * k);

  if (!out.rank_deficient && cond < kMaxCondition) {
    for (int i = 0; i < k; ++i) {
      u_rows.row(i) = svd.solve(sys.rhs.row(i).transpose()).transpose();
    }
  } else {
    // Rank-deficient (or extremely ill-conditioned) block matrix: the solution
    // family of the moment equations is an affine subspace. Pick the member
    // minimizing the residual variance E|x_t - U1 x_{t-1} - U2 x_{t-2}|^2,
    // which reduces to the unique solution whenever the matrix is regular.
    const Eigen::MatrixXd u_basis = svd.matrixU();  // columns: left sv of M^T
    const Eigen::MatrixXd v_basis = svd.matrixV();
    const int null_dim = 2 * k - rank;
    const Eigen::MatrixXd n_basis = v_basis.rightCols(null_dim);
    double defect = 0.0;
    for (int i = 0; i < k; ++i) {
      const Eigen::VectorXd c = sys.rhs.row(i).transpose();
      // Minimum-norm least-squares particular solution on the row space.
      Eigen::VectorXd u0 = Eigen::VectorXd::Zero(2 * k);
      for (int r = 0; r < rank; ++r) {
        u0 += v_basis.col(r) * (u_basis.col(r).dot(c) / sv(r));
      }
      defect = std::max(defect, (sys.m.transpose() * u0 - c).cwiseAbs().maxCoeff());
      if (null_dim > 0) {
        const Eigen::VectorXd gv = sys.gvec.row(i).transpose();
        const Eigen::MatrixXd h = n_basis.transpose() * sys.gram * n_basis;
        const Eigen::VectorXd b = n_basis.transpose() * (gv - sys.gram * u0);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        if (ldlt.info() != Eigen::Success) {
          throw Error(ErrorKind::conditioning,
                      "degenerate lag covariance in ansatz completion");
        }
        u0 += n_basis * ldlt.solve(b);
      }
      u_rows.row(i) = u0.transpose();
    }
    const double scale = std::max(1.0, sys.rhs.cwiseAbs().maxCoeff());
    if (defect > 1e-6 * scale) {
      throw Error(ErrorKind::conditioning,
                  "ansatz system is rank deficient and inconsistent "
                  "(G1-type rank failure or too little data)");
    }
  }

  out.u1 = u_rows.leftCols(k);
  out.u2 = u_rows.rightCols(k);
  out.residual_norm = (u_rows * sys.m - sys.rhs).norm();
  if (!out.u1.allFinite() || !out.u2.allFinite()) {
    throw Error(ErrorKind::numeric, "ansatz solution is non-finite");
  }
  return out;
}

ResidualSeries compute_residual(const TimeSeriesSample& x, const ResidualAnsatz& ansatz) {
  x.validate();
  const int k = ansatz.k_x();
  if (x.dims() != k) {
    throw Error(ErrorKind::dimension, "ansatz dimension does not match the series");
  }
  if (x.length() < 3) {
    throw Error(ErrorKind::insufficient_data, "residual series needs L >= 3");
  }
  const int n = x.length();
  ResidualSeries r;
  r.values.resize(n - 2, k);
  for (int t = 2; t < n; ++t) {
    r.values.row(t - 2) = x.values.row(t) - x.values.row(t - 1) * ansatz.u1.transpose() -
                          x.values.row(t - 2) * ansatz.u2.transpose();
  }
  return r;
}

namespace {

Eigen::MatrixXd companion(const ResidualAnsatz& a) {
  const int k = a.k_x();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  c.topLeftCorner(k, k) = a.u1;
  c.topRightCorner(k, k) = a.u2;
  c.bottomLeftCorner(k, k) = Eigen::MatrixXd::Identity(k, k);
  return c;
}

bool almost_conjugate(std::complex<double> a, std::complex<double> b, double tol) {
  return std::abs(a - std::conj(b)) <= tol;
}

}  // namespace

std::vector<std::complex<double>> latent_roots(const ResidualAnsatz& ansatz) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion(ansatz), false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::numeric, "companion eigensolver did not converge");
  }
  std::vector<std::complex<double>> roots(es.eigenvalues().data(),
                                          es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(roots.begin(), roots.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return roots;
}

SolventSet enumerate_solvents(const ResidualAnsatz& ansatz, double solvent_tol) {
  const int k = ansatz.k_x();
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion(ansatz), true);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::numeric, "companion eigensolver did not converge");
  }
  const int n = 2 * k;
  Eigen::VectorXcd eval = es.eigenvalues();
  Eigen::MatrixXcd evec = es.eigenvectors();

  // Canonical order: ascending (re, im). Keeps the returned set independent
  // of the solver's internal ordering.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (eval(a).real() != eval(b).real()) return eval(a).real() < eval(b).real();
    return eval(a).imag() < eval(b).imag();
  });

  SolventSet out;
  out.latent_roots.reserve(n);
  for (int idx : order) out.latent_roots.push_back(eval(idx));

  const double scale = 1.0 + eval.cwiseAbs().maxCoeff();
  double min_sep = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      min_sep = std::min(min_sep, std::abs(eval(order[i]) - eval(order[j])));
    }
  }
  out.distinct_roots = min_sep > kRootSepTol * scale;
  if (!out.distinct_roots) {
    throw Error(ErrorKind::assumption,
                "latent roots are not pairwise distinct (G2 violated)");
  }

  const double conj_tol = 1e-7 * scale;

  // All K_X-subsets of the 2 K_X eigenpairs, in lexicographic order over the
  // canonical root order.
  std::vector<int> subset(k);
  std::vector<std::pair<Eigen::MatrixXd, double>> found;
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      // Conjugate closure: every complex root must bring its partner.
      for (int a = 0; a < k; ++a) {
        const std::complex<double> lam = eval(order[subset[a]]);
        if (std::abs(lam.imag()) <= conj_tol) continue;
        bool partnered = false;
        for (int b = 0; b < k && !partnered; ++b) {
          partnered = b != a && almost_conjugate(lam, eval(order[subset[b]]), conj_tol);
        }
        if (!partnered) return;
      }
      // Realified eigenbasis from the lower (w) components.
      Eigen::MatrixXd w_real(k, k);
      Eigen::MatrixXd lam_real = Eigen::MatrixXd::Zero(k, k);
      std::vector<bool> used(k, false);
      int col = 0;
      for (int a = 0; a < k; ++a) {
        if (used[a]) continue;
        const int idx = order[subset[a]];
        const std::complex<double> lam = eval(idx);
        Eigen::VectorXcd w = evec.col(idx).tail(k);
        if (std::abs(lam.imag()) <= conj_tol) {
          // Real eigenvalue: rotate the vector onto the real axis.
          int pivot = 0;
          w.cwiseAbs().maxCoeff(&pivot);
          w /= w(pivot) / std::abs(w(pivot));
          w_real.col(col) = w.real();
          lam_real(col, col) = lam.real();
          used[a] = true;
          ++col;
        } else {
          int partner = -1;
          for (int b = 0; b < k; ++b) {
            if (b != a && !used[b] &&
                almost_conjugate(lam, eval(order[subset[b]]), conj_tol)) {
              partner = b;
              break;
            }
          }
          if (partner < 0) return;  // unreachable after the closure check
          // Use the +imag representative; columns Re(w), Im(w) with the
          // rotation block [[re, im], [-im, re]].
          std::complex<double> lam_pos = lam;
          if (lam_pos.imag() < 0) {
            lam_pos = std::conj(lam_pos);
            w = w.conjugate();
          }
          w_real.col(col) = w.real();
          w_real.col(col + 1) = w.imag();
          lam_real(col, col) = lam_pos.real();
          lam_real(col, col + 1) = lam_pos.imag();
          lam_real(col + 1, col) = -lam_pos.imag();
          lam_real(col + 1, col + 1) = lam_pos.real();
          used[a] = used[partner] = true;
          col += 2;
        }
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> wsvd(w_real);
      const double smin = wsvd.singularValues()(k - 1);
      if (smin <= 0.0 || wsvd.singularValues()(0) / smin > kCollinearCondLimit) {
        ++out.skipped_subsets;
        return;
      }
      // S = W Lam W^{-1}, computed as the solution of W^T S^T = (W Lam)^T.
      Eigen::MatrixXd s = w_real.transpose()
                              .partialPivLu()
                              .solve((w_real * lam_real).transpose())
                              .transpose();
      const double resid = (s * s - ansatz.u1 * s - ansatz.u2).norm() /
                           (1.0 + s.squaredNorm());
      if (resid <= solvent_tol && s.allFinite()) {
        found.emplace_back(std::move(s), resid);
      }
      return;
    }
    for (int i = start; i <= n - (k - depth); ++i) {
      subset[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);

  // Canonical output order: lexicographic by entries.
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    const auto& ma = a.first;
    const auto& mb = b.first;
    for (int i = 0; i < ma.size(); ++i) {
      if (ma(i) != mb(i)) return ma(i) < mb(i);
    }
    return false;
  });
  for (auto& f : found) {
    out.candidates.push_back(std::move(f.first));
    out.certification.push_back(f.second);
  }
  return out;
}

EstimationReport estimate_cov(const TimeSeriesSample& x) {
  const auto start = std::chrono::steady_clock::now();
  EstimationReport report;
  report.method = "cov";
  if (x.seed) report.run_seed = *x.seed;

  if (x.length() < 5) {
    throw Error(ErrorKind::insufficient_data, "estimate_cov needs L >= 5");
  }

  auto fail = [&](const char* stage, const std::exception& err) {
    report.error_stage = stage;
    report.note = err.what();
    return report;
  };

  AutocovSequence gammas;
  try {
    gammas = sample_autocov(x, 3);
  } catch (const Error& err) {
    return fail("sample_autocov", err);
  }
  ResidualAnsatz ansatz;
  try {
    ansatz = solve_ansatz(gammas);
  } catch (const Error& err) {
    return fail("solve_ansatz", err);
  }
  report.ansatz_residual = ansatz.residual_norm;
  report.condition_number = ansatz.condition;
  SolventSet solvents;
  try {
    solvents = enumerate_solvents(ansatz, kSolventTolSample);
  } catch (const Error& err) {
    report.g2_distinct_roots = err.kind() != ErrorKind::assumption;
    return fail("enumerate_solvents", err);
  }
  report.g2_distinct_roots = solvents.distinct_roots;
  report.candidates = solvents.candidates;
  report.assumptions_unverified = true;  // D = 0 / G1-G2 cannot be checked from x alone
  if (report.candidates.empty()) {
    report.error_stage = "enumerate_solvents";
    report.note = "no real solvent within tolerance";
  }
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

}  // namespace lcvar
