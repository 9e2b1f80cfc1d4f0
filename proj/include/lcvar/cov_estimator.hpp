#pragma once

#include <complex>
#include <vector>

#include "lcvar/types.hpp"

namespace lcvar {

// (U1, U2) of the generalized residual r_t = x_t - U1 x_{t-1} - U2 x_{t-2},
// chosen so that Cov(r_t, x_{t-2}) = Cov(r_t, x_{t-3}) = 0.
struct ResidualAnsatz {
  Eigen::MatrixXd u1;
  Eigen::MatrixXd u2;
  double residual_norm = 0.0;    // defect of the defining linear system
  double condition = 0.0;        // condition number of the block Gram matrix
  int effective_rank = 0;        // rank used by the solver
  bool rank_deficient = false;   // true when the minimum-variance completion ran

  int k_x() const { return static_cast<int>(u1.rows()); }
};

struct ResidualSeries {
  Eigen::MatrixXd values;  // (L-2) x K_X, row i = r_{i+3} in 1-based time
};

struct SolventSet {
  std::vector<std::complex<double>> latent_roots;  // 2 K_X roots, canonical order
  std::vector<Eigen::MatrixXd> candidates;         // real right solvents of T_U
  std::vector<double> certification;               // |T_U(S)|_F / (1 + |S|_F^2)
  bool distinct_roots = false;                     // the G2 flag
  int skipped_subsets = 0;                         // near-collinear eigenvector sets
};

inline constexpr double kSolventTol = 1e-6;
inline constexpr double kSolventTolSample = 1e-4;
inline constexpr double kRootSepTol = 1e-8;

// Solves (U1, U2) [[G1, G2], [G0, G1]] = (G2, G3). When the block matrix is
// rank deficient but the system is consistent (which happens structurally for
// k_z < k_x), returns the solution with minimal residual variance
// E|r_t|^2 among the solution family; that completion reproduces the unique
// solution whenever the matrix is invertible. An inconsistent near-singular
// system throws ErrorKind::conditioning.
ResidualAnsatz solve_ansatz(const AutocovSequence& x_gammas);

ResidualSeries compute_residual(const TimeSeriesSample& x, const ResidualAnsatz& ansatz);

// Eigenvalues of the block companion matrix [[U1, U2], [I, 0]]; exactly the
// roots of det(T_U(alpha)) for T_U(Q) = Q^2 - U1 Q - U2.
std::vector<std::complex<double>> latent_roots(const ResidualAnsatz& ansatz);

// Enumerates real right solvents from conjugate-closed K_X-subsets of the
// companion eigenpairs. Throws ErrorKind::assumption when the latent roots
// are not pairwise distinct (G2 violated).
SolventSet enumerate_solvents(const ResidualAnsatz& ansatz, double solvent_tol = kSolventTol);

// Algorithm 2 end to end on a sample: autocovariances up to lag 3, ansatz,
// solvents. Stage failures are recorded in the report, not rethrown.
EstimationReport estimate_cov(const TimeSeriesSample& x);

}  // namespace lcvar
