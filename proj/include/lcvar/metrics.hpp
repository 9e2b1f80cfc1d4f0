#pragma once

#include <utility>
#include <vector>

#include "lcvar/types.hpp"

namespace lcvar {

// sqrt(mean over runs of |est - truth|_F^2).
double rmse(const std::vector<Eigen::MatrixXd>& estimates,
            const std::vector<Eigen::MatrixXd>& truths);

// Index and value of the candidate with the smallest summed entrywise squared
// deviation from the truth (ties break to the lowest index). Evaluation-only.
std::pair<int, Eigen::MatrixXd> best_candidate(const std::vector<Eigen::MatrixXd>& candidates,
                                               const Eigen::MatrixXd& truth);

// Scale/permutation-blind column distance: min over column permutations of
// sum_j (1 - |cosine(c_est_j, c_true_perm(j))|). Zero-norm columns match only
// zero-norm columns. Range [0, columns].
double match_c_columns(const Eigen::MatrixXd& c_est, const Eigen::MatrixXd& c_true);

}  // namespace lcvar
