#pragma once

#include <Eigen/Dense>

#include "syndecomp/arf.hpp"

namespace syndecomp {

struct PredictionResult {
  double theta = 0.0;
  double matched_contribution = 0.0;
  double unmatched_contribution = 0.0;
  double matched_fraction = 0.0;
  /// (1/n0) sum over unmatched i of m_k(X_i); theta's unmatched term is
  /// w'per_source_unmatched_means.
  Eigen::VectorXd per_source_unmatched_means;
};

/// theta(w) = matched + w'unmatched, affine in w with the ARFs held fixed.
struct ThetaDecomposition {
  double matched = 0.0;
  Eigen::VectorXd unmatched;
  double matched_fraction = 0.0;

  double operator()(const Eigen::VectorXd& w) const { return matched + unmatched.dot(w); }
};

/// Row-wise convex combination of the n0 x K source ARF values.
Eigen::VectorXd synthetic_arf(const Eigen::MatrixXd& source_arfs_post, const Eigen::VectorXd& w);

ThetaDecomposition decompose_theta(const MatchedGroup& matched, const Eigen::VectorXd& target_arf_post,
                                   const Eigen::MatrixXd& source_arfs_post);

PredictionResult predict_theta(const MatchedGroup& matched, const Eigen::VectorXd& target_arf_post,
                               const Eigen::MatrixXd& source_arfs_post, const Eigen::VectorXd& w);

struct StatusQuoCheck {
  double synthetic = 0.0;
  double direct = 0.0;
  double discrepancy = 0.0;
  double direct_standard_error = 0.0;
};

/// Compares the synthetic prediction at the status-quo policy (all target
/// points routed through the weighted source ARFs) with the target's own
/// outcome mean.
StatusQuoCheck null_policy_cross_check(const Eigen::VectorXd& synthetic_status_quo,
                                       const Eigen::VectorXd& target_outcomes);

}  // namespace syndecomp
