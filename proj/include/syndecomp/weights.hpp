#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "syndecomp/arf.hpp"

namespace syndecomp {

struct MomentSystem {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;
  std::size_t n0 = 0;
  double min_eigenvalue = 0.0;
  /// (1/n0) sum of squared target ARF values over the matched group; lets
  /// rho^2 be reported on its natural scale.
  std::optional<double> target_second_moment;
  std::size_t matched_count = 0;

  std::size_t size() const { return static_cast<std::size_t>(h.size()); }
};

/// Wraps a given (H, h) and fills in the eigenvalue diagnostic.
MomentSystem make_moment_system(Eigen::MatrixXd H, Eigen::VectorXd h, std::size_t n0,
                                std::optional<double> target_second_moment = std::nullopt);

/// H = (1/n0) sum_i m(X_i) m(X_i)' 1{matched}, h = (1/n0) sum_i m(X_i) m0(X_i) 1{matched}.
/// `source_arfs_post` is n0 x K; unmatched entries of `target_arf_post` are ignored.
MomentSystem build_moment_system(const MatchedGroup& matched, const Eigen::VectorXd& target_arf_post,
                                 const Eigen::MatrixXd& source_arfs_post);

struct KktMultipliers {
  double lambda_tilde = 0.0;
  Eigen::VectorXd lambda;  // >= 0, zero on the support of w
};

struct WeightSolution {
  Eigen::VectorXd w;
  double objective = 0.0;  // w'Hw - 2h'w
  double rho_sq = 0.0;
  KktMultipliers kkt;
  std::vector<std::size_t> active_set;  // indices with w_k = 0
  bool degenerate = false;              // H numerically singular
  std::vector<std::string> warnings;
};

struct QpOptions {
  std::size_t enumeration_limit = 12;
  std::size_t max_iterations = 200000;
  bool robust_mode = false;
};

double qp_objective(const MomentSystem& sys, const Eigen::VectorXd& w);

/// w'Hw - 2h'w + c with c the target second moment (or h'H^+h when absent),
/// floored at zero.
double rho_squared(const MomentSystem& sys, const Eigen::VectorXd& w);

double zero_weight_tolerance(const MomentSystem& sys);

WeightSolution solve_simplex_qp(const MomentSystem& sys, const QpOptions& options = {});

/// Multipliers implied by w: lambda_tilde = -mean of (Hw - h) over the
/// support, lambda_k = (Hw - h)_k + lambda_tilde off the support.
KktMultipliers kkt_multipliers(const MomentSystem& sys, const Eigen::VectorXd& w, double zero_tol);

struct KktCheck {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  bool ok = false;
};

KktCheck check_kkt(const MomentSystem& sys, const WeightSolution& solution);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct GroupSystem {
  std::string key;
  std::optional<MomentSystem> system;
  std::string error;
};

struct GroupWeights {
  std::string key;
  std::optional<WeightSolution> solution;
  std::string error;
};

std::vector<GroupWeights> solve_groupwise_weights(const std::vector<GroupSystem>& groups,
                                                  const QpOptions& options = {});

}  // namespace syndecomp
