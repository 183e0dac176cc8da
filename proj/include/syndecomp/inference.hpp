#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "syndecomp/prediction.hpp"
#include "syndecomp/resampling.hpp"
#include "syndecomp/weights.hpp"

namespace syndecomp {

/// Upper-tail critical value: the p-quantile of chi^2(df).
double chi2_quantile(double p, double df);

/// Hw - h - w'(Hw - h) 1.
Eigen::VectorXd f_vector(const MomentSystem& sys, const Eigen::VectorXd& w);

struct ConeProjection {
  Eigen::VectorXd lambda;
  double t_value = 0.0;
  std::size_t df = 0;
  std::vector<char> active_pattern;  // 1 where lambda_k = 0
};

/// n0 min over {lambda >= 0, lambda'w = 0} of (f - lambda)' Omega^{-1} (f - lambda),
/// solved as a nonnegative least-squares problem in the Cholesky metric.
ConeProjection project_cone(const Eigen::VectorXd& f_hat, const Eigen::MatrixXd& omega, const Eigen::VectorXd& w,
                            std::size_t n0);

/// Lawson-Hanson nonnegative least squares: argmin ||Ax - b|| subject to x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

/// Uniform draws on the simplex (sorted uniforms, adjacent differences),
/// followed by the K vertices and, when given, w_hat.
std::vector<Eigen::VectorXd> simplex_grid(std::size_t K, std::size_t size, std::uint64_t seed,
                                          const std::optional<Eigen::VectorXd>& w_hat = std::nullopt);

struct WeightConfidenceSet {
  std::vector<Eigen::VectorXd> grid;
  std::vector<double> t_values;
  std::vector<std::size_t> df;
  std::vector<char> accepted;
  double kappa = 0.0;
  bool empty = true;
  std::size_t accepted_count = 0;
  std::size_t failed_points = 0;  // robust mode: points whose metric could not be formed
};

WeightConfidenceSet weight_confidence_set(const MomentSystem& sys, const Eigen::MatrixXd& omega, std::size_t n0,
                                          double kappa, std::vector<Eigen::VectorXd> grid, std::size_t jobs = 1);

/// The same test statistics judged at another level.
WeightConfidenceSet relevel(const WeightConfidenceSet& set, double level);

/// Reject synthetic transferability iff the set is empty.
bool transferability_test(const WeightConfidenceSet& set);

struct ThetaConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
  double kappa = 0.0;
  double point_estimate = 0.0;
  bool weight_set_empty = false;

  double length() const { return upper - lower; }
  bool contains(double v) const { return !weight_set_empty && lower <= v && v <= upper; }
};

ThetaConfidenceInterval theta_confidence_interval(const WeightConfidenceSet& set, const ThetaDecomposition& theta,
                                                  const SigmaEstimate& sigma, std::size_t n0, double alpha,
                                                  double kappa, const Eigen::VectorXd& w_hat);

struct RobustInference {
  WeightConfidenceSet set;
  std::vector<double> sigma;  // per grid point, NaN where unavailable
  ThetaConfidenceInterval interval;
};

/// Variant for possibly singular H: Omega(w) and sigma(w) are rebuilt from
/// the bootstrap draws at every grid point. A singular Omega(w) gets a ridge
/// of 1e-8 trace/K before projection.
RobustInference robust_weight_confidence_set(const MomentSystem& base, const std::vector<const BootstrapDraw*>& draws,
                                             const ThetaDecomposition& theta, std::vector<Eigen::VectorXd> grid,
                                             double alpha, double kappa, double c0, const Eigen::VectorXd& w_hat,
                                             std::size_t jobs = 1);

}  // namespace syndecomp
