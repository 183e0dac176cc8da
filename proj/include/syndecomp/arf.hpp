#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "syndecomp/dataset.hpp"

namespace syndecomp {

/// Estimated policy index x'gamma - log(threshold).
struct IndexModel {
  Eigen::VectorXd gamma;
  double threshold_log = 0.0;

  Eigen::VectorXd evaluate(const Eigen::MatrixXd& covariates) const {
    return (covariates * gamma).array() - threshold_log;
  }
};

enum class ArfKind { polynomial, kernel };

/// A fitted average response function of a scalar index.
struct ArfModel {
  ArfKind kind = ArfKind::polynomial;
  /// Cubic least-squares coefficients over [1, mu, mu^2, mu^3].
  Eigen::Vector4d coefficients = Eigen::Vector4d::Zero();
  /// Kernel training data, sorted by index.
  std::vector<double> train_index;
  std::vector<double> train_outcome;
  double bandwidth = 0.0;
  double support_lo = 0.0;
  double support_hi = 0.0;
};

struct ArfValue {
  double value = 0.0;
  bool extrapolated = false;
};

/// Quartic (biweight) kernel (15/16)(1-u^2)^2 on [-1, 1].
inline double quartic_kernel(double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double a = 1.0 - u * u;
  return 0.9375 * a * a;
}

struct KernelOptions {
  std::size_t grid_points = 30;
  double lower_factor = 0.1;  // times sd(mu) * n^{-1/5}
  double upper_factor = 3.0;  // times sd(mu)
};

ArfModel fit_polynomial_arf(const RegionSample& sample, std::span<const double> index);
ArfModel fit_kernel_arf(const RegionSample& sample, std::span<const double> index,
                        const KernelOptions& options = {});

/// Leave-one-out squared prediction error of the Nadaraya-Watson fit at
/// bandwidth h. Returns +inf when some observation has an empty window.
double kernel_loo_cv(std::span<const double> sorted_index, std::span<const double> outcome, double h);

/// Nadaraya-Watson weights at `mu` over the training points of `model`
/// (empty when the window is empty). Used by tests of the weight invariants.
std::vector<double> kernel_weights(const ArfModel& model, double mu);

ArfValue evaluate_arf(const ArfModel& model, double mu);

/// Trimmed least-squares pairwise loss for censoring at zero (Honore-Powell).
double honore_powell_loss(double y1, double y2, double delta);

/// Normalised pairwise objective; `y` are censored outcomes minus the log
/// threshold (censoring point zero).
double honore_powell_objective(std::span<const double> y, const Eigen::MatrixXd& covariates,
                               const Eigen::VectorXd& gamma);

struct CensoredIndexOptions {
  std::size_t starts = 5;
  double objective_tolerance = 1e-8;
  std::size_t max_iterations = 200;
  std::uint64_t seed = 7;
};

/// Pairwise-difference estimate of gamma from log outcomes censored from
/// below at log(threshold). Uses `index_outcomes` when present, else
/// `outcomes`; rows with NaN index outcomes are skipped.
IndexModel fit_censored_index(const RegionSample& sample, const CensoredIndexOptions& options = {});

struct MatchedGroup {
  std::vector<char> indicator;
  double support_lo = 0.0;
  double support_hi = 0.0;
  double matched_fraction = 0.0;
  std::size_t matched_count = 0;

  bool matched(std::size_t i) const { return indicator[i] != 0; }
};

/// Observation i is matched iff post_index[i] lies in
/// [min(pre_index) + trim, max(pre_index) - trim].
MatchedGroup matched_group(std::span<const double> pre_index, std::span<const double> post_index,
                           double trim = 0.0);

/// Pre/post-policy index values of `covariates` under `policy`.
/// `index_model` is required for IndexThresholdPolicy and ignored otherwise.
Eigen::VectorXd pre_policy_index(const PolicySpec& policy, const Eigen::MatrixXd& covariates,
                                 const IndexModel* index_model);
Eigen::VectorXd post_policy_index(const PolicySpec& policy, const Eigen::MatrixXd& covariates,
                                  const IndexModel* index_model);

MatchedGroup matched_group(const RegionSample& target, const PolicySpec& policy, const IndexModel* index_model,
                           double trim = 0.0);

}  // namespace syndecomp
