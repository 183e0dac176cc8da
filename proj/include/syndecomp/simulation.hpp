#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "syndecomp/analysis.hpp"

namespace syndecomp {

enum class McFamily { linear, nonlinear };

McFamily parse_family(const std::string& name);
std::string to_string(McFamily family);

struct McSpec {
  McFamily family = McFamily::linear;
  double s = 0.9;  // overlap
  std::size_t n0 = 1000;
  double sigma_u = 0.5;
  std::size_t R = 300;
  std::size_t B = 299;

  void validate() const;
};

/// Reduced (R=300, B=299) and full (R=1000, B=999) presets.
McSpec mc_preset(const std::string& name, McFamily family, std::size_t n0, double s);

struct McTruth {
  double theta0 = 0.0;
  Eigen::VectorXd w0;
};

McTruth mc_truth(McFamily family);

/// m0(mu) for the target and (m1, m2, m3)(mu) for the sources.
double mc_target_arf(McFamily family, double mu);
Eigen::Vector3d mc_source_arfs(McFamily family, double mu);

/// Pre index x for every region; target post index (x - (1 - s)) / s.
IdentityIndexPolicy mc_policy(double s);

struct McData {
  MultiRegionDataset data;
  PolicySpec policy;
  McTruth truth;
};

/// Region "0" is the target with X ~ U[1-s, 1]; regions "1".."3" are
/// sources with X ~ U[0, 1]; Y = ARF(X) + N(0, sigma_u^2).
McData generate_mc_data(const McSpec& spec, std::uint64_t seed);

/// Noise-free limits of H, h and the target second moment: integrals over
/// the matched post-policy index range [1 - s, 1] under mu ~ U[0, 1].
MomentSystem population_moment_system(McFamily family, double s);

struct McReplication {
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  double theta_hat = 0.0;
  Eigen::VectorXd w_hat;
  double matched_fraction = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool covered = false;
  bool rejected = false;
};

struct McResult {
  McSpec spec;
  McTruth truth;
  bool with_inference = false;
  std::size_t failed = 0;
  std::size_t completed = 0;
  double coverage = 0.0;
  double avg_ci_length = 0.0;
  double rejection_rate = 0.0;
  double rmse_theta = 0.0;
  double bias_theta = 0.0;
  double var_theta = 0.0;
  double rmse_w = 0.0;
  double median_w_error = 0.0;
  std::vector<McReplication> records;
};

struct McOptions {
  bool inference = true;
  std::size_t jobs = 1;
  double max_failure_fraction = 0.05;
};

McResult run_mc(const McSpec& spec, const AnalysisConfig& config, const McOptions& options = {});

}  // namespace syndecomp
