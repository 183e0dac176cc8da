#pragma once

#include <optional>
#include <string>
#include <vector>

#include "syndecomp/arf.hpp"
#include "syndecomp/dataset.hpp"
#include "syndecomp/prediction.hpp"
#include "syndecomp/weights.hpp"

namespace syndecomp {

struct PipelineOptions {
  ArfKind arf_kind = ArfKind::polynomial;
  KernelOptions kernel;
  CensoredIndexOptions censored;
  double matched_trim = 0.0;
};

/// Everything estimated from one dataset before weights are chosen.
/// Region slot 0 is the target, slots 1..K the sources.
struct FitResult {
  std::vector<std::optional<IndexModel>> index_models;
  std::vector<ArfModel> arfs;
  Eigen::VectorXd target_pre_index;
  Eigen::VectorXd target_post_index;
  MatchedGroup matched;
  Eigen::VectorXd target_arf_post;   // NaN where unmatched
  Eigen::MatrixXd source_arfs_post;  // n0 x K
  MomentSystem system;
  ThetaDecomposition decomposition;
  std::size_t extrapolated_evaluations = 0;
  std::vector<std::string> warnings;

  double theta(const Eigen::VectorXd& w) const { return decomposition(w); }
};

FitResult fit_pipeline(const MultiRegionDataset& data, const PolicySpec& policy, const PipelineOptions& options);

/// The policy that leaves the target as observed.
PolicySpec status_quo_policy(const PolicySpec& policy, const RegionSample& target);

/// Source ARFs at the target's status-quo index, n0 x K.
Eigen::MatrixXd status_quo_source_arfs(const MultiRegionDataset& data, const PolicySpec& policy,
                                       const FitResult& fit);

std::optional<StatusQuoCheck> status_quo_check(const MultiRegionDataset& data, const PolicySpec& policy,
                                               const FitResult& fit, const Eigen::VectorXd& w);

/// Group-conditional moment systems keyed by the distinct values of target
/// covariate `column`; each group's n0 is its own size.
std::vector<GroupSystem> group_systems(const RegionSample& target, const FitResult& fit, std::size_t column);

std::string format_number(double v);

}  // namespace syndecomp
