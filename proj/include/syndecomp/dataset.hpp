#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace syndecomp {

/// One region's observations. Covariates never carry an intercept column.
struct RegionSample {
  std::string region_id;
  Eigen::VectorXd outcomes;
  Eigen::MatrixXd covariates;  // n_k x d
  /// Region-level policy constant (e.g. minimum wage level), if any.
  std::optional<double> threshold;
  /// Optional secondary outcome used only to estimate a censored index
  /// (e.g. log wages). NaN marks an unobserved entry.
  std::optional<Eigen::VectorXd> index_outcomes;

  std::size_t size() const { return static_cast<std::size_t>(outcomes.size()); }
  std::size_t dimension() const { return static_cast<std::size_t>(covariates.cols()); }

  /// Throws ErrorKind::validation when the invariants do not hold.
  void validate() const;

  /// Copy of the rows listed in `rows` (duplicates allowed).
  RegionSample select_rows(std::span<const std::size_t> rows) const;
};

/// Target region plus K >= 1 source regions.
struct MultiRegionDataset {
  RegionSample target;
  std::vector<RegionSample> sources;

  std::size_t source_count() const { return sources.size(); }
  void validate() const;
};

/// Pre-policy index x'gamma_k - log(threshold_k) with an estimated gamma_k;
/// the counterfactual replaces the threshold for every region.
struct IndexThresholdPolicy {
  double counterfactual_threshold = 0.0;
};

/// Linear index a'x; the policy moves x to x + shift for rows satisfying
/// every selection bound (all rows when `selection` is empty).
struct CovariateShiftPolicy {
  struct Bound {
    std::size_t column = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
  };
  Eigen::VectorXd loadings;
  Eigen::VectorXd shift;
  std::vector<Bound> selection;

  bool selected(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

/// Scalar affine maps of one covariate column:
/// mu(x) = pre_scale * x_c + pre_offset, mu^G(x) = post_scale * x_c + post_offset.
struct IdentityIndexPolicy {
  std::size_t column = 0;
  double pre_scale = 1.0;
  double pre_offset = 0.0;
  double post_scale = 1.0;
  double post_offset = 0.0;
};

using PolicySpec = std::variant<IndexThresholdPolicy, CovariateShiftPolicy, IdentityIndexPolicy>;

void validate_policy(const PolicySpec& policy, std::size_t dimension);

struct AnalysisConfig {
  double alpha = 0.05;
  double kappa = 0.005;
  std::size_t bootstrap_draws = 200;
  double truncation_constant = 0.05;
  std::size_t simplex_grid_size = 5000;
  std::uint64_t master_seed = 20240601;
  bool robust_mode = false;
  /// Shrinks the estimated pre-policy index support from both ends.
  double matched_trim = 0.0;

  void validate() const;
};

/// Column mapping for CSV ingestion.
struct CsvSchema {
  std::string region_column = "region";
  std::string outcome_column = "y";
  std::vector<std::string> covariate_columns;
  std::optional<std::string> threshold_column;
  std::optional<std::string> index_outcome_column;
  std::string target_region = "0";
};

MultiRegionDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
MultiRegionDataset parse_csv(std::istream& in, const CsvSchema& schema);

/// Writes with 17 significant digits so that reloading is bit-exact.
void write_csv(const MultiRegionDataset& data, const std::filesystem::path& path,
               const CsvSchema& schema);
void write_csv(const MultiRegionDataset& data, std::ostream& out, const CsvSchema& schema);

AnalysisConfig load_config(const std::filesystem::path& path);
AnalysisConfig parse_config(const std::string& json_text);

/// Orders region identifiers numerically when both parse as integers,
/// lexicographically otherwise.
bool region_id_less(const std::string& a, const std::string& b);

}  // namespace syndecomp
