#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "syndecomp/analysis.hpp"
#include "syndecomp/simulation.hpp"

namespace syndecomp {

using Json = nlohmann::ordered_json;

Json vector_json(const Eigen::VectorXd& v);
Json matrix_json(const Eigen::MatrixXd& m);
Json config_json(const AnalysisConfig& config);
Json policy_json(const PolicySpec& policy);
Json dataset_json(const MultiRegionDataset& data);

Json estimate_json(const EstimateResult& result, const MultiRegionDataset& data);
Json inference_json(const InferenceResult& result);
Json mc_json(const McResult& result);

/// Coverage table (coverage, average CI length) and accuracy table
/// (RMSE, bias, variance of theta-hat, RMSE of w-hat) as CSV text.
std::string mc_coverage_csv(const std::vector<McResult>& results);
std::string mc_accuracy_csv(const std::vector<McResult>& results);

}  // namespace syndecomp
