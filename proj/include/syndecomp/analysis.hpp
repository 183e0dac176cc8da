#pragma once

#include <optional>
#include <string>
#include <vector>

#include "syndecomp/inference.hpp"
#include "syndecomp/pipeline.hpp"
#include "syndecomp/resampling.hpp"
#include "syndecomp/weights.hpp"

namespace syndecomp {

struct AnalysisOptions {
  AnalysisConfig config;
  PipelineOptions pipeline;
  std::optional<std::size_t> groupby_column;
  std::size_t jobs = 1;
};

struct EstimateResult {
  FitResult fit;
  WeightSolution weights;
  PredictionResult prediction;
  std::optional<StatusQuoCheck> status_quo;
  std::vector<GroupWeights> groups;
  std::vector<std::string> warnings;
};

EstimateResult run_estimate(const MultiRegionDataset& data, const PolicySpec& policy, const AnalysisOptions& options);

struct InferenceResult {
  EstimateResult estimate;
  std::size_t draws_requested = 0;
  std::size_t draws_failed = 0;
  std::optional<OmegaEstimate> omega;  // empty in robust mode
  std::optional<SigmaEstimate> sigma;  // empty in robust mode
  WeightConfidenceSet set;
  std::vector<double> robust_sigma;
  ThetaConfidenceInterval interval;
  std::size_t accepted_at_alpha = 0;
  bool transferability_rejected = false;
  bool robust = false;
  std::vector<std::string> warnings;
};

InferenceResult run_inference(const MultiRegionDataset& data, const PolicySpec& policy, const AnalysisOptions& options);

}  // namespace syndecomp
