#include "syndecomp/analysis.hpp"

#include "syndecomp/error.hpp"

namespace syndecomp {

EstimateResult run_estimate(const MultiRegionDataset& data, const PolicySpec& policy, const AnalysisOptions& options) {
  options.config.validate();
  data.validate();
  validate_policy(policy, data.target.dimension());
  QpOptions qp;
  qp.robust_mode = options.config.robust_mode;

  EstimateResult r;
  PipelineOptions pipeline = options.pipeline;
  pipeline.matched_trim = options.config.matched_trim;
  r.fit = fit_pipeline(data, policy, pipeline);
  r.weights = solve_simplex_qp(r.fit.system, qp);
  r.prediction = predict_theta(r.fit.matched, r.fit.target_arf_post, r.fit.source_arfs_post, r.weights.w);
  r.status_quo = status_quo_check(data, policy, r.fit, r.weights.w);
  if (options.groupby_column) {
    r.groups = solve_groupwise_weights(group_systems(data.target, r.fit, *options.groupby_column), qp);
  }
  r.warnings = r.fit.warnings;
  r.warnings.insert(r.warnings.end(), r.weights.warnings.begin(), r.weights.warnings.end());
  return r;
}

InferenceResult run_inference(const MultiRegionDataset& data, const PolicySpec& policy, const AnalysisOptions& options) {
  const AnalysisConfig& cfg = options.config;
  InferenceResult out;
  out.estimate = run_estimate(data, policy, options);
  out.robust = cfg.robust_mode;
  out.warnings = out.estimate.warnings;
  const FitResult& fit = out.estimate.fit;
  const Eigen::VectorXd& w_hat = out.estimate.weights.w;
  const MomentSystem& base = fit.system;

  PipelineOptions pipeline = options.pipeline;
  pipeline.matched_trim = cfg.matched_trim;
  const RefitFn refit = [&](const MultiRegionDataset& d) { return fit_pipeline(d, policy, pipeline); };
  const BootstrapRun run = bootstrap_draws(data, refit, cfg.bootstrap_draws, cfg.master_seed, options.jobs);
  out.draws_requested = cfg.bootstrap_draws;
  out.draws_failed = run.failed;
  if (run.failed > 0) {
    out.warnings.push_back(std::to_string(run.failed) + " bootstrap draws failed and were excluded");
  }
  const auto draws = run.successful();

  auto grid = simplex_grid(data.source_count(), cfg.simplex_grid_size, derive_seed(cfg.master_seed, fnv1a("grid")),
                           w_hat);

  if (cfg.robust_mode) {
    RobustInference robust = robust_weight_confidence_set(base, draws, fit.decomposition, std::move(grid), cfg.alpha,
                                                          cfg.kappa, cfg.truncation_constant, w_hat, options.jobs);
    out.set = std::move(robust.set);
    out.robust_sigma = std::move(robust.sigma);
    out.interval = robust.interval;
    if (out.set.failed_points > 0) {
      out.warnings.push_back(std::to_string(out.set.failed_points) +
                             " grid points had a singular metric or zero scale and were rejected");
    }
  } else {
    std::vector<Eigen::VectorXd> gammas;
    std::vector<double> stars;
    for (const BootstrapDraw* d : draws) {
      gammas.push_back(gamma_star(*d->system, base, w_hat));
      stars.push_back(d->decomposition(w_hat));
    }
    out.omega = omega_hat(gammas, base, w_hat, cfg.truncation_constant);
    out.sigma = sigma_hat(stars, fit.theta(w_hat), base.n0);
    out.set = weight_confidence_set(base, out.omega->omega, base.n0, cfg.kappa, std::move(grid), options.jobs);
    out.interval = theta_confidence_interval(out.set, fit.decomposition, *out.sigma, base.n0, cfg.alpha, cfg.kappa,
                                             w_hat);
  }
  const WeightConfidenceSet at_alpha = relevel(out.set, cfg.alpha);
  out.accepted_at_alpha = at_alpha.accepted_count;
  out.transferability_rejected = transferability_test(at_alpha);
  return out;
}

}  // namespace syndecomp
