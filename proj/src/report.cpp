#include "syndecomp/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace syndecomp {

namespace {

Json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

Json index_list(const std::vector<std::size_t>& v) {
  Json a = Json::array();
  for (auto i : v) a.push_back(i);
  return a;
}

Json weights_json(const WeightSolution& s) {
  Json j;
  j["w"] = vector_json(s.w);
  j["objective"] = number(s.objective);
  j["rho_sq"] = number(s.rho_sq);
  j["active_set"] = index_list(s.active_set);
  j["lambda_tilde"] = number(s.kkt.lambda_tilde);
  j["lambda"] = vector_json(s.kkt.lambda);
  j["degenerate"] = s.degenerate;
  return j;
}

}  // namespace

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

Json config_json(const AnalysisConfig& c) {
  Json j;
  j["alpha"] = c.alpha;
  j["kappa"] = c.kappa;
  j["bootstrap_draws"] = c.bootstrap_draws;
  j["truncation_constant"] = c.truncation_constant;
  j["simplex_grid_size"] = c.simplex_grid_size;
  j["master_seed"] = c.master_seed;
  j["robust_mode"] = c.robust_mode;
  j["matched_trim"] = c.matched_trim;
  return j;
}

Json policy_json(const PolicySpec& policy) {
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        Json j;
        if constexpr (std::is_same_v<T, IndexThresholdPolicy>) {
          j["mode"] = "index-threshold";
          j["counterfactual_threshold"] = p.counterfactual_threshold;
        } else if constexpr (std::is_same_v<T, CovariateShiftPolicy>) {
          j["mode"] = "covariate-shift";
          j["loadings"] = vector_json(p.loadings);
          j["shift"] = vector_json(p.shift);
          Json sel = Json::array();
          for (const auto& b : p.selection) {
            sel.push_back({{"column", b.column}, {"lower", number(b.lower)}, {"upper", number(b.upper)}});
          }
          j["selection"] = sel;
        } else {
          j["mode"] = "identity-index";
          j["column"] = p.column;
          j["pre_map"] = {p.pre_scale, p.pre_offset};
          j["post_map"] = {p.post_scale, p.post_offset};
        }
        return j;
      },
      policy);
}

Json dataset_json(const MultiRegionDataset& data) {
  Json j;
  j["target"] = data.target.region_id;
  j["n0"] = data.target.size();
  Json sources = Json::array();
  for (const auto& s : data.sources) sources.push_back({{"region", s.region_id}, {"n", s.size()}});
  j["sources"] = sources;
  j["covariate_dimension"] = data.target.dimension();
  return j;
}

Json estimate_json(const EstimateResult& r, const MultiRegionDataset& data) {
  Json j;
  Json sources = Json::array();
  for (const auto& s : data.sources) sources.push_back(s.region_id);
  j["sources"] = sources;
  j["weights"] = weights_json(r.weights);
  j["theta"] = number(r.prediction.theta);
  j["matched_contribution"] = number(r.prediction.matched_contribution);
  j["unmatched_contribution"] = number(r.prediction.unmatched_contribution);
  j["matched_fraction"] = number(r.prediction.matched_fraction);
  j["per_source_unmatched_means"] = vector_json(r.prediction.per_source_unmatched_means);
  j["matched_support"] = {number(r.fit.matched.support_lo), number(r.fit.matched.support_hi)};
  j["H"] = matrix_json(r.fit.system.H);
  j["h"] = vector_json(r.fit.system.h);
  j["min_eigenvalue_H"] = number(r.fit.system.min_eigenvalue);
  if (r.status_quo) {
    j["status_quo_check"] = {{"synthetic", number(r.status_quo->synthetic)},
                             {"direct", number(r.status_quo->direct)},
                             {"discrepancy", number(r.status_quo->discrepancy)},
                             {"direct_standard_error", number(r.status_quo->direct_standard_error)}};
  }
  if (!r.groups.empty()) {
    Json groups = Json::array();
    for (const auto& g : r.groups) {
      Json gj;
      gj["group"] = g.key;
      if (g.solution) {
        gj["weights"] = weights_json(*g.solution);
      } else {
        gj["error"] = g.error;
      }
      groups.push_back(gj);
    }
    j["groups"] = groups;
  }
  j["extrapolated_evaluations"] = r.fit.extrapolated_evaluations;
  return j;
}

Json inference_json(const InferenceResult& r) {
  Json j;
  j["robust"] = r.robust;
  j["bootstrap"] = {{"requested", r.draws_requested},
                    {"failed", r.draws_failed},
                    {"used", r.draws_requested - r.draws_failed}};
  if (r.omega) {
    j["omega"] = matrix_json(r.omega->omega);
    j["tau"] = vector_json(r.omega->tau);
    j["truncation_hits"] = r.omega->truncation_hits;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.omega->omega, Eigen::EigenvaluesOnly);
    j["min_eigenvalue_omega"] = number(eig.eigenvalues().minCoeff());
  }
  if (r.sigma) j["sigma"] = {{"sigma", r.sigma->sigma}, {"q25", r.sigma->q25}, {"q75", r.sigma->q75}};

  const auto& set = r.set;
  const auto& fit = r.estimate.fit;
  Json cs;
  cs["kappa"] = set.kappa;
  cs["grid_size"] = set.grid.size();
  cs["accepted"] = set.accepted_count;
  cs["accepted_at_alpha"] = r.accepted_at_alpha;
  cs["failed_points"] = set.failed_points;
  cs["empty"] = set.empty;
  const std::size_t hat = set.grid.size() - 1;
  cs["t_at_w_hat"] = number(set.t_values[hat]);
  cs["df_at_w_hat"] = set.df[hat];
  if (!set.empty) {
    const auto K = set.grid.front().size();
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(K, std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(K, -std::numeric_limits<double>::infinity());
    double tlo = std::numeric_limits<double>::infinity();
    double thi = -tlo;
    for (std::size_t g = 0; g < set.grid.size(); ++g) {
      if (!set.accepted[g]) continue;
      lo = lo.cwiseMin(set.grid[g]);
      hi = hi.cwiseMax(set.grid[g]);
      const double t = fit.theta(set.grid[g]);
      tlo = std::min(tlo, t);
      thi = std::max(thi, t);
    }
    cs["weight_lower"] = vector_json(lo);
    cs["weight_upper"] = vector_json(hi);
    cs["theta_range"] = {number(tlo), number(thi)};
  }
  j["weight_confidence_set"] = cs;
  j["interval"] = {{"lower", number(r.interval.lower)},
                   {"upper", number(r.interval.upper)},
                   {"alpha", r.interval.alpha},
                   {"kappa", r.interval.kappa},
                   {"point_estimate", number(r.interval.point_estimate)},
                   {"weight_set_empty", r.interval.weight_set_empty}};
  j["transferability_rejected"] = r.transferability_rejected;
  return j;
}

Json mc_json(const McResult& r) {
  Json j;
  j["family"] = to_string(r.spec.family);
  j["n0"] = r.spec.n0;
  j["s"] = r.spec.s;
  j["sigma_u"] = r.spec.sigma_u;
  j["R"] = r.spec.R;
  j["B"] = r.spec.B;
  j["theta0"] = r.truth.theta0;
  j["w0"] = vector_json(r.truth.w0);
  j["completed"] = r.completed;
  j["failed"] = r.failed;
  if (r.with_inference) {
    j["coverage"] = r.coverage;
    j["avg_ci_length"] = r.avg_ci_length;
    j["rejection_rate"] = r.rejection_rate;
  }
  j["rmse_theta"] = r.rmse_theta;
  j["bias_theta"] = r.bias_theta;
  j["var_theta"] = r.var_theta;
  j["rmse_w"] = r.rmse_w;
  j["median_w_error"] = r.median_w_error;
  return j;
}

std::string mc_coverage_csv(const std::vector<McResult>& results) {
  std::ostringstream os;
  os.precision(10);
  os << "family,n0,s,R,B,coverage,avg_ci_length,rejection_rate\n";
  for (const auto& r : results) {
    os << to_string(r.spec.family) << ',' << r.spec.n0 << ',' << r.spec.s << ',' << r.spec.R << ',' << r.spec.B << ','
       << r.coverage << ',' << r.avg_ci_length << ',' << r.rejection_rate << '\n';
  }
  return os.str();
}

std::string mc_accuracy_csv(const std::vector<McResult>& results) {
  std::ostringstream os;
  os.precision(10);
  os << "family,n0,s,R,rmse_theta,bias_theta,var_theta,rmse_w\n";
  for (const auto& r : results) {
    os << to_string(r.spec.family) << ',' << r.spec.n0 << ',' << r.spec.s << ',' << r.spec.R << ',' << r.rmse_theta
       << ',' << r.bias_theta << ',' << r.var_theta << ',' << r.rmse_w << '\n';
  }
  return os.str();
}

}  // namespace syndecomp
