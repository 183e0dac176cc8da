#include "syndecomp/pipeline.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "syndecomp/error.hpp"

namespace syndecomp {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

ArfModel fit_arf(const RegionSample& sample, const Eigen::VectorXd& index, const PipelineOptions& options) {
  if (options.arf_kind == ArfKind::kernel) return fit_kernel_arf(sample, as_span(index), options.kernel);
  return fit_polynomial_arf(sample, as_span(index));
}

const IndexModel* model_ptr(const std::optional<IndexModel>& m) { return m ? &*m : nullptr; }

}  // namespace

FitResult fit_pipeline(const MultiRegionDataset& data, const PolicySpec& policy, const PipelineOptions& options) {
  const std::size_t K = data.source_count();
  const bool needs_index = std::holds_alternative<IndexThresholdPolicy>(policy);
  FitResult fit;
  fit.index_models.resize(K + 1);
  fit.arfs.resize(K + 1);

  auto region = [&](std::size_t slot) -> const RegionSample& {
    return slot == 0 ? data.target : data.sources[slot - 1];
  };

  for (std::size_t slot = 0; slot <= K; ++slot) {
    const RegionSample& r = region(slot);
    if (needs_index) fit.index_models[slot] = fit_censored_index(r, options.censored);
    const Eigen::VectorXd pre = pre_policy_index(policy, r.covariates, model_ptr(fit.index_models[slot]));
    fit.arfs[slot] = fit_arf(r, pre, options);
    if (slot == 0) fit.target_pre_index = pre;
  }

  const RegionSample& target = data.target;
  const auto n0 = static_cast<Eigen::Index>(target.size());
  fit.target_post_index = post_policy_index(policy, target.covariates, model_ptr(fit.index_models[0]));
  fit.matched = matched_group(as_span(fit.target_pre_index), as_span(fit.target_post_index), options.matched_trim);

  fit.target_arf_post = Eigen::VectorXd::Constant(n0, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < n0; ++i) {
    if (fit.matched.matched(static_cast<std::size_t>(i))) {
      fit.target_arf_post(i) = evaluate_arf(fit.arfs[0], fit.target_post_index(i)).value;
    }
  }

  fit.source_arfs_post.resize(n0, static_cast<Eigen::Index>(K));
  for (std::size_t k = 1; k <= K; ++k) {
    const Eigen::VectorXd post = post_policy_index(policy, target.covariates, model_ptr(fit.index_models[k]));
    for (Eigen::Index i = 0; i < n0; ++i) {
      const ArfValue v = evaluate_arf(fit.arfs[k], post(i));
      fit.source_arfs_post(i, static_cast<Eigen::Index>(k - 1)) = v.value;
      if (v.extrapolated) ++fit.extrapolated_evaluations;
    }
  }
  if (fit.extrapolated_evaluations > 0) {
    fit.warnings.push_back(std::to_string(fit.extrapolated_evaluations) +
                           " source ARF evaluations fall outside the source index support");
  }

  fit.system = build_moment_system(fit.matched, fit.target_arf_post, fit.source_arfs_post);
  fit.decomposition = decompose_theta(fit.matched, fit.target_arf_post, fit.source_arfs_post);
  return fit;
}

PolicySpec status_quo_policy(const PolicySpec& policy, const RegionSample& target) {
  return std::visit(
      [&](const auto& p) -> PolicySpec {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IndexThresholdPolicy>) {
          if (!target.threshold) {
            throw Error(ErrorKind::validation, "prediction", "target region has no threshold for the status-quo check");
          }
          return IndexThresholdPolicy{*target.threshold};
        } else if constexpr (std::is_same_v<T, CovariateShiftPolicy>) {
          CovariateShiftPolicy q = p;
          q.shift.setZero();
          return q;
        } else {
          IdentityIndexPolicy q = p;
          q.post_scale = p.pre_scale;
          q.post_offset = p.pre_offset;
          return q;
        }
      },
      policy);
}

Eigen::MatrixXd status_quo_source_arfs(const MultiRegionDataset& data, const PolicySpec& policy,
                                       const FitResult& fit) {
  const PolicySpec sq = status_quo_policy(policy, data.target);
  const std::size_t K = data.source_count();
  const auto n0 = static_cast<Eigen::Index>(data.target.size());
  Eigen::MatrixXd out(n0, static_cast<Eigen::Index>(K));
  for (std::size_t k = 1; k <= K; ++k) {
    const Eigen::VectorXd idx = post_policy_index(sq, data.target.covariates, model_ptr(fit.index_models[k]));
    for (Eigen::Index i = 0; i < n0; ++i) out(i, static_cast<Eigen::Index>(k - 1)) = evaluate_arf(fit.arfs[k], idx(i)).value;
  }
  return out;
}

std::optional<StatusQuoCheck> status_quo_check(const MultiRegionDataset& data, const PolicySpec& policy,
                                               const FitResult& fit, const Eigen::VectorXd& w) {
  try {
    const Eigen::MatrixXd arfs = status_quo_source_arfs(data, policy, fit);
    return null_policy_cross_check(synthetic_arf(arfs, w), data.target.outcomes);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(15);
  os << v;
  return os.str();
}

std::vector<GroupSystem> group_systems(const RegionSample& target, const FitResult& fit, std::size_t column) {
  if (column >= target.dimension()) {
    throw Error(ErrorKind::usage, "weights", "group-by column index out of range");
  }
  std::map<double, std::vector<Eigen::Index>> levels;
  const auto n0 = static_cast<Eigen::Index>(target.size());
  for (Eigen::Index i = 0; i < n0; ++i) levels[target.covariates(i, static_cast<Eigen::Index>(column))].push_back(i);

  std::vector<GroupSystem> out;
  for (const auto& [value, rows] : levels) {
    GroupSystem g;
    g.key = format_number(value);
    const auto m = static_cast<Eigen::Index>(rows.size());
    MatchedGroup sub;
    sub.indicator.resize(rows.size());
    Eigen::VectorXd t(m);
    Eigen::MatrixXd s(m, fit.source_arfs_post.cols());
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = rows[static_cast<std::size_t>(r)];
      sub.indicator[static_cast<std::size_t>(r)] = fit.matched.indicator[static_cast<std::size_t>(i)];
      if (sub.indicator[static_cast<std::size_t>(r)]) ++sub.matched_count;
      t(r) = fit.target_arf_post(i);
      s.row(r) = fit.source_arfs_post.row(i);
    }
    sub.matched_fraction = static_cast<double>(sub.matched_count) / static_cast<double>(m);
    try {
      g.system = build_moment_system(sub, t, s);
    } catch (const Error& e) {
      g.error = e.what();
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace syndecomp
