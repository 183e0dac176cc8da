#include "syndecomp/arf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "syndecomp/error.hpp"

namespace syndecomp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Vector4d cubic_basis(double mu) { return {1.0, mu, mu * mu, mu * mu * mu}; }

double standard_deviation(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

// Index range [first, last) of sorted points strictly inside (mu - h, mu + h).
std::pair<std::size_t, std::size_t> window(std::span<const double> sorted, double mu, double h) {
  const auto lo = std::upper_bound(sorted.begin(), sorted.end(), mu - h);
  const auto hi = std::lower_bound(lo, sorted.end(), mu + h);
  return {static_cast<std::size_t>(lo - sorted.begin()), static_cast<std::size_t>(hi - sorted.begin())};
}

}  // namespace

ArfModel fit_polynomial_arf(const RegionSample& sample, std::span<const double> index) {
  const std::size_t n = sample.size();
  if (index.size() != n) {
    throw Error(ErrorKind::validation, "arf", "index length does not match region '" + sample.region_id + "'");
  }
  if (n <= 4) {
    throw Error(ErrorKind::singular_fit, "arf",
                "region '" + sample.region_id + "': cubic ARF needs more than 4 observations");
  }
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 4);
  for (std::size_t i = 0; i < n; ++i) design.row(static_cast<Eigen::Index>(i)) = cubic_basis(index[i]).transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < 4) {
    throw Error(ErrorKind::singular_fit, "arf",
                "region '" + sample.region_id + "': cubic ARF design is rank deficient (need >= 4 distinct index values)");
  }
  ArfModel model;
  model.kind = ArfKind::polynomial;
  model.coefficients = qr.solve(sample.outcomes);
  const auto [lo, hi] = std::minmax_element(index.begin(), index.end());
  model.support_lo = *lo;
  model.support_hi = *hi;
  return model;
}

double kernel_loo_cv(std::span<const double> sorted_index, std::span<const double> outcome, double h) {
  const std::size_t n = sorted_index.size();
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [first, last] = window(sorted_index, sorted_index[i], h);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = first; j < last; ++j) {
      if (j == i) continue;
      const double k = quartic_kernel((sorted_index[i] - sorted_index[j]) / h);
      num += k * outcome[j];
      den += k;
    }
    if (!(den > 0.0)) return kInf;
    const double r = outcome[i] - num / den;
    sse += r * r;
  }
  return sse / static_cast<double>(n);
}

ArfModel fit_kernel_arf(const RegionSample& sample, std::span<const double> index, const KernelOptions& options) {
  const std::size_t n = sample.size();
  if (index.size() != n) {
    throw Error(ErrorKind::validation, "arf", "index length does not match region '" + sample.region_id + "'");
  }
  if (n < 10) {
    throw Error(ErrorKind::validation, "arf",
                "region '" + sample.region_id + "': kernel ARF needs at least 10 observations");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return index[a] < index[b]; });

  ArfModel model;
  model.kind = ArfKind::kernel;
  model.train_index.reserve(n);
  model.train_outcome.reserve(n);
  for (auto i : order) {
    model.train_index.push_back(index[i]);
    model.train_outcome.push_back(sample.outcomes(static_cast<Eigen::Index>(i)));
  }
  model.support_lo = model.train_index.front();
  model.support_hi = model.train_index.back();
  if (!(model.support_hi > model.support_lo)) {
    throw Error(ErrorKind::degenerate_design, "arf",
                "region '" + sample.region_id + "': all index values are identical; kernel ARF is not identified");
  }

  const double sd = standard_deviation(model.train_index);
  const double h_lo = options.lower_factor * sd * std::pow(static_cast<double>(n), -0.2);
  const double h_hi = options.upper_factor * sd;
  const std::size_t g = std::max<std::size_t>(options.grid_points, 2);
  double best_h = 0.0;
  double best_cv = kInf;
  for (std::size_t k = 0; k < g; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(g - 1);
    const double h = h_lo * std::pow(h_hi / h_lo, t);
    const double cv = kernel_loo_cv(model.train_index, model.train_outcome, h);
    if (cv < best_cv) {
      best_cv = cv;
      best_h = h;
    }
  }
  if (!std::isfinite(best_cv)) {
    throw Error(ErrorKind::degenerate_design, "arf",
                "region '" + sample.region_id + "': no bandwidth on the grid gives nonempty leave-one-out windows");
  }
  model.bandwidth = best_h;
  return model;
}

std::vector<double> kernel_weights(const ArfModel& model, double mu) {
  const double h = model.bandwidth;
  const auto [first, last] = window(model.train_index, mu, h);
  std::vector<double> weights(model.train_index.size(), 0.0);
  double den = 0.0;
  for (std::size_t j = first; j < last; ++j) {
    weights[j] = quartic_kernel((mu - model.train_index[j]) / h);
    den += weights[j];
  }
  if (!(den > 0.0)) return {};
  for (auto& w : weights) w /= den;
  return weights;
}

ArfValue evaluate_arf(const ArfModel& model, double mu) {
  if (!std::isfinite(mu)) throw Error(ErrorKind::numeric, "arf", "ARF evaluated at a non-finite index value");
  ArfValue out;
  out.extrapolated = mu < model.support_lo || mu > model.support_hi;
  if (model.kind == ArfKind::polynomial) {
    out.value = model.coefficients.dot(cubic_basis(mu));
    return out;
  }
  const double h = model.bandwidth;
  const auto [first, last] = window(model.train_index, mu, h);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = first; j < last; ++j) {
    const double k = quartic_kernel((mu - model.train_index[j]) / h);
    num += k * model.train_outcome[j];
    den += k;
  }
  if (!(den > 0.0)) {
    const double nearest =
        std::abs(mu - model.support_lo) <= std::abs(mu - model.support_hi) ? model.support_lo : model.support_hi;
    throw EmptyWindowError(mu, nearest,
                           "kernel ARF has no training point within bandwidth " + std::to_string(h) +
                               " of index value " + std::to_string(mu) + " (nearest support endpoint " +
                               std::to_string(nearest) + ")");
  }
  out.value = num / den;
  return out;
}

double honore_powell_loss(double y1, double y2, double delta) {
  if (delta <= -y2) return y1 * y1 - 2.0 * (y2 + delta) * y1;
  if (delta < y1) {
    const double r = y1 - y2 - delta;
    return r * r;
  }
  return y2 * y2 + 2.0 * (delta - y1) * y2;
}

namespace {

struct PairwiseProblem {
  std::vector<double> y;
  Eigen::MatrixXd x;

  double objective(const Eigen::VectorXd& gamma) const {
    const Eigen::VectorXd xg = x * gamma;
    const std::size_t n = y.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = y[i];
      const double xi = xg(static_cast<Eigen::Index>(i));
      for (std::size_t j = i + 1; j < n; ++j) {
        total += honore_powell_loss(yi, y[j], xi - xg(static_cast<Eigen::Index>(j)));
      }
    }
    return total / (static_cast<double>(n) * static_cast<double>(n - 1));
  }

  // Gradient and Hessian of the normalised objective.
  void derivatives(const Eigen::VectorXd& gamma, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const Eigen::VectorXd xg = x * gamma;
    const std::size_t n = y.size();
    const Eigen::Index d = x.cols();
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    hess = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd diff(d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double yi = y[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double yj = y[j];
        const double delta = xg(ii) - xg(jj);
        double slope;
        if (delta <= -yj) {
          slope = -2.0 * yi;
        } else if (delta < yi) {
          slope = -2.0 * (yi - yj - delta);
          diff = x.row(ii) - x.row(jj);
          hess.noalias() += 2.0 * diff * diff.transpose();
        } else {
          slope = 2.0 * yj;
        }
        coef(ii) += slope;
        coef(jj) -= slope;
      }
    }
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
    grad = scale * (x.transpose() * coef);
    hess *= scale;
  }
};

Eigen::VectorXd minimise_from(const PairwiseProblem& problem, Eigen::VectorXd gamma, const CensoredIndexOptions& options,
                              double& value) {
  value = problem.objective(gamma);
  const Eigen::Index d = gamma.size();
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    problem.derivatives(gamma, grad, hess);
    if (grad.norm() <= 1e-14) break;
    // Levenberg-damped Newton direction; falls back toward steepest descent
    // when few pairs sit on the quadratic branch.
    const double ridge = 1e-10 * (1.0 + hess.trace() / static_cast<double>(d));
    Eigen::VectorXd step = (hess + ridge * Eigen::MatrixXd::Identity(d, d)).ldlt().solve(-grad);
    if (!step.allFinite() || step.dot(grad) >= 0.0) step = -grad;
    double t = 1.0;
    double candidate_value = kInf;
    Eigen::VectorXd candidate;
    for (int ls = 0; ls < 60; ++ls) {
      candidate = gamma + t * step;
      candidate_value = problem.objective(candidate);
      if (candidate_value <= value + 1e-4 * t * step.dot(grad)) break;
      t *= 0.5;
    }
    if (!(candidate_value <= value)) break;
    const double improvement = value - candidate_value;
    gamma = candidate;
    value = candidate_value;
    if (improvement <= options.objective_tolerance * (1e-6 + std::abs(value)) && t * step.norm() <= 1e-10 * (1.0 + gamma.norm())) break;
    if (improvement == 0.0) break;
  }
  return gamma;
}

}  // namespace

double honore_powell_objective(std::span<const double> y, const Eigen::MatrixXd& covariates,
                               const Eigen::VectorXd& gamma) {
  PairwiseProblem p{std::vector<double>(y.begin(), y.end()), covariates};
  return p.objective(gamma);
}

IndexModel fit_censored_index(const RegionSample& sample, const CensoredIndexOptions& options) {
  if (!sample.threshold) {
    throw Error(ErrorKind::validation, "arf",
                "region '" + sample.region_id + "': censored index estimation needs a region threshold");
  }
  const double log_threshold = std::log(*sample.threshold);
  const Eigen::VectorXd& raw = sample.index_outcomes ? *sample.index_outcomes : sample.outcomes;

  PairwiseProblem problem;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (std::isfinite(raw(i))) rows.push_back(i);
  }
  problem.x.resize(static_cast<Eigen::Index>(rows.size()), sample.covariates.cols());
  std::size_t uncensored = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = std::max(raw(rows[r]) - log_threshold, 0.0);
    problem.y.push_back(v);
    if (v > 0.0) ++uncensored;
    problem.x.row(static_cast<Eigen::Index>(r)) = sample.covariates.row(rows[r]);
  }
  if (problem.y.size() < 2) {
    throw Error(ErrorKind::no_identification, "arf",
                "region '" + sample.region_id + "': fewer than two observed index outcomes");
  }
  if (uncensored == 0) {
    throw Error(ErrorKind::no_identification, "arf",
                "region '" + sample.region_id + "': every observation is censored at the threshold");
  }

  // Pairwise least squares over all pairs equals OLS on demeaned data.
  const Eigen::Index d = problem.x.cols();
  const Eigen::Map<const Eigen::VectorXd> yv(problem.y.data(), static_cast<Eigen::Index>(problem.y.size()));
  const Eigen::RowVectorXd xbar = problem.x.colwise().mean();
  const Eigen::MatrixXd xc = problem.x.rowwise() - xbar;
  Eigen::VectorXd ols = xc.colPivHouseholderQr().solve((yv.array() - yv.mean()).matrix());
  if (!ols.allFinite()) ols = Eigen::VectorXd::Zero(d);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Eigen::VectorXd> starts{Eigen::VectorXd::Zero(d)};
  for (std::size_t s = 1; s < std::max<std::size_t>(options.starts, 1); ++s) {
    Eigen::VectorXd g = ols;
    for (Eigen::Index j = 0; j < d; ++j) g(j) += 0.1 * (1.0 + std::abs(ols(j))) * noise(rng);
    starts.push_back(std::move(g));
  }

  double best_value = kInf;
  Eigen::VectorXd best;
  for (const auto& start : starts) {
    double value = 0.0;
    Eigen::VectorXd g = minimise_from(problem, start, options, value);
    if (value < best_value) {
      best_value = value;
      best = std::move(g);
    }
  }
  if (!best.allFinite()) throw Error(ErrorKind::numeric, "arf", "censored index optimisation diverged");
  return IndexModel{best, log_threshold};
}

MatchedGroup matched_group(std::span<const double> pre_index, std::span<const double> post_index, double trim) {
  MatchedGroup g;
  g.indicator.assign(post_index.size(), 0);
  if (pre_index.empty() || post_index.empty()) return g;
  const auto [lo, hi] = std::minmax_element(pre_index.begin(), pre_index.end());
  g.support_lo = *lo + trim;
  g.support_hi = *hi - trim;
  for (std::size_t i = 0; i < post_index.size(); ++i) {
    if (post_index[i] >= g.support_lo && post_index[i] <= g.support_hi) {
      g.indicator[i] = 1;
      ++g.matched_count;
    }
  }
  g.matched_fraction = static_cast<double>(g.matched_count) / static_cast<double>(post_index.size());
  return g;
}

Eigen::VectorXd pre_policy_index(const PolicySpec& policy, const Eigen::MatrixXd& covariates,
                                 const IndexModel* index_model) {
  return std::visit(
      [&](const auto& p) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IndexThresholdPolicy>) {
          if (index_model == nullptr) {
            throw Error(ErrorKind::validation, "arf", "index-threshold policy requires an estimated index model");
          }
          return index_model->evaluate(covariates);
        } else if constexpr (std::is_same_v<T, CovariateShiftPolicy>) {
          return covariates * p.loadings;
        } else {
          return (p.pre_scale * covariates.col(static_cast<Eigen::Index>(p.column)).array() + p.pre_offset).matrix();
        }
      },
      policy);
}

Eigen::VectorXd post_policy_index(const PolicySpec& policy, const Eigen::MatrixXd& covariates,
                                  const IndexModel* index_model) {
  return std::visit(
      [&](const auto& p) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IndexThresholdPolicy>) {
          if (index_model == nullptr) {
            throw Error(ErrorKind::validation, "arf", "index-threshold policy requires an estimated index model");
          }
          return ((covariates * index_model->gamma).array() - std::log(p.counterfactual_threshold)).matrix();
        } else if constexpr (std::is_same_v<T, CovariateShiftPolicy>) {
          Eigen::VectorXd out(covariates.rows());
          const double shift_effect = p.shift.dot(p.loadings);
          for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
            out(i) = covariates.row(i).dot(p.loadings) + (p.selected(covariates.row(i)) ? shift_effect : 0.0);
          }
          return out;
        } else {
          return (p.post_scale * covariates.col(static_cast<Eigen::Index>(p.column)).array() + p.post_offset).matrix();
        }
      },
      policy);
}

MatchedGroup matched_group(const RegionSample& target, const PolicySpec& policy, const IndexModel* index_model,
                           double trim) {
  const Eigen::VectorXd pre = pre_policy_index(policy, target.covariates, index_model);
  const Eigen::VectorXd post = post_policy_index(policy, target.covariates, index_model);
  return matched_group(std::span<const double>(pre.data(), static_cast<std::size_t>(pre.size())),
                       std::span<const double>(post.data(), static_cast<std::size_t>(post.size())), trim);
}

}  // namespace syndecomp
