#include "syndecomp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss.hpp>

#include "syndecomp/error.hpp"
#include "syndecomp/parallel.hpp"

namespace syndecomp {

McFamily parse_family(const std::string& name) {
  if (name == "linear") return McFamily::linear;
  if (name == "nonlinear") return McFamily::nonlinear;
  throw Error(ErrorKind::usage, "simulation", "unknown family '" + name + "' (expected linear or nonlinear)");
}

std::string to_string(McFamily family) { return family == McFamily::linear ? "linear" : "nonlinear"; }

void McSpec::validate() const {
  if (!(s > 0.0 && s <= 1.0)) throw Error(ErrorKind::usage, "simulation", "overlap s must lie in (0, 1]");
  if (n0 < 10) throw Error(ErrorKind::usage, "simulation", "n0 must be at least 10");
  if (!(sigma_u >= 0.0)) throw Error(ErrorKind::usage, "simulation", "sigma_u must be nonnegative");
  if (R < 1) throw Error(ErrorKind::usage, "simulation", "R must be positive");
  if (B < 2) throw Error(ErrorKind::usage, "simulation", "B must be at least 2");
}

McSpec mc_preset(const std::string& name, McFamily family, std::size_t n0, double s) {
  McSpec spec;
  spec.family = family;
  spec.n0 = n0;
  spec.s = s;
  if (name == "reduced") {
    spec.R = 300;
    spec.B = 299;
  } else if (name == "full") {
    spec.R = 1000;
    spec.B = 999;
  } else {
    throw Error(ErrorKind::usage, "simulation", "unknown preset '" + name + "' (expected reduced or full)");
  }
  return spec;
}

McTruth mc_truth(McFamily family) {
  McTruth t;
  if (family == McFamily::linear) {
    t.theta0 = 0.2;
    t.w0 = Eigen::Vector3d(0.0, 0.5, 0.5);
  } else {
    // integral over [0, 1] of 0.2u^3 + 0.4u^2 - 0.2u - 0.4
    t.theta0 = 0.05 + 0.4 / 3.0 - 0.1 - 0.4;
    t.w0 = Eigen::Vector3d(0.4, 0.4, 0.2);
  }
  return t;
}

double mc_target_arf(McFamily family, double mu) {
  if (family == McFamily::linear) return 0.4 * mu;
  return 0.2 * mu * mu * mu + 0.4 * mu * mu - 0.2 * mu - 0.4;
}

Eigen::Vector3d mc_source_arfs(McFamily family, double mu) {
  if (family == McFamily::linear) return {mu, 0.5 * mu - 1.0, 0.3 * mu + 1.0};
  return {mu, mu * mu - 1.0, mu * mu * mu - 3.0 * mu};
}

IdentityIndexPolicy mc_policy(double s) {
  IdentityIndexPolicy p;
  p.column = 0;
  p.post_scale = 1.0 / s;
  p.post_offset = -(1.0 - s) / s;
  return p;
}

McData generate_mc_data(const McSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto region = [&](const std::string& id, double lo, auto&& arf) {
    std::mt19937_64 rng(derive_seed(seed, fnv1a(id)));
    std::uniform_real_distribution<double> ux(lo, 1.0);
    std::normal_distribution<double> noise(0.0, spec.sigma_u);
    RegionSample r;
    r.region_id = id;
    const auto n = static_cast<Eigen::Index>(spec.n0);
    r.covariates.resize(n, 1);
    r.outcomes.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = ux(rng);
      r.covariates(i, 0) = x;
      r.outcomes(i) = arf(x) + noise(rng);
    }
    return r;
  };
  McData out;
  out.data.target = region("0", 1.0 - spec.s, [&](double x) { return mc_target_arf(spec.family, x); });
  for (int k = 0; k < 3; ++k) {
    out.data.sources.push_back(
        region(std::to_string(k + 1), 0.0, [&](double x) { return mc_source_arfs(spec.family, x)(k); }));
  }
  out.policy = mc_policy(spec.s);
  out.truth = mc_truth(spec.family);
  return out;
}

MomentSystem population_moment_system(McFamily family, double s) {
  using boost::math::quadrature::gauss;
  const double lo = 1.0 - s;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 3);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
  for (Eigen::Index a = 0; a < 3; ++a) {
    for (Eigen::Index b = a; b < 3; ++b) {
      H(a, b) = gauss<double, 10>::integrate(
          [&](double u) { const auto m = mc_source_arfs(family, u); return m(a) * m(b); }, lo, 1.0);
      H(b, a) = H(a, b);
    }
    h(a) = gauss<double, 10>::integrate(
        [&](double u) { return mc_source_arfs(family, u)(a) * mc_target_arf(family, u); }, lo, 1.0);
  }
  const double c = gauss<double, 10>::integrate(
      [&](double u) { const double m0 = mc_target_arf(family, u); return m0 * m0; }, lo, 1.0);
  return make_moment_system(H, h, 0, c);
}

McResult run_mc(const McSpec& spec, const AnalysisConfig& config, const McOptions& options) {
  spec.validate();
  config.validate();
  McResult res;
  res.spec = spec;
  res.truth = mc_truth(spec.family);
  res.with_inference = options.inference;
  res.records.resize(spec.R);

  parallel_for(spec.R, options.jobs, [&](std::size_t r) {
    McReplication& rec = res.records[r];
    rec.index = r;
    try {
      const McData mc = generate_mc_data(spec, derive_seed(config.master_seed, r, 1));
      AnalysisOptions opts;
      opts.config = config;
      opts.config.bootstrap_draws = spec.B;
      opts.config.master_seed = derive_seed(config.master_seed, r, 2);
      opts.jobs = 1;
      if (options.inference) {
        const InferenceResult inf = run_inference(mc.data, mc.policy, opts);
        rec.theta_hat = inf.estimate.prediction.theta;
        rec.w_hat = inf.estimate.weights.w;
        rec.matched_fraction = inf.estimate.prediction.matched_fraction;
        rec.ci_lower = inf.interval.lower;
        rec.ci_upper = inf.interval.upper;
        rec.covered = inf.interval.contains(res.truth.theta0);
        rec.rejected = inf.transferability_rejected;
      } else {
        const EstimateResult est = run_estimate(mc.data, mc.policy, opts);
        rec.theta_hat = est.prediction.theta;
        rec.w_hat = est.weights.w;
        rec.matched_fraction = est.prediction.matched_fraction;
      }
      rec.ok = true;
    } catch (const Error& e) {
      rec.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });

  std::vector<double> thetas;
  std::vector<double> w_errors;
  double sq_w = 0.0;
  double length_sum = 0.0;
  std::size_t lengths = 0;
  std::size_t covered = 0;
  std::size_t rejected = 0;
  for (const auto& rec : res.records) {
    if (!rec.ok) {
      ++res.failed;
      continue;
    }
    thetas.push_back(rec.theta_hat);
    const double e = (rec.w_hat - res.truth.w0).norm();
    w_errors.push_back(e);
    sq_w += e * e;
    if (rec.covered) ++covered;
    if (rec.rejected) ++rejected;
    if (options.inference && std::isfinite(rec.ci_lower) && std::isfinite(rec.ci_upper)) {
      length_sum += rec.ci_upper - rec.ci_lower;
      ++lengths;
    }
  }
  if (static_cast<double>(res.failed) > options.max_failure_fraction * static_cast<double>(spec.R)) {
    std::string first;
    for (const auto& rec : res.records) {
      if (!rec.ok) {
        first = rec.error;
        break;
      }
    }
    throw Error(ErrorKind::numeric, "simulation",
                std::to_string(res.failed) + " of " + std::to_string(spec.R) +
                    " replications failed (first failure: " + first + ")");
  }
  res.completed = thetas.size();
  if (res.completed == 0) return res;
  const double m = static_cast<double>(res.completed);
  double mean = 0.0;
  for (double t : thetas) mean += t;
  mean /= m;
  double var = 0.0;
  double mse = 0.0;
  for (double t : thetas) {
    var += (t - mean) * (t - mean);
    mse += (t - res.truth.theta0) * (t - res.truth.theta0);
  }
  res.bias_theta = mean - res.truth.theta0;
  res.var_theta = var / m;
  res.rmse_theta = std::sqrt(mse / m);
  res.rmse_w = std::sqrt(sq_w / m);
  std::sort(w_errors.begin(), w_errors.end());
  const std::size_t mid = w_errors.size() / 2;
  res.median_w_error = w_errors.size() % 2 == 1 ? w_errors[mid] : 0.5 * (w_errors[mid - 1] + w_errors[mid]);
  if (options.inference) {
    res.coverage = static_cast<double>(covered) / m;
    res.rejection_rate = static_cast<double>(rejected) / m;
    res.avg_ci_length = lengths > 0 ? length_sum / static_cast<double>(lengths) : 0.0;
  }
  return res;
}

}  // namespace syndecomp
