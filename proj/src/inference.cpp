#include "syndecomp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "syndecomp/error.hpp"
#include "syndecomp/parallel.hpp"

namespace syndecomp {

double chi2_quantile(double p, double df) {
  if (!(df > 0.0)) return 0.0;
  return boost::math::quantile(boost::math::chi_squared(df), p);
}

Eigen::VectorXd f_vector(const MomentSystem& sys, const Eigen::VectorXd& w) {
  const Eigen::VectorXd g = sys.H * w - sys.h;
  return g - w.dot(g) * Eigen::VectorXd::Ones(w.size());
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::Index p = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  if (p == 0) return x;
  std::vector<char> passive(static_cast<std::size_t>(p), 0);
  const double tol = 1e-13 * (1.0 + A.norm() * (1.0 + b.norm()));

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    const Eigen::VectorXd s = sub.colPivHouseholderQr().solve(b);
    z.setZero(p);
    for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = s(static_cast<Eigen::Index>(c));
  };

  const std::size_t max_outer = static_cast<std::size_t>(3 * p + 10);
  for (std::size_t outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd grad = A.transpose() * (b - A * x);
    Eigen::Index enter = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && grad(j) > best) {
        best = grad(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = 1;
    Eigen::VectorXd z;
    for (std::size_t inner = 0; inner <= static_cast<std::size_t>(p); ++inner) {
      solve_passive(z);
      bool positive = true;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) positive = false;
      }
      if (positive) break;
      double step = 1.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) step = std::min(step, x(j) / (x(j) - z(j)));
      }
      x += step * (z - x);
      for (Eigen::Index j = 0; j < p; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = 0;
          x(j) = 0.0;
        }
      }
    }
    x = z;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!passive[static_cast<std::size_t>(j)]) x(j) = 0.0;
    }
  }
  return x;
}

namespace {

void check_metric(const Eigen::MatrixXd& omega) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega, Eigen::EigenvaluesOnly);
  const double trace = omega.trace();
  if (!omega.allFinite() || !(trace > 0.0) || !(eig.eigenvalues().minCoeff() > 1e-12 * trace)) {
    throw Error(ErrorKind::singular_metric, "inference",
                "bootstrap covariance Omega is singular; rerun with --robust or more bootstrap draws");
  }
}

ConeProjection project_with(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& f, const Eigen::VectorXd& w,
                            std::size_t n0) {
  const Eigen::Index K = f.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(w(k) > 1e-12)) free.push_back(k);
  }
  const auto L = llt.matrixL();
  const Eigen::VectorXd b = L.solve(f);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(free.size()));
  for (std::size_t c = 0; c < free.size(); ++c) E(free[c], static_cast<Eigen::Index>(c)) = 1.0;
  const Eigen::MatrixXd A = L.solve(E);
  const Eigen::VectorXd x = nnls(A, b);

  ConeProjection out;
  out.lambda = Eigen::VectorXd::Zero(K);
  for (std::size_t c = 0; c < free.size(); ++c) out.lambda(free[c]) = x(static_cast<Eigen::Index>(c));
  out.t_value = static_cast<double>(n0) * (b - A * x).squaredNorm();
  const double zero_tol = 1e-8 * (1.0 + f.norm());
  out.active_pattern.assign(static_cast<std::size_t>(K), 0);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (std::abs(out.lambda(k)) <= zero_tol) {
      out.active_pattern[static_cast<std::size_t>(k)] = 1;
      ++out.df;
    }
  }
  return out;
}

class CriticalValues {
 public:
  explicit CriticalValues(double level) : level_(level) {}
  double operator()(std::size_t df) {
    auto it = cache_.find(df);
    if (it == cache_.end()) it = cache_.emplace(df, chi2_quantile(1.0 - level_, static_cast<double>(df))).first;
    return it->second;
  }

 private:
  double level_;
  std::map<std::size_t, double> cache_;
};

void tally(WeightConfidenceSet& set) {
  set.accepted_count = static_cast<std::size_t>(std::count(set.accepted.begin(), set.accepted.end(), 1));
  set.empty = set.accepted_count == 0;
}

}  // namespace

ConeProjection project_cone(const Eigen::VectorXd& f_hat, const Eigen::MatrixXd& omega, const Eigen::VectorXd& w,
                            std::size_t n0) {
  if (f_hat.size() != w.size() || omega.rows() != w.size() || omega.cols() != w.size()) {
    throw Error(ErrorKind::validation, "inference", "cone projection dimensions disagree");
  }
  check_metric(omega);
  const Eigen::LLT<Eigen::MatrixXd> llt(omega);
  return project_with(llt, f_hat, w, n0);
}

std::vector<Eigen::VectorXd> simplex_grid(std::size_t K, std::size_t size, std::uint64_t seed,
                                          const std::optional<Eigen::VectorXd>& w_hat) {
  if (K == 0) throw Error(ErrorKind::validation, "inference", "simplex dimension must be positive");
  if (K == 1) return {Eigen::VectorXd::Ones(1)};
  std::vector<Eigen::VectorXd> grid;
  grid.reserve(size + K + 1);
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> cuts(K + 1);
  for (std::size_t g = 0; g < size; ++g) {
    cuts[0] = 0.0;
    cuts[K] = 1.0;
    for (std::size_t j = 1; j < K; ++j) cuts[j] = unif(rng);
    std::sort(cuts.begin() + 1, cuts.begin() + static_cast<std::ptrdiff_t>(K));
    Eigen::VectorXd w(static_cast<Eigen::Index>(K));
    for (std::size_t j = 0; j < K; ++j) w(static_cast<Eigen::Index>(j)) = cuts[j + 1] - cuts[j];
    grid.push_back(std::move(w));
  }
  for (std::size_t k = 0; k < K; ++k) grid.push_back(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(k)));
  if (w_hat) grid.push_back(*w_hat);
  return grid;
}

WeightConfidenceSet weight_confidence_set(const MomentSystem& sys, const Eigen::MatrixXd& omega, std::size_t n0,
                                          double kappa, std::vector<Eigen::VectorXd> grid, std::size_t jobs) {
  check_metric(omega);
  const Eigen::LLT<Eigen::MatrixXd> llt(omega);
  WeightConfidenceSet set;
  set.kappa = kappa;
  set.grid = std::move(grid);
  const std::size_t G = set.grid.size();
  set.t_values.assign(G, 0.0);
  set.df.assign(G, 0);
  parallel_for(G, jobs, [&](std::size_t g) {
    const ConeProjection p = project_with(llt, f_vector(sys, set.grid[g]), set.grid[g], n0);
    set.t_values[g] = p.t_value;
    set.df[g] = p.df;
  });
  return relevel(set, kappa);
}

WeightConfidenceSet relevel(const WeightConfidenceSet& set, double level) {
  WeightConfidenceSet out = set;
  out.kappa = level;
  out.accepted.assign(set.grid.size(), 0);
  CriticalValues crit(level);
  for (std::size_t g = 0; g < set.grid.size(); ++g) {
    if (std::isfinite(set.t_values[g]) && set.t_values[g] <= crit(set.df[g])) out.accepted[g] = 1;
  }
  tally(out);
  return out;
}

bool transferability_test(const WeightConfidenceSet& set) { return set.empty; }

ThetaConfidenceInterval theta_confidence_interval(const WeightConfidenceSet& set, const ThetaDecomposition& theta,
                                                  const SigmaEstimate& sigma, std::size_t n0, double alpha,
                                                  double kappa, const Eigen::VectorXd& w_hat) {
  ThetaConfidenceInterval ci;
  ci.alpha = alpha;
  ci.kappa = kappa;
  ci.point_estimate = theta(w_hat);
  ci.weight_set_empty = set.empty;
  if (set.empty) {
    ci.lower = std::numeric_limits<double>::quiet_NaN();
    ci.upper = std::numeric_limits<double>::quiet_NaN();
    return ci;
  }
  if (!(sigma.sigma > 0.0)) {
    throw Error(ErrorKind::degenerate_scale, "inference", "confidence interval needs a positive scale estimate");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < set.grid.size(); ++g) {
    if (!set.accepted[g]) continue;
    const double t = theta(set.grid[g]);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const double half = std::sqrt(chi2_quantile(1.0 - alpha + kappa, 1.0)) * sigma.sigma /
                      std::sqrt(static_cast<double>(n0));
  ci.lower = lo - half;
  ci.upper = hi + half;
  return ci;
}

RobustInference robust_weight_confidence_set(const MomentSystem& base, const std::vector<const BootstrapDraw*>& draws,
                                             const ThetaDecomposition& theta, std::vector<Eigen::VectorXd> grid,
                                             double alpha, double kappa, double c0, const Eigen::VectorXd& w_hat,
                                             std::size_t jobs) {
  const std::size_t n0 = base.n0;
  RobustInference out;
  WeightConfidenceSet& set = out.set;
  set.kappa = kappa;
  set.grid = std::move(grid);
  const std::size_t G = set.grid.size();
  set.t_values.assign(G, std::numeric_limits<double>::infinity());
  set.df.assign(G, 0);
  out.sigma.assign(G, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(G, 0);

  parallel_for(G, jobs, [&](std::size_t g) {
    const Eigen::VectorXd& w = set.grid[g];
    std::vector<Eigen::VectorXd> gammas;
    std::vector<double> stars;
    gammas.reserve(draws.size());
    stars.reserve(draws.size());
    for (const BootstrapDraw* d : draws) {
      gammas.push_back(gamma_star(*d->system, base, w));
      stars.push_back(d->decomposition(w));
    }
    try {
      const OmegaEstimate om = omega_hat(gammas, base, w, c0);
      ConeProjection p;
      try {
        p = project_cone(f_vector(base, w), om.omega, w, n0);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::singular_metric || !(om.omega.trace() > 0.0)) throw;
        const auto K = om.omega.rows();
        const Eigen::MatrixXd ridged =
            om.omega + 1e-8 * om.omega.trace() / static_cast<double>(K) * Eigen::MatrixXd::Identity(K, K);
        p = project_cone(f_vector(base, w), ridged, w, n0);
      }
      const SigmaEstimate s = sigma_hat(stars, theta(w), n0);
      set.t_values[g] = p.t_value;
      set.df[g] = p.df;
      out.sigma[g] = s.sigma;
    } catch (const Error&) {
      failed[g] = 1;
    }
  });
  set.failed_points = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  set = relevel(set, kappa);

  ThetaConfidenceInterval& ci = out.interval;
  ci.alpha = alpha;
  ci.kappa = kappa;
  ci.point_estimate = theta(w_hat);
  ci.weight_set_empty = set.empty;
  if (set.empty) {
    ci.lower = std::numeric_limits<double>::quiet_NaN();
    ci.upper = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double z = std::sqrt(chi2_quantile(1.0 - alpha + kappa, 1.0));
  const double root_n = std::sqrt(static_cast<double>(n0));
  ci.lower = std::numeric_limits<double>::infinity();
  ci.upper = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < G; ++g) {
    if (!set.accepted[g]) continue;
    const double t = theta(set.grid[g]);
    ci.lower = std::min(ci.lower, t - z * out.sigma[g] / root_n);
    ci.upper = std::max(ci.upper, t + z * out.sigma[g] / root_n);
  }
  return out;
}

}  // namespace syndecomp
