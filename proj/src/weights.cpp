#include "syndecomp/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "syndecomp/error.hpp"

namespace syndecomp {

MomentSystem make_moment_system(Eigen::MatrixXd H, Eigen::VectorXd h, std::size_t n0,
                                std::optional<double> target_second_moment) {
  if (H.rows() != H.cols() || H.rows() != h.size() || h.size() == 0) {
    throw Error(ErrorKind::validation, "weights", "moment system dimensions disagree");
  }
  if (!H.allFinite() || !h.allFinite()) {
    throw Error(ErrorKind::numeric, "weights", "moment system has non-finite entries");
  }
  MomentSystem sys;
  sys.H = 0.5 * (H + H.transpose());
  sys.h = std::move(h);
  sys.n0 = n0;
  sys.target_second_moment = target_second_moment;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.H, Eigen::EigenvaluesOnly);
  sys.min_eigenvalue = eig.eigenvalues().minCoeff();
  return sys;
}

MomentSystem build_moment_system(const MatchedGroup& matched, const Eigen::VectorXd& target_arf_post,
                                 const Eigen::MatrixXd& source_arfs_post) {
  const Eigen::Index n0 = source_arfs_post.rows();
  const Eigen::Index K = source_arfs_post.cols();
  if (target_arf_post.size() != n0 || static_cast<Eigen::Index>(matched.indicator.size()) != n0) {
    throw Error(ErrorKind::validation, "weights", "ARF vectors are not aligned with the target sample");
  }
  if (K == 0) throw Error(ErrorKind::validation, "weights", "no source ARFs supplied");
  if (matched.matched_count == 0) {
    throw Error(ErrorKind::empty_matched_group, "weights",
                "matched group is empty: no target observation has a post-policy index inside the pre-policy "
                "support, so the weights are not identified (reduce the policy change or the trimming)");
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(K);
  double m0_sq = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n0; ++i) {
    if (!matched.matched(static_cast<std::size_t>(i))) continue;
    const auto m = source_arfs_post.row(i);
    const double m0 = target_arf_post(i);
    if (!std::isfinite(m0) || !m.allFinite()) {
      throw Error(ErrorKind::numeric, "weights",
                  "non-finite ARF value at target observation " + std::to_string(i));
    }
    H.noalias() += m.transpose() * m;
    h.noalias() += m0 * m.transpose();
    m0_sq += m0 * m0;
    ++count;
  }
  const double scale = 1.0 / static_cast<double>(n0);
  MomentSystem sys = make_moment_system(H * scale, h * scale, static_cast<std::size_t>(n0), m0_sq * scale);
  sys.matched_count = count;
  return sys;
}

double qp_objective(const MomentSystem& sys, const Eigen::VectorXd& w) {
  return w.dot(sys.H * w) - 2.0 * sys.h.dot(w);
}

double rho_squared(const MomentSystem& sys, const Eigen::VectorXd& w) {
  double c;
  if (sys.target_second_moment) {
    c = *sys.target_second_moment;
  } else {
    const Eigen::VectorXd u = sys.H.completeOrthogonalDecomposition().solve(sys.h);
    c = sys.h.dot(u);
  }
  return std::max(0.0, qp_objective(sys, w) + c);
}

double zero_weight_tolerance(const MomentSystem& sys) {
  const double hn = sys.H.norm();
  const double ratio = hn > 0.0 ? sys.h.norm() / hn : 0.0;
  return 1e-10 * (1.0 + ratio);
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index K = v.size();
  std::vector<double> u(v.data(), v.data() + K);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < K; ++j) {
    cumulative += u[static_cast<std::size_t>(j)];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

KktMultipliers kkt_multipliers(const MomentSystem& sys, const Eigen::VectorXd& w, double zero_tol) {
  const Eigen::VectorXd g = sys.H * w - sys.h;
  double sum = 0.0;
  std::size_t support = 0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w(k) > zero_tol) {
      sum += g(k);
      ++support;
    }
  }
  KktMultipliers out;
  out.lambda_tilde = support > 0 ? -sum / static_cast<double>(support) : 0.0;
  out.lambda = Eigen::VectorXd::Zero(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (!(w(k) > zero_tol)) out.lambda(k) = g(k) + out.lambda_tilde;
  }
  return out;
}

namespace {

bool lexicographically_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<std::size_t> zero_indices(const Eigen::VectorXd& w, double tol) {
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (!(w(k) > tol)) out.push_back(static_cast<std::size_t>(k));
  }
  return out;
}

// Clears entries below tol and renormalises onto the simplex.
Eigen::VectorXd clean_weights(Eigen::VectorXd w, double tol) {
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w(k) <= tol) w(k) = 0.0;
  }
  const double s = w.sum();
  if (s > 0.0) w /= s;
  return w;
}

Eigen::VectorXd enumerate_faces(const MomentSystem& sys, double tol) {
  const auto K = static_cast<Eigen::Index>(sys.size());
  const double scale = 1.0 + std::abs(qp_objective(sys, Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K))));
  double best_value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  std::vector<std::size_t> best_active;
  const std::uint64_t faces = std::uint64_t{1} << K;
  std::vector<Eigen::Index> support;
  for (std::uint64_t mask = 1; mask < faces; ++mask) {
    support.clear();
    for (Eigen::Index k = 0; k < K; ++k) {
      if (mask & (std::uint64_t{1} << k)) support.push_back(k);
    }
    const auto m = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) kkt(a, b) = sys.H(support[a], support[b]);
      kkt(a, m) = 1.0;
      kkt(m, a) = 1.0;
      rhs(a) = sys.h(support[a]);
    }
    rhs(m) = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite()) continue;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(K);
    bool feasible = true;
    for (Eigen::Index a = 0; a < m; ++a) {
      if (sol(a) < -tol) {
        feasible = false;
        break;
      }
      w(support[a]) = sol(a);
    }
    if (!feasible || std::abs(w.sum() - 1.0) > 1e-8) continue;
    w = clean_weights(w, tol);
    const double value = qp_objective(sys, w);
    const auto active = zero_indices(w, tol);
    const double gap = value - best_value;
    if (gap < -1e-13 * scale || (std::abs(gap) <= 1e-13 * scale && lexicographically_less(active, best_active))) {
      best_value = std::min(value, best_value);
      best = w;
      best_active = active;
    }
  }
  return best;
}

Eigen::VectorXd projected_gradient(const MomentSystem& sys, const QpOptions& options) {
  const auto K = static_cast<Eigen::Index>(sys.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.H, Eigen::EigenvaluesOnly);
  const double lipschitz = 2.0 * std::max(eig.eigenvalues().maxCoeff(), 1e-300);
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  Eigen::VectorXd y = w;
  double t = 1.0;
  double value = qp_objective(sys, w);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd grad = 2.0 * (sys.H * y - sys.h);
    const Eigen::VectorXd next = project_to_simplex(y - step * grad);
    const double next_value = qp_objective(sys, next);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (next_value > value) {
      // restart momentum
      y = w;
      t = 1.0;
      continue;
    }
    const double move = (next - w).norm();
    y = next + ((t - 1.0) / t_next) * (next - w);
    w = next;
    t = t_next;
    value = next_value;
    if (move <= 1e-15) break;
  }
  return w;
}

}  // namespace

WeightSolution solve_simplex_qp(const MomentSystem& sys, const QpOptions& options) {
  if (!sys.H.allFinite() || !sys.h.allFinite()) {
    throw Error(ErrorKind::numeric, "weights", "moment system has non-finite entries");
  }
  const std::size_t K = sys.size();
  if (K == 0) throw Error(ErrorKind::validation, "weights", "empty moment system");
  const double tol = zero_weight_tolerance(sys);

  WeightSolution out;
  out.degenerate = sys.min_eigenvalue < 1e-10;
  if (out.degenerate && !options.robust_mode) {
    out.warnings.push_back("H is numerically singular (min eigenvalue " + std::to_string(sys.min_eigenvalue) +
                           "); the weights may not be unique, consider --robust");
  }
  if (K <= options.enumeration_limit) {
    out.w = enumerate_faces(sys, tol);
    if (out.w.size() == 0) throw Error(ErrorKind::numeric, "weights", "no feasible face found in the simplex QP");
  } else {
    out.w = clean_weights(projected_gradient(sys, options), tol);
  }
  out.objective = qp_objective(sys, out.w);
  out.rho_sq = rho_squared(sys, out.w);
  out.kkt = kkt_multipliers(sys, out.w, tol);
  out.active_set = zero_indices(out.w, tol);
  return out;
}

KktCheck check_kkt(const MomentSystem& sys, const WeightSolution& solution) {
  const Eigen::VectorXd& w = solution.w;
  const auto& m = solution.kkt;
  KktCheck c;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(w.size());
  c.stationarity = (sys.H * w - sys.h + m.lambda_tilde * ones - m.lambda).norm();
  c.primal = std::max(std::abs(w.sum() - 1.0), std::max(0.0, -w.minCoeff()));
  c.dual = std::max(0.0, -m.lambda.minCoeff());
  c.complementarity = m.lambda.cwiseProduct(w).cwiseAbs().maxCoeff();
  const double scale = 1e-8 * (1.0 + sys.h.norm() + sys.H.norm());
  c.ok = c.stationarity <= scale && c.primal <= 1e-10 && c.dual <= scale && c.complementarity <= scale;
  return c;
}

std::vector<GroupWeights> solve_groupwise_weights(const std::vector<GroupSystem>& groups, const QpOptions& options) {
  std::vector<GroupWeights> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    GroupWeights r;
    r.key = g.key;
    if (!g.system) {
      r.error = g.error.empty() ? "group has no moment system" : g.error;
    } else {
      try {
        r.solution = solve_simplex_qp(*g.system, options);
      } catch (const Error& e) {
        r.error = e.what();
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace syndecomp
