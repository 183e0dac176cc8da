#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "syndecomp/analysis.hpp"
#include "syndecomp/error.hpp"
#include "syndecomp/inference.hpp"
#include "syndecomp/simulation.hpp"

using namespace syndecomp;

namespace {

MomentSystem exact_system(const Eigen::VectorXd& w0, std::mt19937_64& rng) {
  const Eigen::Index K = w0.size();
  const Eigen::MatrixXd H = oracle::random_spd(K, rng, 20.0);
  return make_moment_system(H, H * w0, 100);
}

WeightConfidenceSet single_point_set(const Eigen::VectorXd& w) {
  WeightConfidenceSet s;
  s.grid = {w};
  s.t_values = {0.0};
  s.df = {static_cast<std::size_t>(w.size())};
  s.accepted = {1};
  s.accepted_count = 1;
  s.empty = false;
  return s;
}

}  // namespace

TEST_CASE("chi-square critical values") {
  CHECK(chi2_quantile(0.95, 1) == doctest::Approx(3.841458820694124).epsilon(1e-12));
  CHECK(chi2_quantile(0.95, 2) == doctest::Approx(5.991464547107979).epsilon(1e-12));
  CHECK(chi2_quantile(0.995, 1) == doctest::Approx(7.879438576622419).epsilon(1e-12));
  CHECK(chi2_quantile(0.95, 0) == 0.0);
  for (std::size_t df = 1; df < 12; ++df) {
    CHECK(chi2_quantile(0.995, static_cast<double>(df)) < chi2_quantile(0.995, static_cast<double>(df + 1)));
  }
}

TEST_CASE("f vector") {
  const auto sys = make_moment_system(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.0, 1.0), 10);
  CHECK((f_vector(sys, Eigen::Vector2d(1.0, 0.0)) - Eigen::Vector2d(0.0, -2.0)).norm() < 1e-15);
  CHECK((f_vector(sys, Eigen::Vector2d(0.5, 0.5)) - Eigen::Vector2d(0.5, -0.5)).norm() < 1e-15);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto s = exact_system(oracle::random_simplex_point(4, rng), rng);
    const Eigen::VectorXd w = oracle::random_simplex_point(4, rng);
    CHECK(std::abs(w.dot(f_vector(s, w))) < 1e-12);
  }
}

TEST_CASE("nonnegative least squares") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::Vector3d b(1.0, -2.0, 0.5);
  CHECK((nnls(A, b) - Eigen::Vector3d(1.0, 0.0, 0.5)).norm() < 1e-14);
  CHECK(nnls(Eigen::MatrixXd(3, 0), b).size() == 0);
}

TEST_CASE("cone projection") {
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  SUBCASE("interior point: nothing to project onto") {
    const Eigen::Vector3d f(0.1, -0.2, 0.1);
    const auto p = project_cone(f, I, Eigen::Vector3d(0.2, 0.3, 0.5), 50);
    CHECK(p.t_value == doctest::Approx(50.0 * f.squaredNorm()));
    CHECK(p.df == 3);
    CHECK(p.lambda.norm() == 0.0);
  }
  SUBCASE("feasible f gives zero") {
    const Eigen::Vector3d f(0.0, 0.0, 0.4);
    const auto p = project_cone(f, I, Eigen::Vector3d(0.5, 0.5, 0.0), 50);
    CHECK(p.t_value < 1e-20);
    CHECK(p.lambda(2) == doctest::Approx(0.4));
    CHECK(p.df == 2);
  }
  SUBCASE("brute force at K = 3") {
    const Eigen::Vector3d f(0.2, -0.1, -0.3);
    const Eigen::Vector3d w(0.5, 0.5, 0.0);
    const auto p = project_cone(f, I, w, 100);
    const auto o = oracle::exhaustive_cone(f, I, w, 100);
    CHECK(p.t_value == doctest::Approx(o.t_value).epsilon(1e-12));
    CHECK(p.t_value == doctest::Approx(100.0 * 0.14));
    CHECK(p.df == o.df);
  }
  SUBCASE("random instances against exhaustive enumeration") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution zero(0.5);
    for (int t = 0; t < 300; ++t) {
      const Eigen::Index K = 2 + t % 4;
      const Eigen::MatrixXd omega = oracle::random_spd(K, rng);
      Eigen::VectorXd w = oracle::random_simplex_point(K, rng);
      for (Eigen::Index k = 1; k < K; ++k) {
        if (zero(rng)) w(k) = 0.0;
      }
      w /= w.sum();
      Eigen::VectorXd f(K);
      for (auto& v : f) v = z(rng);
      const auto p = project_cone(f, omega, w, 200);
      const auto o = oracle::exhaustive_cone(f, omega, w, 200);
      CHECK(std::abs(p.t_value - o.t_value) <= 1e-8 * (1.0 + o.t_value));
      CHECK(p.df == o.df);
      CHECK(p.t_value >= 0.0);
      CHECK(p.lambda.minCoeff() >= 0.0);
      CHECK(std::abs(p.lambda.dot(w)) < 1e-12);
    }
  }
  SUBCASE("singular metric") {
    Eigen::Matrix3d omega = I;
    omega(2, 2) = 0.0;
    try {
      project_cone(Eigen::Vector3d::Zero(), omega, Eigen::Vector3d(0.2, 0.3, 0.5), 10);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::singular_metric);
    }
  }
}

TEST_CASE("simplex grid") {
  SUBCASE("points lie on the simplex, vertices and w_hat are appended") {
    const Eigen::Vector3d w_hat(0.2, 0.2, 0.6);
    const auto g = simplex_grid(3, 500, 7, w_hat);
    REQUIRE(g.size() == 504);
    for (const auto& w : g) {
      CHECK(w.minCoeff() >= 0.0);
      CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
    }
    CHECK(g[500] == Eigen::Vector3d(1, 0, 0));
    CHECK(g[502] == Eigen::Vector3d(0, 0, 1));
    CHECK(g.back() == w_hat);
    CHECK(simplex_grid(3, 500, 7, w_hat) == g);
  }
  SUBCASE("K = 2 first coordinate is uniform") {
    const std::size_t n = 20000;
    const auto g = simplex_grid(2, n, 11);
    std::vector<double> x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(g[i](0));
    std::sort(x.begin(), x.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d = std::max({d, std::abs(static_cast<double>(i + 1) / n - x[i]), std::abs(x[i] - static_cast<double>(i) / n)});
    }
    CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
  }
  SUBCASE("K = 1") {
    const auto g = simplex_grid(1, 100, 1);
    REQUIRE(g.size() == 1);
    CHECK(g[0](0) == 1.0);
  }
}

TEST_CASE("weight confidence set") {
  std::mt19937_64 rng(3);
  SUBCASE("very large Omega accepts every point") {
    const auto sys = exact_system(Eigen::Vector3d(0.2, 0.3, 0.5), rng);
    const auto set = weight_confidence_set(sys, 1e12 * Eigen::Matrix3d::Identity(), 100, 0.005,
                                           simplex_grid(3, 200, 1));
    CHECK(set.accepted_count == set.grid.size());
    CHECK_FALSE(transferability_test(set));
  }
  SUBCASE("target unrelated to all sources gives an empty set") {
    const auto sys = make_moment_system(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), 10000);
    const auto set = weight_confidence_set(sys, 1e-4 * Eigen::Matrix3d::Identity(), 10000, 0.005,
                                           simplex_grid(3, 200, 1));
    CHECK(set.empty);
    CHECK(transferability_test(set));
  }
  SUBCASE("the true weights are accepted and are the minimum") {
    const Eigen::Vector3d w0(0.1, 0.6, 0.3);
    const auto sys = exact_system(w0, rng);
    const auto set = weight_confidence_set(sys, Eigen::Matrix3d::Identity(), 100, 0.005,
                                           simplex_grid(3, 500, 2, w0), 2);
    CHECK(set.accepted.back() == 1);
    CHECK(set.t_values.back() < 1e-20);
    CHECK(set.t_values.back() <= *std::min_element(set.t_values.begin(), set.t_values.end()) + 1e-8);
    for (std::size_t g = 0; g < 500; ++g) {
      if (set.grid[g].minCoeff() > 1e-12) CHECK(set.df[g] == 3);
    }
  }
  SUBCASE("estimated weights minimise the statistic over the grid") {
    for (int t = 0; t < 20; ++t) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Random(6, 4);
      const auto sys = make_moment_system(A.transpose() * A, Eigen::Vector4d::Random(), 100);
      const Eigen::VectorXd w_hat = solve_simplex_qp(sys).w;
      const auto set = weight_confidence_set(sys, oracle::random_spd(4, rng), 100, 0.005,
                                             simplex_grid(4, 300, static_cast<std::uint64_t>(t), w_hat));
      CHECK(set.t_values.back() <= *std::min_element(set.t_values.begin(), set.t_values.end()) + 1e-8);
    }
  }
  SUBCASE("relevel shrinks with a larger level") {
    const auto sys = exact_system(Eigen::Vector3d(0.1, 0.6, 0.3), rng);
    const auto set = weight_confidence_set(sys, 0.01 * Eigen::Matrix3d::Identity(), 100, 0.005,
                                           simplex_grid(3, 500, 2));
    const auto wider = relevel(set, 0.05);
    CHECK(wider.accepted_count <= set.accepted_count);
    for (std::size_t g = 0; g < set.grid.size(); ++g) {
      if (wider.accepted[g]) CHECK(set.accepted[g]);
    }
  }
}

TEST_CASE("theta confidence interval") {
  ThetaDecomposition theta;
  theta.matched = 0.1;
  theta.unmatched = Eigen::Vector2d(0.2, 0.4);
  const Eigen::Vector2d w(0.5, 0.5);
  SigmaEstimate sigma;
  sigma.sigma = 1.0;
  const std::size_t n0 = 400;
  const double z = std::sqrt(chi2_quantile(1.0 - 0.05 + 0.005, 1.0));

  SUBCASE("single accepted point") {
    const auto ci = theta_confidence_interval(single_point_set(w), theta, sigma, n0, 0.05, 0.005, w);
    CHECK(ci.point_estimate == doctest::Approx(0.4));
    CHECK(ci.lower == doctest::Approx(0.4 - z / 20.0));
    CHECK(ci.upper == doctest::Approx(0.4 + z / 20.0));
    CHECK(ci.contains(0.4));
    sigma.sigma = 2.0;
    const auto wide = theta_confidence_interval(single_point_set(w), theta, sigma, n0, 0.05, 0.005, w);
    CHECK(wide.length() == doctest::Approx(2.0 * ci.length()));
  }
  SUBCASE("range over accepted points") {
    auto set = single_point_set(w);
    set.grid.push_back(Eigen::Vector2d(1, 0));
    set.grid.push_back(Eigen::Vector2d(0, 1));
    set.t_values.resize(3, 0.0);
    set.df.resize(3, 1);
    set.accepted = {1, 1, 0};
    set.accepted_count = 2;
    const auto ci = theta_confidence_interval(set, theta, sigma, n0, 0.05, 0.005, w);
    CHECK(ci.lower == doctest::Approx(0.3 - z / 20.0));
    CHECK(ci.upper == doctest::Approx(0.4 + z / 20.0));
  }
  SUBCASE("empty set gives an undefined interval") {
    auto set = single_point_set(w);
    set.accepted = {0};
    set.accepted_count = 0;
    set.empty = true;
    const auto ci = theta_confidence_interval(set, theta, sigma, n0, 0.05, 0.005, w);
    CHECK(ci.weight_set_empty);
    CHECK(std::isnan(ci.lower));
    CHECK_FALSE(ci.contains(0.4));
  }
}

TEST_CASE("robust confidence set") {
  McSpec spec;
  spec.n0 = 300;
  spec.s = 0.9;
  AnalysisOptions opts;
  opts.config.bootstrap_draws = 60;
  opts.config.simplex_grid_size = 300;
  opts.config.master_seed = 5;

  SUBCASE("agrees with the base statistic at the estimated weights") {
    const auto mc = generate_mc_data(spec, 21);
    const auto base = run_inference(mc.data, mc.policy, opts);
    opts.config.robust_mode = true;
    const auto robust = run_inference(mc.data, mc.policy, opts);
    CHECK(robust.set.t_values.back() == doctest::Approx(base.set.t_values.back()).epsilon(1e-10));
    CHECK(robust.set.df.back() == base.set.df.back());
    CHECK(robust.robust_sigma.back() == doctest::Approx(base.sigma->sigma).epsilon(1e-12));
  }
  SUBCASE("duplicated source region") {
    auto mc = generate_mc_data(spec, 22);
    mc.data.sources.push_back(mc.data.sources[1]);
    mc.data.sources.back().region_id = "4";
    const auto est = run_estimate(mc.data, mc.policy, opts);
    CHECK(est.weights.degenerate);
    CHECK_FALSE(est.warnings.empty());
    opts.config.robust_mode = true;
    const auto robust = run_inference(mc.data, mc.policy, opts);
    CHECK_FALSE(robust.set.empty);
    CHECK(robust.interval.contains(0.2));
  }
}
