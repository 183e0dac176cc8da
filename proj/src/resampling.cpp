#include "syndecomp/resampling.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "syndecomp/error.hpp"
#include "syndecomp/parallel.hpp"

namespace syndecomp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

std::vector<std::size_t> resample_rows(std::size_t n, std::uint64_t master_seed, std::string_view region_id,
                                       std::uint64_t draw_index) {
  std::mt19937_64 rng(derive_seed(master_seed, fnv1a(region_id), draw_index));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = pick(rng);
  return rows;
}

MultiRegionDataset resample_dataset(const MultiRegionDataset& data, std::uint64_t master_seed,
                                    std::uint64_t draw_index) {
  auto one = [&](const RegionSample& r) {
    const auto rows = resample_rows(r.size(), master_seed, r.region_id, draw_index);
    return r.select_rows(rows);
  };
  MultiRegionDataset out;
  out.target = one(data.target);
  out.sources.reserve(data.sources.size());
  for (const auto& s : data.sources) out.sources.push_back(one(s));
  return out;
}

std::vector<const BootstrapDraw*> BootstrapRun::successful() const {
  std::vector<const BootstrapDraw*> out;
  for (const auto& d : draws) {
    if (d.ok()) out.push_back(&d);
  }
  return out;
}

BootstrapRun bootstrap_draws(const MultiRegionDataset& data, const RefitFn& refit, std::size_t B,
                             std::uint64_t master_seed, std::size_t jobs, double max_failure_fraction) {
  if (B < 2) throw Error(ErrorKind::insufficient_draws, "resampling", "bootstrap needs at least 2 draws");
  BootstrapRun run;
  run.draws.resize(B);
  parallel_for(B, jobs, [&](std::size_t b) {
    BootstrapDraw& d = run.draws[b];
    d.draw_index = b;
    try {
      const FitResult fit = refit(resample_dataset(data, master_seed, b));
      d.system = fit.system;
      d.decomposition = fit.decomposition;
    } catch (const Error& e) {
      d.failure = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });
  for (const auto& d : run.draws) {
    if (!d.ok()) ++run.failed;
  }
  if (static_cast<double>(run.failed) > max_failure_fraction * static_cast<double>(B)) {
    std::string first;
    for (const auto& d : run.draws) {
      if (!d.ok()) {
        first = d.failure;
        break;
      }
    }
    throw Error(ErrorKind::bootstrap_failure, "resampling",
                std::to_string(run.failed) + " of " + std::to_string(B) +
                    " bootstrap draws failed to refit (first failure: " + first + ")");
  }
  return run;
}

Eigen::VectorXd gamma_star(const MomentSystem& draw, const MomentSystem& base, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd dH = draw.H - base.H;
  const Eigen::VectorXd dh = draw.h - base.h;
  const Eigen::Index K = w.size();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(K);
  const double scalar_h = w.dot(dH * ones);
  const double scalar_v = w.dot(dh);
  return std::sqrt(static_cast<double>(base.n0)) * (dH * w - dh - scalar_h * ones + scalar_v * ones);
}

OmegaEstimate omega_hat(const std::vector<Eigen::VectorXd>& gammas, const MomentSystem& base,
                        const Eigen::VectorXd& w, double c0) {
  if (gammas.size() < 2) {
    throw Error(ErrorKind::insufficient_draws, "resampling", "covariance estimate needs at least 2 usable draws");
  }
  const Eigen::Index K = w.size();
  const double root_n = std::sqrt(static_cast<double>(base.n0));
  OmegaEstimate est;
  est.draws = gammas.size();
  est.tau = root_n * (base.H * w - base.h).cwiseAbs().cwiseMax(c0);

  std::vector<Eigen::VectorXd> clamped;
  clamped.reserve(gammas.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(K);
  for (const auto& g : gammas) {
    Eigen::VectorXd c = g;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (c(k) > est.tau(k)) {
        c(k) = est.tau(k);
        ++est.truncation_hits;
      } else if (c(k) < -est.tau(k)) {
        c(k) = -est.tau(k);
        ++est.truncation_hits;
      }
    }
    mean += c;
    clamped.push_back(std::move(c));
  }
  mean /= static_cast<double>(clamped.size());
  est.omega = Eigen::MatrixXd::Zero(K, K);
  for (const auto& c : clamped) {
    const Eigen::VectorXd d = c - mean;
    est.omega.noalias() += d * d.transpose();
  }
  est.omega /= static_cast<double>(clamped.size());
  double scale = 0.0;
  for (const auto& c : clamped) scale = std::max(scale, c.squaredNorm());
  est.degenerate = !(est.omega.diagonal().maxCoeff() > 1e-12 * scale);
  return est;
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::insufficient_draws, "resampling", "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SigmaEstimate sigma_hat(std::span<const double> theta_stars, double theta_hat, std::size_t n0) {
  if (theta_stars.size() < 2) {
    throw Error(ErrorKind::insufficient_draws, "resampling", "scale estimate needs at least 2 usable draws");
  }
  const double root_n = std::sqrt(static_cast<double>(n0));
  std::vector<double> t;
  t.reserve(theta_stars.size());
  for (double v : theta_stars) t.push_back(root_n * (v - theta_hat));
  SigmaEstimate s;
  s.q25 = quantile_type7(t, 0.25);
  s.q75 = quantile_type7(t, 0.75);
  const boost::math::normal standard;
  const double z_span = boost::math::quantile(standard, 0.75) - boost::math::quantile(standard, 0.25);
  s.sigma = (s.q75 - s.q25) / z_span;
  if (!(s.sigma > 0.0)) {
    throw Error(ErrorKind::degenerate_scale, "resampling",
                "bootstrap interquartile range of T* is zero; the prediction does not vary across draws");
  }
  return s;
}

}  // namespace syndecomp
