#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "syndecomp/dataset.hpp"

namespace fixtures {

/// Log outcome 0.5 + X gamma + N(0, 1) with X ~ N(0, I), censored from below
/// at its own `censored_fraction` sample quantile, which becomes the threshold.
inline syndecomp::RegionSample censored_region(std::size_t n, const Eigen::VectorXd& gamma, std::uint64_t seed,
                                               double censored_fraction = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto d = gamma.size();
  syndecomp::RegionSample r;
  r.region_id = "c";
  r.covariates.resize(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd latent(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) r.covariates(i, j) = z(rng);
    latent(i) = 0.5 + r.covariates.row(i).dot(gamma) + z(rng);
  }
  std::vector<double> sorted(latent.data(), latent.data() + latent.size());
  std::sort(sorted.begin(), sorted.end());
  const double c = sorted[static_cast<std::size_t>(censored_fraction * static_cast<double>(n))];
  r.threshold = std::exp(c);
  r.index_outcomes = latent.cwiseMax(c);
  r.outcomes = *r.index_outcomes;
  return r;
}

}  // namespace fixtures
