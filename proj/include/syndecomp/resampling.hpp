#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syndecomp/pipeline.hpp"

namespace syndecomp {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view s);

/// Seed for the stream keyed by (master, a, b).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Rows drawn with replacement for region `region_id` in draw `draw_index`.
std::vector<std::size_t> resample_rows(std::size_t n, std::uint64_t master_seed, std::string_view region_id,
                                       std::uint64_t draw_index);

/// Per-region with-replacement resample; sizes are preserved.
MultiRegionDataset resample_dataset(const MultiRegionDataset& data, std::uint64_t master_seed,
                                    std::uint64_t draw_index);

/// What later stages need from a refitted draw.
struct BootstrapDraw {
  std::size_t draw_index = 0;
  std::optional<MomentSystem> system;
  ThetaDecomposition decomposition;
  std::string failure;

  bool ok() const { return system.has_value(); }
};

using RefitFn = std::function<FitResult(const MultiRegionDataset&)>;

struct BootstrapRun {
  std::vector<BootstrapDraw> draws;  // ordered by draw index
  std::size_t failed = 0;

  std::vector<const BootstrapDraw*> successful() const;
};

/// B draws, each rerunning `refit` on a resampled dataset. Throws
/// bootstrap_failure when more than `max_failure_fraction` of draws fail.
BootstrapRun bootstrap_draws(const MultiRegionDataset& data, const RefitFn& refit, std::size_t B,
                             std::uint64_t master_seed, std::size_t jobs = 1, double max_failure_fraction = 0.1);

/// sqrt(n0) [dH w - dh - (w'dH 1) 1 + (w'dh) 1] with dH = H* - H, dh = h* - h.
Eigen::VectorXd gamma_star(const MomentSystem& draw, const MomentSystem& base, const Eigen::VectorXd& w);

struct OmegaEstimate {
  Eigen::MatrixXd omega;
  Eigen::VectorXd tau;
  std::size_t truncation_hits = 0;
  std::size_t draws = 0;
  bool degenerate = false;
};

/// tau_k = sqrt(n0) max(|[Hw - h]_k|, c0); clamps each gamma*_k to
/// [-tau_k, tau_k] and returns the centred second-moment matrix.
OmegaEstimate omega_hat(const std::vector<Eigen::VectorXd>& gammas, const MomentSystem& base,
                        const Eigen::VectorXd& w, double c0);

struct SigmaEstimate {
  double sigma = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Type-7 (linear interpolation) sample quantile.
double quantile_type7(std::vector<double> values, double p);

/// IQR scale of T* = sqrt(n0) (theta* - theta_hat).
SigmaEstimate sigma_hat(std::span<const double> theta_stars, double theta_hat, std::size_t n0);

}  // namespace syndecomp
