#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctune/calibration.hpp"
#include "ctune/copula.hpp"
#include "ctune/dataset.hpp"
#include "ctune/marginal.hpp"

namespace ctune {

/// Cramer-von Mises test outcome.
///
/// Marginal test: `statistic` is sqrt(int (F_n - F)^2 dF) and `normalized`
/// the plain integral. Copula test: `statistic` is S_n = n int (K_n - K)^2 dK
/// and `normalized` is sqrt(n) times the plain integral. The p-value is
/// always computed from `statistic`.
struct GofResult {
  double statistic = 0.0;
  double normalized = 0.0;
  double p_value = 1.0;
  std::size_t bootstrap_B = 0;
  std::size_t n = 0;
  bool reject_at_05 = false;
  std::vector<double> bootstrap;  // replicate statistics, by replicate index
};

struct MarginalGofOptions {
  /// Size of the sample each replicate refits on. 0 refits on the replicate
  /// itself; otherwise a separate sample of this size is drawn for the refit,
  /// mimicking a train/test split.
  std::size_t fit_size = 0;
  MarginalFitOptions fit;
};

/// Integral of (F_n - F)^2 dF for a marginal with endpoint masses, exact.
double marginal_cvm_integral(const MarginalModel& m, const std::vector<double>& phis);

GofResult marginal_cvm(const MarginalModel& m, const std::vector<double>& test_phis,
                       std::size_t B, std::uint64_t seed, const MarginalGofOptions& opt = {});

/// Empirical copula at each sample point: (1/n) #{j : x_j <= x_i, y_j <= y_i}.
std::vector<double> kendall_pseudo_observations(const std::vector<std::pair<double, double>>& pairs);

/// Integral of (K_n - K_theta)^2 dK_theta for the pseudo-observations of `pairs`.
double kendall_cvm_integral(const GumbelCopula& c,
                            const std::vector<std::pair<double, double>>& pairs);

/// Kendall-transform test of a Gumbel copula. When both marginals are given,
/// only pairs strictly inside both supports are used.
GofResult kendall_transform_cvm(const GumbelCopula& c,
                                const std::vector<std::pair<double, double>>& pairs,
                                std::size_t B, std::uint64_t seed,
                                const std::optional<std::pair<MarginalModel, MarginalModel>>&
                                    marginals = std::nullopt);

enum class TauSubset { kAll, kBothCorrect, kBothIncorrect };
std::string tau_subset_name(TauSubset s);
TauSubset parse_tau_subset(const std::string& name);

/// Pairwise Kendall tau of calibrated confidences on one split. Cells with
/// fewer than `min_n` qualifying queries (filtered subsets) or undefined tau
/// are marked unavailable.
struct TauMatrix {
  std::size_t k = 0;
  std::vector<double> tau;        // row-major k x k
  std::vector<std::size_t> n;     // qualifying queries per cell
  std::vector<bool> available;
  double at(std::size_t i, std::size_t j) const { return tau[i * k + j]; }
  bool has(std::size_t i, std::size_t j) const { return available[i * k + j]; }
};

TauMatrix tau_matrix(const AlignedDataset& ds, const std::vector<Calibrator>& calibrators,
                     TauSubset subset, SplitTag tag = SplitTag::kTest, std::size_t min_n = 50);

}  // namespace ctune
