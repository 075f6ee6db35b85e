#pragma once

#include <cstdint>
#include <vector>

#include "ctune/cascade_model.hpp"
#include "ctune/tuner.hpp"

namespace ctune {

struct GridSpec {
  double mass_step = 0.025;
  std::uint64_t candidate_budget = 10'000'000;

  /// ceil(1 / mass_step): 40 at the default.
  std::size_t points_per_dim() const;
};

/// Per-model threshold grid: quantiles at j * mass_step for j = 0..n-1, so the
/// first value is phi_min and phi_max itself is never a candidate.
std::vector<double> quantile_grid(const MarginalModel& m, const GridSpec& spec);

/// Lazy Cartesian product of the per-model quantile grids. The last model
/// varies fastest.
class CandidateEnumerator {
 public:
  CandidateEnumerator(const CascadeModel& cm, const GridSpec& spec);

  std::uint64_t count() const { return count_; }
  /// Writes the next candidate into `out`; false once exhausted.
  bool next(ThresholdVector& out);
  /// Candidate with a given linear index, 0 <= index < count().
  ThresholdVector at(std::uint64_t index) const;
  void reset() { cursor_ = 0; }

 private:
  std::vector<std::vector<double>> grids_;
  std::uint64_t count_ = 0;
  std::uint64_t cursor_ = 0;
};

CandidateEnumerator enumerate_candidates(const CascadeModel& cm, const GridSpec& spec);

/// Indices of the points not dominated by any other point, where a point is
/// dominated if another has strictly higher p_correct and strictly lower
/// cost. Exact duplicates keep only their first occurrence. Returned in
/// order of increasing cost (ties by index).
std::vector<std::size_t> pareto_filter(const std::vector<OperatingPoint>& points);

/// Streaming form: folds `chunk` (with global indices) into `skyline`.
struct IndexedPoint {
  std::uint64_t index = 0;
  OperatingPoint point;
};
std::vector<IndexedPoint> merge_skylines(std::vector<IndexedPoint> a,
                                         const std::vector<IndexedPoint>& b);

struct GridStats {
  std::uint64_t candidates = 0;
  std::uint64_t evaluations = 0;
  double seconds = 0.0;
};

/// Evaluates every candidate and returns the Pareto set sorted by cost.
/// Throws Error(kCandidateBudgetExceeded) when the product exceeds the budget.
std::vector<FrontierPoint> grid_search(const CascadeModel& cm, const GridSpec& spec,
                                       GridStats* stats = nullptr);

}  // namespace ctune
