#pragma once

#include <string>
#include <vector>

#include "ctune/cascade_model.hpp"
#include "ctune/dataset.hpp"
#include "ctune/tuner.hpp"

namespace ctune {

struct ReplayResult {
  double error_rate = 0.0;
  double mean_cost = 0.0;
  std::size_t n = 0;
};

/// Routes each query of one split through the (sub)cascade: model i answers
/// iff its calibrated confidence exceeds phi_i, or it is the last member.
/// Cost sums the actual token prices of every model the query visited.
ReplayResult replay(const AlignedDataset& ds, const CascadeModel& cm, const ThresholdVector& t,
                    const PriceSheet& prices, SplitTag tag = SplitTag::kTest);

enum class CurveSource { kModel, kEmpirical };
std::string curve_source_name(CurveSource s);

struct CurvePoint {
  double cost = 0.0;
  double error = 0.0;
  ThresholdVector thresholds;
  std::string subcascade_id;
  CurveSource source = CurveSource::kModel;
};

struct ErrorCostCurve {
  std::vector<CurvePoint> points;
  /// Normalization range; when min == max it is taken from the points.
  double cost_min = 0.0;
  double cost_max = 0.0;

  bool has_range() const { return cost_max > cost_min; }
  double normalized(double cost) const;
};

ErrorCostCurve model_curve(const std::vector<FrontierPoint>& frontier);
/// Replays every frontier point on the given split; the subcascade of each
/// point is taken from its member list.
ErrorCostCurve empirical_curve(const std::vector<FrontierPoint>& frontier,
                               const AlignedDataset& ds, const CascadeModel& cm,
                               const PriceSheet& prices, SplitTag tag = SplitTag::kTest);

/// Pareto-filtered points of a curve sorted by cost.
std::vector<CurvePoint> pareto_points(const ErrorCostCurve& curve);

/// Trapezoidal area under error over min-max normalized cost, on the Pareto
/// frontier, with constant extension from the extreme points to 0 and 1.
/// Throws Error(kSinglePoint) for fewer than two input points.
double auc(const ErrorCostCurve& curve);

struct FrontierComparison {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double pct_delta = 0.0;  // negative means a is better
};

/// AUCs of both curves normalized on the union cost range, and
/// 100 (auc_a - auc_b) / auc_b.
FrontierComparison compare_frontiers(ErrorCostCurve a, ErrorCostCurve b);

}  // namespace ctune
