#include "ctune/evaluation.hpp"

#include <algorithm>
#include <limits>

#include "ctune/error.hpp"
#include "ctune/gridsearch.hpp"

namespace ctune {

ReplayResult replay(const AlignedDataset& ds, const CascadeModel& cm, const ThresholdVector& t,
                    const PriceSheet& prices, SplitTag tag) {
  const std::size_t k = cm.size();
  if (t.phi.size() + 1 != k) {
    throw Error(ErrorCode::kInvalidThreshold, "threshold count does not match the cascade");
  }
  std::vector<std::size_t> columns(k);
  std::vector<TokenPrice> price(k);
  for (std::size_t pos = 0; pos < k; ++pos) {
    const auto& id = cm.model(pos).model_id;
    columns[pos] = ds.model_index(id);
    auto it = prices.find(id);
    if (it == prices.end()) throw Error(ErrorCode::kMissingPrice, "no price for model " + id);
    price[pos] = it->second;
  }
  ReplayResult r;
  double errors = 0.0, cost = 0.0;
  for (std::size_t q : ds.indices(tag)) {
    double c = 0.0;
    for (std::size_t pos = 0; pos < k; ++pos) {
      const auto& rec = ds.record(q, columns[pos]);
      c += record_cost(rec, price[pos]);
      if (pos + 1 == k || cm.model(pos).calibrator.predict(rec.raw_confidence) > t.phi[pos]) {
        if (!rec.correct) errors += 1.0;
        break;
      }
    }
    cost += c;
    ++r.n;
  }
  if (r.n > 0) {
    r.error_rate = errors / static_cast<double>(r.n);
    r.mean_cost = cost / static_cast<double>(r.n);
  }
  return r;
}

std::string curve_source_name(CurveSource s) {
  return s == CurveSource::kModel ? "model" : "empirical";
}

double ErrorCostCurve::normalized(double cost) const {
  if (!has_range()) return 0.0;
  return (cost - cost_min) / (cost_max - cost_min);
}

ErrorCostCurve model_curve(const std::vector<FrontierPoint>& frontier) {
  ErrorCostCurve curve;
  for (const auto& fp : frontier) {
    curve.points.push_back({fp.point.expected_cost, 1.0 - fp.point.p_correct, fp.thresholds,
                            fp.subcascade_id, CurveSource::kModel});
  }
  return curve;
}

ErrorCostCurve empirical_curve(const std::vector<FrontierPoint>& frontier,
                               const AlignedDataset& ds, const CascadeModel& cm,
                               const PriceSheet& prices, SplitTag tag) {
  ErrorCostCurve curve;
  for (const auto& fp : frontier) {
    std::vector<std::size_t> positions;
    for (std::size_t member : fp.members) {
      const auto it = std::find(cm.members().begin(), cm.members().end(), member);
      if (it == cm.members().end()) {
        throw Error(ErrorCode::kInvalidArgument, "frontier point uses a model outside the cascade");
      }
      positions.push_back(static_cast<std::size_t>(it - cm.members().begin()));
    }
    const auto sub = positions.empty() ? cm : cm.subcascade(positions);
    const auto r = replay(ds, sub, fp.thresholds, prices, tag);
    curve.points.push_back({r.mean_cost, r.error_rate, fp.thresholds, sub.subcascade_id(),
                            CurveSource::kEmpirical});
  }
  return curve;
}

std::vector<CurvePoint> pareto_points(const ErrorCostCurve& curve) {
  std::vector<OperatingPoint> ops;
  ops.reserve(curve.points.size());
  for (const auto& p : curve.points) ops.push_back({1.0 - p.error, p.cost});
  std::vector<CurvePoint> out;
  for (std::size_t idx : pareto_filter(ops)) out.push_back(curve.points[idx]);
  return out;
}

double auc(const ErrorCostCurve& curve) {
  // With an explicit range a lone point extends constantly across it.
  if (curve.points.empty() || (curve.points.size() < 2 && !curve.has_range())) {
    throw Error(ErrorCode::kSinglePoint, "an error-cost curve needs at least two points");
  }
  auto pts = pareto_points(curve);
  // Points sharing a cost collapse to their lowest error.
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : pts) {
    if (!xy.empty() && p.cost == xy.back().first) {
      xy.back().second = std::min(xy.back().second, p.error);
    } else {
      xy.emplace_back(p.cost, p.error);
    }
  }
  double lo = curve.cost_min, hi = curve.cost_max;
  if (!curve.has_range()) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const auto& p : curve.points) {
      lo = std::min(lo, p.cost);
      hi = std::max(hi, p.cost);
    }
  }
  const double span = hi - lo;
  auto x = [&](double c) { return span > 0.0 ? std::clamp((c - lo) / span, 0.0, 1.0) : 0.0; };
  double area = x(xy.front().first) * xy.front().second;
  for (std::size_t i = 1; i < xy.size(); ++i) {
    area += 0.5 * (x(xy[i].first) - x(xy[i - 1].first)) * (xy[i].second + xy[i - 1].second);
  }
  area += (1.0 - x(xy.back().first)) * xy.back().second;
  return area;
}

FrontierComparison compare_frontiers(ErrorCostCurve a, ErrorCostCurve b) {
  if (a.points.empty() || b.points.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot compare an empty curve");
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* c : {&a, &b}) {
    for (const auto& p : c->points) {
      lo = std::min(lo, p.cost);
      hi = std::max(hi, p.cost);
    }
  }
  a.cost_min = b.cost_min = lo;
  a.cost_max = b.cost_max = hi;
  FrontierComparison out;
  out.auc_a = auc(a);
  out.auc_b = auc(b);
  out.pct_delta = 100.0 * (out.auc_a - out.auc_b) / out.auc_b;
  return out;
}

}  // namespace ctune
