#include "ctune/gridsearch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ctune/error.hpp"
#include "ctune/parallel.hpp"

namespace ctune {

std::size_t GridSpec::points_per_dim() const {
  if (!(mass_step > 0.0 && mass_step <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mass_step must lie in (0, 1]");
  }
  return static_cast<std::size_t>(std::ceil(1.0 / mass_step - 1e-9));
}

std::vector<double> quantile_grid(const MarginalModel& m, const GridSpec& spec) {
  const std::size_t n = spec.points_per_dim();
  std::vector<double> grid(n);
  for (std::size_t j = 0; j < n; ++j) {
    grid[j] = j == 0 ? m.phi_min : m.quantile(static_cast<double>(j) * spec.mass_step);
  }
  return grid;
}

CandidateEnumerator::CandidateEnumerator(const CascadeModel& cm, const GridSpec& spec) {
  if (cm.size() < 2) throw Error(ErrorCode::kInvalidArgument, "grid search needs k >= 2");
  count_ = 1;
  for (std::size_t pos = 0; pos + 1 < cm.size(); ++pos) {
    grids_.push_back(quantile_grid(cm.marginal(pos), spec));
    const auto n = static_cast<std::uint64_t>(grids_.back().size());
    if (count_ > std::numeric_limits<std::uint64_t>::max() / n) {
      count_ = std::numeric_limits<std::uint64_t>::max();
    } else {
      count_ *= n;
    }
  }
}

ThresholdVector CandidateEnumerator::at(std::uint64_t index) const {
  ThresholdVector t;
  t.phi.resize(grids_.size());
  for (std::size_t d = grids_.size(); d-- > 0;) {
    const auto n = static_cast<std::uint64_t>(grids_[d].size());
    t.phi[d] = grids_[d][index % n];
    index /= n;
  }
  return t;
}

bool CandidateEnumerator::next(ThresholdVector& out) {
  if (cursor_ >= count_) return false;
  out = at(cursor_++);
  return true;
}

CandidateEnumerator enumerate_candidates(const CascadeModel& cm, const GridSpec& spec) {
  return CandidateEnumerator(cm, spec);
}

namespace {

// Sorted by cost, then p descending, then index; keeps the undominated points.
std::vector<IndexedPoint> skyline(std::vector<IndexedPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const IndexedPoint& a, const IndexedPoint& b) {
    if (a.point.expected_cost != b.point.expected_cost) {
      return a.point.expected_cost < b.point.expected_cost;
    }
    if (a.point.p_correct != b.point.p_correct) return a.point.p_correct > b.point.p_correct;
    return a.index < b.index;
  });
  std::vector<IndexedPoint> kept;
  double best_cheaper = -std::numeric_limits<double>::infinity();  // max p at strictly lower cost
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    double group_max = -std::numeric_limits<double>::infinity();
    while (j < pts.size() && pts[j].point.expected_cost == pts[i].point.expected_cost) {
      const auto& p = pts[j];
      const bool duplicate = j > i && pts[j - 1].point.p_correct == p.point.p_correct;
      if (!duplicate && !(best_cheaper > p.point.p_correct)) kept.push_back(p);
      group_max = std::max(group_max, p.point.p_correct);
      ++j;
    }
    best_cheaper = std::max(best_cheaper, group_max);
    i = j;
  }
  return kept;
}

}  // namespace

std::vector<IndexedPoint> merge_skylines(std::vector<IndexedPoint> a,
                                         const std::vector<IndexedPoint>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return skyline(std::move(a));
}

std::vector<std::size_t> pareto_filter(const std::vector<OperatingPoint>& points) {
  std::vector<IndexedPoint> pts(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) pts[i] = {i, points[i]};
  std::vector<std::size_t> out;
  for (const auto& p : skyline(std::move(pts))) out.push_back(static_cast<std::size_t>(p.index));
  return out;
}

std::vector<FrontierPoint> grid_search(const CascadeModel& cm, const GridSpec& spec,
                                       GridStats* stats) {
  const auto start = std::chrono::steady_clock::now();
  const CandidateEnumerator candidates(cm, spec);
  const std::uint64_t total = candidates.count();
  if (total > spec.candidate_budget) {
    throw Error(ErrorCode::kCandidateBudgetExceeded,
                std::to_string(total) + " candidates exceed the budget of " +
                    std::to_string(spec.candidate_budget));
  }
  // Fixed-size chunks, each reduced to its own skyline, then merged in order.
  constexpr std::uint64_t kChunk = 1 << 14;
  const std::uint64_t n_chunks = (total + kChunk - 1) / kChunk;
  std::vector<IndexedPoint> frontier;
  const std::size_t batch = std::max<std::size_t>(1, thread_count()) * 4;
  for (std::uint64_t first = 0; first < n_chunks; first += batch) {
    const std::size_t in_batch = static_cast<std::size_t>(std::min<std::uint64_t>(batch, n_chunks - first));
    std::vector<std::vector<IndexedPoint>> partial(in_batch);
    parallel_for(in_batch, [&](std::size_t c) {
      const std::uint64_t lo = (first + c) * kChunk, hi = std::min(total, lo + kChunk);
      std::vector<IndexedPoint> pts;
      pts.reserve(static_cast<std::size_t>(hi - lo));
      for (std::uint64_t idx = lo; idx < hi; ++idx) pts.push_back({idx, cm.evaluate(candidates.at(idx))});
      partial[c] = skyline(std::move(pts));
    });
    for (const auto& p : partial) frontier = merge_skylines(std::move(frontier), p);
  }
  std::vector<FrontierPoint> out;
  out.reserve(frontier.size());
  for (const auto& p : frontier) {
    FrontierPoint fp;
    fp.thresholds = candidates.at(p.index);
    fp.point = p.point;
    fp.objective = tune_objective(p.point, 0.0);
    fp.subcascade_id = cm.subcascade_id();
    fp.members = cm.members();
    out.push_back(std::move(fp));
  }
  if (stats) {
    stats->candidates = total;
    stats->evaluations = total;
    stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

}  // namespace ctune
