#include "ctune/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctune/error.hpp"
#include "ctune/gridsearch.hpp"
#include "ctune/optimizer.hpp"
#include "ctune/parallel.hpp"
#include "ctune/random.hpp"

namespace ctune {

void TuneConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) bad("lambda0 must be finite and >= 0");
  if (!(growth > 0.0)) bad("growth must be positive");
  if (!(infill_q > 0.0 && infill_q < 0.2)) bad("infill q must lie in (0, 0.2)");
  if (!(fd_step > 0.0 && fd_step < 0.1)) bad("finite-difference step must lie in (0, 0.1)");
  if (!(boundary_mass > 0.0 && boundary_mass < 0.01)) bad("boundary mass must lie in (0, 0.01)");
  if (max_steps == 0) bad("max_steps must be positive");
  if (restarts == 0) bad("restarts must be positive");
}

double tune_objective(const OperatingPoint& p, double lambda) {
  return (1.0 - p.p_correct) + lambda * p.expected_cost;
}

double resolved_lambda0(const CascadeModel& cm, const TuneConfig& cfg) {
  if (cfg.lambda0 > 0.0) return cfg.lambda0;
  double total = 0.0;
  for (std::size_t pos = 0; pos < cm.size(); ++pos) total += cm.expected_cost(pos);
  return total > 0.0 ? 1e-3 / total : 1e-3;
}

QuantileBox quantile_box(const CascadeModel& cm, double boundary_mass) {
  QuantileBox box;
  for (std::size_t pos = 0; pos + 1 < cm.size(); ++pos) {
    const auto& m = cm.marginal(pos);
    double lo = m.w_min + boundary_mass, hi = 1.0 - m.w_max - boundary_mass;
    if (!m.has_interior() || !(lo < hi)) {
      // No interior to tune over; pin the coordinate to the middle of the gap.
      lo = hi = 0.5 * (m.w_min + 1.0 - m.w_max);
    }
    box.lower.push_back(lo);
    box.upper.push_back(hi);
  }
  return box;
}

ThresholdVector thresholds_from_quantiles(const CascadeModel& cm, const std::vector<double>& u) {
  ThresholdVector t;
  t.phi.reserve(u.size());
  for (std::size_t pos = 0; pos < u.size(); ++pos) t.phi.push_back(cm.marginal(pos).quantile(u[pos]));
  return t;
}

std::vector<double> quantiles_from_thresholds(const CascadeModel& cm, const ThresholdVector& t) {
  std::vector<double> u;
  u.reserve(t.phi.size());
  for (std::size_t pos = 0; pos < t.phi.size(); ++pos) u.push_back(cm.marginal(pos).cdf(t.phi[pos]));
  return u;
}

namespace {

FrontierPoint make_point(const CascadeModel& cm, double lambda, ThresholdVector t, bool interpolated) {
  FrontierPoint fp;
  fp.lambda = lambda;
  fp.point = cm.evaluate(t);
  fp.thresholds = std::move(t);
  fp.objective = tune_objective(fp.point, lambda);
  fp.subcascade_id = cm.subcascade_id();
  fp.members = cm.members();
  fp.interpolated = interpolated;
  return fp;
}

bool saturated(const CascadeModel& cm, const FrontierPoint& fp, const QuantileBox& box,
               const TuneConfig& cfg) {
  if (fp.point.expected_cost <= cm.expected_cost(0) * (1.0 + cfg.saturation_tol)) return true;
  // Every threshold already accepts as much as the interior allows.
  const auto u = quantiles_from_thresholds(cm, fp.thresholds);
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (u[j] > box.lower[j] + cfg.fd_step) return false;
  }
  return true;
}

}  // namespace

FrontierPoint solve_single(const CascadeModel& cm, double lambda, const TuneConfig& cfg,
                           const std::optional<ThresholdVector>& warm_start, std::uint64_t stream,
                           TuneStats* stats) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be finite and >= 0");
  }
  if (stats) ++stats->solves;
  const std::size_t d = cm.size() - 1;
  if (d == 0) return make_point(cm, lambda, {}, false);

  const auto box = quantile_box(cm, cfg.boundary_mass);
  auto objective = [&](const std::vector<double>& u) {
    const auto p = cm.evaluate(thresholds_from_quantiles(cm, u));
    return tune_objective(p, lambda);
  };
  auto clamp_to_box = [&](std::vector<double> u) {
    for (std::size_t j = 0; j < d; ++j) u[j] = std::clamp(u[j], box.lower[j], box.upper[j]);
    return u;
  };

  std::vector<std::vector<double>> starts;
  if (warm_start) starts.push_back(clamp_to_box(quantiles_from_thresholds(cm, *warm_start)));
  std::vector<double> median(d);
  for (std::size_t j = 0; j < d; ++j) median[j] = 0.5 * (box.lower[j] + box.upper[j]);
  starts.push_back(median);
  auto rng = make_rng(cfg.seed, stream);
  for (std::size_t r = 1; r < cfg.restarts; ++r) {
    std::vector<double> u(d);
    for (std::size_t j = 0; j < d; ++j) {
      u[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * uniform_open(rng);
    }
    starts.push_back(u);
  }

  BoxMinimizeOptions opt;
  opt.gradient_tolerance = cfg.gradient_tolerance;
  opt.max_iterations = cfg.max_iterations;
  opt.fd_step = cfg.fd_step;
  std::vector<double> best_u;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const auto res = minimize_box(objective, s, box.lower, box.upper, opt);
    if (stats) stats->evaluations += res.evaluations;
    if (res.value < best) {
      best = res.value;
      best_u = res.x;
    }
  }
  return make_point(cm, lambda, thresholds_from_quantiles(cm, best_u), false);
}

std::vector<FrontierPoint> sweep(const CascadeModel& cm, const TuneConfig& cfg, TuneStats* stats) {
  cfg.validate();
  if (stats) ++stats->sweeps;
  double lambda = resolved_lambda0(cm, cfg);
  std::uint64_t stream = 0;
  if (cm.size() == 1) {
    if (stats) ++stats->solves;
    return {make_point(cm, lambda, {}, false)};
  }
  const auto box = quantile_box(cm, cfg.boundary_mass);
  std::vector<FrontierPoint> out;
  std::optional<ThresholdVector> warm;
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    auto fp = solve_single(cm, lambda, cfg, warm, stream++, stats);
    const bool done = saturated(cm, fp, box, cfg);
    if (done && step == 0) {
      throw Error(ErrorCode::kEmptySweep,
                  "lambda0 already saturates the sweep for " + cm.subcascade_id());
    }
    warm = fp.thresholds;
    out.push_back(std::move(fp));
    if (done) break;
    lambda *= 1.0 + cfg.growth;
  }
  std::stable_sort(out.begin(), out.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    return a.point.expected_cost < b.point.expected_cost;
  });
  return out;
}

namespace {

void infill_between(const FrontierPoint& a, const FrontierPoint& b, const CascadeModel& cm,
                    double q, std::size_t depth, std::size_t max_depth,
                    std::vector<FrontierPoint>& out, TuneStats* stats) {
  const auto ua = quantiles_from_thresholds(cm, a.thresholds);
  const auto ub = quantiles_from_thresholds(cm, b.thresholds);
  bool gap = false;
  for (std::size_t j = 0; j < ua.size(); ++j) gap = gap || std::abs(ub[j] - ua[j]) > q;
  if (!gap) return;
  if (depth >= max_depth) {
    if (stats) ++stats->residual_gaps;
    return;
  }
  ThresholdVector mid;
  for (std::size_t j = 0; j < a.thresholds.phi.size(); ++j) {
    mid.phi.push_back(0.5 * (a.thresholds.phi[j] + b.thresholds.phi[j]));
  }
  auto fp = make_point(cm, 0.5 * (a.lambda + b.lambda), std::move(mid), true);
  fp.subcascade_id = a.subcascade_id;
  fp.members = a.members;
  if (stats) ++stats->infill_insertions;
  infill_between(a, fp, cm, q, depth + 1, max_depth, out, stats);
  out.push_back(fp);
  infill_between(fp, b, cm, q, depth + 1, max_depth, out, stats);
}

}  // namespace

std::vector<FrontierPoint> adaptive_infill(const std::vector<FrontierPoint>& points,
                                           const CascadeModel& cm, double q,
                                           std::size_t max_depth, TuneStats* stats) {
  std::vector<FrontierPoint> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0) infill_between(points[i - 1], points[i], cm, q, 0, max_depth, out, stats);
    out.push_back(points[i]);
  }
  return out;
}

std::vector<FrontierPoint> tune(const CascadeModel& cm, const TuneConfig& cfg, TuneStats* stats) {
  auto points = sweep(cm, cfg, stats);
  return adaptive_infill(points, cm, cfg.infill_q, cfg.max_infill_depth, stats);
}

std::vector<FrontierPoint> tune_with_model_selection(const CascadeModel& cm,
                                                     const TuneConfig& cfg, TuneStats* stats) {
  cfg.validate();
  const auto subs = cm.subcascades();
  std::vector<std::vector<FrontierPoint>> results(subs.size());
  std::vector<TuneStats> sub_stats(subs.size());
  parallel_for(subs.size(), [&](std::size_t i) {
    TuneConfig sub_cfg = cfg;
    sub_cfg.seed = mix_seed(cfg.seed, i);
    try {
      results[i] = tune(subs[i], sub_cfg, &sub_stats[i]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptySweep) throw;
      // Already saturated at lambda0: the single solve is this subcascade's frontier.
      results[i] = {solve_single(subs[i], resolved_lambda0(subs[i], sub_cfg), sub_cfg,
                                 std::nullopt, 0, &sub_stats[i])};
    }
  });
  std::vector<FrontierPoint> all;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (stats) {
      stats->solves += sub_stats[i].solves;
      stats->sweeps += sub_stats[i].sweeps;
      stats->infill_insertions += sub_stats[i].infill_insertions;
      stats->residual_gaps += sub_stats[i].residual_gaps;
      stats->evaluations += sub_stats[i].evaluations;
    }
    for (auto& fp : results[i]) all.push_back(std::move(fp));
  }
  std::vector<OperatingPoint> ops;
  ops.reserve(all.size());
  for (const auto& fp : all) ops.push_back(fp.point);
  std::vector<FrontierPoint> out;
  for (std::size_t idx : pareto_filter(ops)) out.push_back(all[idx]);
  return out;
}

}  // namespace ctune
