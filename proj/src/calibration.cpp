#include "ctune/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctune/error.hpp"
#include "ctune/logistic.hpp"

namespace ctune {

std::string_view task_kind_name(TaskKind kind) {
  return kind == TaskKind::kMultipleChoice ? "multiple_choice" : "generation";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "multiple_choice") return TaskKind::kMultipleChoice;
  if (name == "generation") return TaskKind::kGeneration;
  throw Error(ErrorCode::kInvalidArgument, "unknown task kind '" + std::string(name) + "'");
}

double transform(double p_raw, TaskKind kind) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (kind == TaskKind::kGeneration && p_raw < 0.5) {
    return p_raw <= 0.0 ? inf : -std::log(p_raw);
  }
  return p_raw >= 1.0 ? inf : -std::log1p(-p_raw);
}

ClampResult clamp_infinite(const std::vector<double>& xis) {
  ClampResult out;
  out.xi_min = std::numeric_limits<double>::infinity();
  out.xi_max = -std::numeric_limits<double>::infinity();
  for (double x : xis) {
    if (std::isfinite(x)) {
      out.xi_min = std::min(out.xi_min, x);
      out.xi_max = std::max(out.xi_max, x);
    }
  }
  if (!std::isfinite(out.xi_min)) {
    throw Error(ErrorCode::kAllInfinite, "no finite transformed confidence to clamp to");
  }
  out.xis.reserve(xis.size());
  for (double x : xis) {
    if (x == std::numeric_limits<double>::infinity()) x = out.xi_max;
    if (x == -std::numeric_limits<double>::infinity()) x = out.xi_min;
    out.xis.push_back(x);
  }
  return out;
}

double Calibrator::feature(double p_raw) const {
  const double xi = use_transform ? transform(p_raw, task_kind) : p_raw;
  return std::clamp(xi, xi_min, xi_max);
}

double Calibrator::predict(double p_raw) const {
  // Clamp away from exact 0/1 so downstream logs and copulas stay finite.
  constexpr double lo = 1e-15;
  return std::clamp(sigmoid(intercept + slope * feature(p_raw)), lo, 1.0 - lo);
}

Calibrator fit_calibrator(const std::vector<double>& raw_confidences,
                          const std::vector<bool>& labels, TaskKind kind, bool use_transform) {
  if (raw_confidences.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "confidence/label length mismatch");
  }
  if (raw_confidences.empty()) throw Error(ErrorCode::kEmptyInput, "no training records");
  std::vector<double> xis;
  xis.reserve(raw_confidences.size());
  for (double p : raw_confidences) xis.push_back(use_transform ? transform(p, kind) : p);
  auto clamped = clamp_infinite(xis);

  Calibrator cal;
  cal.task_kind = kind;
  cal.use_transform = use_transform;
  cal.xi_min = clamped.xi_min;
  cal.xi_max = clamped.xi_max;

  const auto fit = fit_logistic({clamped.xis}, labels);
  cal.intercept = fit.coef[0];
  cal.slope = fit.coef[1];
  cal.separation_flag = fit.separated;
  return cal;
}

EceReport ece(const std::vector<double>& confidences, const std::vector<bool>& labels,
              std::size_t n_bins) {
  if (confidences.empty()) throw Error(ErrorCode::kEmptyInput, "ECE of an empty sample");
  if (confidences.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "confidence/label length mismatch");
  }
  if (n_bins == 0) throw Error(ErrorCode::kInvalidArgument, "n_bins must be positive");
  const std::size_t n = confidences.size();
  std::vector<double> sorted = confidences;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  };
  std::vector<double> edges;
  for (std::size_t j = 0; j <= n_bins; ++j) {
    const double e = quantile(static_cast<double>(j) / static_cast<double>(n_bins));
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  const std::size_t bins = std::max<std::size_t>(1, edges.size() - 1);
  if (edges.size() == 1) edges.push_back(edges.front());

  EceReport report;
  report.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    report.bins[b].lower = edges[b];
    report.bins[b].upper = edges[b + 1];
  }
  std::vector<double> conf_sum(bins, 0.0), correct_sum(bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Half-open bins [lower, upper); the last bin also takes its upper edge.
    auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, confidences[i]);
    const auto b = static_cast<std::size_t>(it - (edges.begin() + 1));
    conf_sum[b] += confidences[i];
    correct_sum[b] += labels[i] ? 1.0 : 0.0;
    ++report.bins[b].count;
  }
  // Accumulate in bin order so the result does not depend on input order.
  for (std::size_t b = 0; b < bins; ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    const double c = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / c;
    bin.accuracy = correct_sum[b] / c;
    report.ece += c / static_cast<double>(n) * std::abs(bin.mean_confidence - bin.accuracy);
  }
  return report;
}

AncestorRegression ancestor_regression(const std::vector<bool>& target,
                                       const std::vector<double>& markov_conf,
                                       const std::vector<double>& ancestor_conf) {
  const std::size_t n = target.size();
  if (markov_conf.size() != n || ancestor_conf.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "regression inputs differ in length");
  }
  if (n < 25) throw Error(ErrorCode::kTooFewPoints, "ancestor regression needs n >= 25");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(markov_conf[i]) || !std::isfinite(ancestor_conf[i])) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite predictor");
    }
  }
  const auto fit = fit_logistic({markov_conf, ancestor_conf}, target);
  for (double v : fit.covariance) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kSingularInformation, "information not invertible");
  }
  AncestorRegression out;
  out.intercept = fit.coef[0];
  out.markov_coef = fit.coef[1];
  out.ancestor_coef = fit.coef[2];
  out.markov_log10_p = log10_two_sided_p(fit.coef[1] / std::sqrt(fit.covariance[1 * 3 + 1]));
  out.ancestor_log10_p = log10_two_sided_p(fit.coef[2] / std::sqrt(fit.covariance[2 * 3 + 2]));
  return out;
}

}  // namespace ctune
