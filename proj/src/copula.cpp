#include "ctune/copula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/roots.hpp>

#include "ctune/error.hpp"

namespace ctune {

GumbelCopula::GumbelCopula(double theta) : theta_(theta) {
  if (!(theta >= 1.0) || !std::isfinite(theta)) {
    throw Error(ErrorCode::kInvalidArgument, "Gumbel theta must be finite and >= 1");
  }
}

double GumbelCopula::cdf(double u, double v) const {
  if (u <= 0.0 || v <= 0.0) return 0.0;
  if (u >= 1.0) return std::min(v, 1.0);
  if (v >= 1.0) return u;
  if (theta_ == 1.0) return u * v;
  const double lx = std::log(-std::log(u)), ly = std::log(-std::log(v));
  const double a = theta_ * lx, b = theta_ * ly;
  const double hi = std::max(a, b);
  const double log_sum = hi + std::log1p(std::exp(std::min(a, b) - hi));
  const double c = std::exp(-std::exp(log_sum / theta_));
  // Clip to the Frechet-Hoeffding bounds against round-off.
  return std::clamp(c, std::max(u + v - 1.0, 0.0), std::min(u, v));
}

double GumbelCopula::conditional_cdf_given_u(double u, double v) const {
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  if (theta_ == 1.0) return v;
  u = std::clamp(u, 1e-300, std::nextafter(1.0, 0.0));
  const double x = -std::log(u), y = -std::log(v);
  const double a = theta_ * std::log(x), b = theta_ * std::log(y);
  const double hi = std::max(a, b);
  const double log_sum = hi + std::log1p(std::exp(std::min(a, b) - hi));
  const double log_a = log_sum / theta_;
  const double big_a = std::exp(log_a);
  const double log_h = -big_a + (1.0 - theta_) * log_a + (theta_ - 1.0) * std::log(x) + x;
  return std::clamp(std::exp(log_h), 0.0, 1.0);
}

double GumbelCopula::conditional_quantile_given_u(double u, double w, double tol) const {
  if (w <= 0.0) return 0.0;
  if (w >= 1.0) return 1.0;
  if (theta_ == 1.0) return w;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (conditional_cdf_given_u(u, mid) < w) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double GumbelCopula::kendall_function(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return std::min(1.0, t - t * std::log(t) / theta_);
}

double GumbelCopula::kendall_quantile(double p) const {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  auto f = [&](double t) { return kendall_function(t) - p; };
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(
      f, 0.0, 1.0, -p, 1.0 - p, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

double positive_stable(double alpha, Rng& rng) {
  if (alpha >= 1.0) return 1.0;
  const double w = M_PI * uniform_open(rng);
  const double e = exponential1(rng);
  const double a = std::sin(alpha * w) / std::pow(std::sin(w), 1.0 / alpha);
  const double b = std::pow(std::sin((1.0 - alpha) * w) / e, (1.0 - alpha) / alpha);
  return a * b;
}

std::pair<double, double> GumbelCopula::sample_one(Rng& rng) const {
  if (theta_ == 1.0) {
    const double u = uniform_open(rng);
    return {u, uniform_open(rng)};
  }
  const double s = positive_stable(1.0 / theta_, rng);
  const double inv = 1.0 / theta_;
  const double u = std::exp(-std::pow(exponential1(rng) / s, inv));
  const double v = std::exp(-std::pow(exponential1(rng) / s, inv));
  return {u, v};
}

std::vector<std::pair<double, double>> GumbelCopula::sample_pairs(std::size_t n, Rng& rng) const {
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(rng));
  return out;
}

std::vector<std::pair<double, double>> GumbelCopula::sample_pairs(std::size_t n,
                                                                  std::uint64_t seed) const {
  auto rng = make_rng(seed);
  return sample_pairs(n, rng);
}

double conditional_event_prob(const GumbelCopula& c, double f_prev_at_a, double f_cur_at_b) {
  if (!(f_prev_at_a > 0.0)) {
    throw Error(ErrorCode::kConditioningOnNullEvent, "conditioning event has probability zero");
  }
  return std::clamp(c.cdf(f_prev_at_a, f_cur_at_b) / f_prev_at_a, 0.0, 1.0);
}

double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (ys.size() != n) throw Error(ErrorCode::kInvalidArgument, "tau inputs differ in length");
  if (n < 2) throw Error(ErrorCode::kDegenerateInput, "tau needs at least two pairs");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] < xs[b] || (xs[a] == xs[b] && ys[a] < ys[b]);
  });
  auto pairs = [](std::uint64_t t) { return t * (t - 1) / 2; };
  std::uint64_t tied_x = 0, tied_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && xs[order[j]] == xs[order[i]]) ++j;
    tied_x += pairs(j - i);
    for (std::size_t a = i; a < j;) {
      std::size_t b = a + 1;
      while (b < j && ys[order[b]] == ys[order[a]]) ++b;
      tied_xy += pairs(b - a);
      a = b;
    }
    i = j;
  }
  // Bottom-up merge sort on y counting strict inversions.
  std::vector<double> y(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = ys[order[i]];
  std::uint64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (y[j] < y[i]) {
          swaps += mid - i;
          buf[k++] = y[j++];
        } else {
          buf[k++] = y[i++];
        }
      }
      while (i < mid) buf[k++] = y[i++];
      while (j < hi) buf[k++] = y[j++];
    }
    std::swap(y, buf);
  }
  std::uint64_t tied_y = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && y[j] == y[i]) ++j;
    tied_y += pairs(j - i);
    i = j;
  }
  const std::uint64_t total = pairs(n);
  if (tied_x == total || tied_y == total) {
    throw Error(ErrorCode::kDegenerateInput, "tau undefined for a constant coordinate");
  }
  const double num = static_cast<double>(total) - static_cast<double>(tied_x) -
                     static_cast<double>(tied_y) + static_cast<double>(tied_xy) -
                     2.0 * static_cast<double>(swaps);
  const double den = std::sqrt(static_cast<double>(total - tied_x)) *
                     std::sqrt(static_cast<double>(total - tied_y));
  return std::clamp(num / den, -1.0, 1.0);
}

ThetaFit fit_theta(double tau) {
  if (!(tau < 1.0)) throw Error(ErrorCode::kTauOutOfRange, "tau must be below 1");
  ThetaFit out;
  out.tau = tau;
  if (tau < 0.0) {
    out.clamped = true;
    tau = 0.0;
  }
  out.copula = GumbelCopula(1.0 / (1.0 - tau));
  return out;
}

}  // namespace ctune
