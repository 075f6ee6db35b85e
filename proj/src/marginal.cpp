#include "ctune/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "ctune/error.hpp"

namespace ctune {
namespace {

constexpr double kMinShape = 1e-3;
constexpr double kMaxShape = 1e5;

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Double precision throughout: promotion to long double costs several times
// the runtime for no accuracy the fits can use.
using DoublePolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

double beta_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x, DoublePolicy());
}

void moment_init(double weight, double mean_sum, double sq_sum, double& a, double& b) {
  a = b = 1.0;
  if (!(weight > 0.0)) return;
  const double m = mean_sum / weight;
  const double v = sq_sum / weight - m * m;
  if (!(v > 0.0) || !(m > 0.0) || !(m < 1.0)) return;
  const double common = m * (1.0 - m) / v - 1.0;
  if (!(common > 0.0)) return;
  a = std::clamp(m * common, kMinShape, kMaxShape);
  b = std::clamp((1.0 - m) * common, kMinShape, kMaxShape);
}

}  // namespace

double MarginalModel::mixture_cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double f = 0.0;
  if (pi > 0.0) f += pi * beta_cdf(x, alpha1, beta1);
  if (pi < 1.0) f += (1.0 - pi) * beta_cdf(x, alpha2, beta2);
  return std::clamp(f, 0.0, 1.0);
}

double MarginalModel::mixture_log_pdf(double x) const {
  const double lx = std::log(x), l1x = std::log1p(-x);
  const double l1 = (alpha1 - 1.0) * lx + (beta1 - 1.0) * l1x - log_beta_fn(alpha1, beta1);
  const double l2 = (alpha2 - 1.0) * lx + (beta2 - 1.0) * l1x - log_beta_fn(alpha2, beta2);
  if (pi >= 1.0) return l1;
  if (pi <= 0.0) return l2;
  const double a = std::log(pi) + l1, b = std::log1p(-pi) + l2;
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double MarginalModel::mixture_quantile(double s) const {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  // Newton on the CDF with the density as derivative, safeguarded by [0, 1].
  auto f = [&](double x) {
    const double pdf = x > 0.0 && x < 1.0 ? std::exp(mixture_log_pdf(x)) : 0.0;
    return std::make_pair(mixture_cdf(x) - s, pdf);
  };
  std::uintmax_t iters = 200;
  return boost::math::tools::newton_raphson_iterate(f, s, 0.0, 1.0, 50, iters);
}

double MarginalModel::cdf(double phi) const {
  if (std::isnan(phi)) return std::numeric_limits<double>::quiet_NaN();
  if (phi < phi_min) return 0.0;
  if (phi >= phi_max) return 1.0;
  const double x = (phi - phi_min) / (phi_max - phi_min);
  return std::min(1.0, w_min + interior_weight() * mixture_cdf(x));
}

double MarginalModel::cdf_left(double phi) const {
  if (phi <= phi_min) return 0.0;
  if (phi > phi_max) return 1.0;
  if (phi == phi_max) return 1.0 - w_max;
  return cdf(phi);
}

double MarginalModel::quantile(double p) const {
  if (p <= w_min || degenerate || phi_max <= phi_min) return phi_min;
  if (p > 1.0 - w_max) return phi_max;
  const double s = (p - w_min) / interior_weight();
  double phi = phi_min + mixture_quantile(s) * (phi_max - phi_min);
  phi = std::clamp(phi, phi_min, phi_max);
  // Float round-off in the affine maps can leave F(phi) a hair below p.
  for (int i = 0; i < 64 && phi < phi_max && cdf(phi) < p; ++i) {
    phi = std::nextafter(phi, phi_max);
  }
  return phi;
}

double MarginalModel::mean() const {
  const double m1 = alpha1 / (alpha1 + beta1), m2 = alpha2 / (alpha2 + beta2);
  const double x = pi * m1 + (1.0 - pi) * m2;
  return w_min * phi_min + w_max * phi_max +
         interior_weight() * (phi_min + x * (phi_max - phi_min));
}

void beta_weighted_mle(double weight, double sum_log_x, double sum_log_1mx, double& alpha,
                       double& beta) {
  using boost::math::digamma;
  using boost::math::trigamma;
  if (!(weight > 0.0)) return;
  auto objective = [&](double a, double b) {
    return (a - 1.0) * sum_log_x + (b - 1.0) * sum_log_1mx - weight * log_beta_fn(a, b);
  };
  double current = objective(alpha, beta);
  for (int it = 0; it < 100; ++it) {
    const double dab = digamma(alpha + beta);
    const double g1 = sum_log_x - weight * (digamma(alpha) - dab);
    const double g2 = sum_log_1mx - weight * (digamma(beta) - dab);
    const double tab = trigamma(alpha + beta);
    // Negative Hessian (positive definite).
    const double h11 = weight * (trigamma(alpha) - tab);
    const double h22 = weight * (trigamma(beta) - tab);
    const double h12 = -weight * tab;
    const double det = h11 * h22 - h12 * h12;
    if (!(det > 0.0)) break;
    const double d1 = (h22 * g1 - h12 * g2) / det;
    const double d2 = (h11 * g2 - h12 * g1) / det;
    double t = 1.0;
    double na = alpha, nb = beta, next = current;
    bool improved = false;
    // Close to the optimum the objective is flat to rounding, so small full
    // Newton steps are taken without the ascent test.
    const bool local = std::max(std::abs(d1) / alpha, std::abs(d2) / beta) < 1e-4;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      na = alpha + t * d1;
      nb = beta + t * d2;
      if (na < kMinShape || nb < kMinShape || na > kMaxShape || nb > kMaxShape) continue;
      next = objective(na, nb);
      if (next >= current || (local && h == 0)) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    const double change = std::max(std::abs(na - alpha) / alpha, std::abs(nb - beta) / beta);
    alpha = na;
    beta = nb;
    current = next;
    if (change < 1e-12) break;
  }
}

MarginalModel fit_marginal(const std::vector<double>& phis, const MarginalFitOptions& opt,
                           MarginalFitTrace* trace) {
  if (phis.empty()) throw Error(ErrorCode::kTooFewInteriorPoints, "no confidences to fit");
  for (double p : phis) {
    if (!(p > 0.0 && p < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "calibrated confidences must lie in (0,1)");
    }
  }
  MarginalModel m;
  const auto [lo_it, hi_it] = std::minmax_element(phis.begin(), phis.end());
  m.phi_min = *lo_it;
  m.phi_max = *hi_it;
  const double n = static_cast<double>(phis.size());
  auto near = [&](double v, double ref) {
    return std::abs(v - ref) <= opt.endpoint_rel_tol * std::max(std::abs(ref), 1e-300);
  };
  if (near(m.phi_max, m.phi_min)) {
    m.degenerate = true;
    m.phi_max = m.phi_min;
    m.w_min = 0.0;
    m.w_max = 1.0;
    return m;
  }
  std::vector<double> interior;
  std::size_t n_min = 0, n_max = 0;
  for (double p : phis) {
    if (near(p, m.phi_min)) {
      ++n_min;
    } else if (near(p, m.phi_max)) {
      ++n_max;
    } else {
      interior.push_back((p - m.phi_min) / (m.phi_max - m.phi_min));
    }
  }
  m.w_min = static_cast<double>(n_min) / n;
  m.w_max = static_cast<double>(n_max) / n;
  if (interior.size() < opt.min_interior) {
    m.single_component_fallback = true;
    m.pi = 1.0;
    return m;
  }

  std::sort(interior.begin(), interior.end());
  const std::size_t ni = interior.size();
  std::vector<double> lx(ni), l1x(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    lx[i] = std::log(interior[i]);
    l1x[i] = std::log1p(-interior[i]);
  }

  // Initial responsibilities: hard split at the interior median.
  std::vector<double> r(ni);
  for (std::size_t i = 0; i < ni; ++i) r[i] = i < ni / 2 ? 1.0 : 0.0;

  auto m_step = [&](bool from_moments) {
    double w1 = 0, w2 = 0, s1x = 0, s1y = 0, s2x = 0, s2y = 0, m1 = 0, m2 = 0, q1 = 0, q2 = 0;
    for (std::size_t i = 0; i < ni; ++i) {
      const double a = r[i], b = 1.0 - r[i], x = interior[i];
      w1 += a;
      w2 += b;
      s1x += a * lx[i];
      s1y += a * l1x[i];
      s2x += b * lx[i];
      s2y += b * l1x[i];
      m1 += a * x;
      m2 += b * x;
      q1 += a * x * x;
      q2 += b * x * x;
    }
    m.pi = w1 / (w1 + w2);
    if (from_moments) {
      moment_init(w1, m1, q1, m.alpha1, m.beta1);
      moment_init(w2, m2, q2, m.alpha2, m.beta2);
    }
    beta_weighted_mle(w1, s1x, s1y, m.alpha1, m.beta1);
    beta_weighted_mle(w2, s2x, s2y, m.alpha2, m.beta2);
  };

  m_step(true);
  double prev = -std::numeric_limits<double>::infinity();
  MarginalFitTrace local;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    const double lb1 = log_beta_fn(m.alpha1, m.beta1), lb2 = log_beta_fn(m.alpha2, m.beta2);
    const double lp = m.pi > 0.0 ? std::log(m.pi) : -std::numeric_limits<double>::infinity();
    const double lq = m.pi < 1.0 ? std::log1p(-m.pi) : -std::numeric_limits<double>::infinity();
    double ll = 0.0;
    for (std::size_t i = 0; i < ni; ++i) {
      const double a = lp + (m.alpha1 - 1.0) * lx[i] + (m.beta1 - 1.0) * l1x[i] - lb1;
      const double b = lq + (m.alpha2 - 1.0) * lx[i] + (m.beta2 - 1.0) * l1x[i] - lb2;
      const double hi = std::max(a, b);
      const double lse = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
      ll += lse;
      r[i] = std::exp(a - lse);
    }
    local.log_likelihood.push_back(ll);
    if (ll - prev < opt.ll_tolerance) {
      local.converged = true;
      break;
    }
    prev = ll;
    m_step(false);
  }
  if (trace) *trace = std::move(local);
  return m;
}

std::vector<double> sample(const MarginalModel& m, std::size_t n, Rng& rng) {
  std::vector<double> out;
  out.reserve(n);
  std::gamma_distribution<double> g_a1(m.alpha1, 1.0), g_b1(m.beta1, 1.0);
  std::gamma_distribution<double> g_a2(m.alpha2, 1.0), g_b2(m.beta2, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform_open(rng);
    if (m.degenerate || u < m.w_min) {
      out.push_back(m.phi_min);
      continue;
    }
    if (u < m.w_min + m.w_max) {
      out.push_back(m.phi_max);
      continue;
    }
    const bool first = uniform_open(rng) < m.pi;
    const double ga = first ? g_a1(rng) : g_a2(rng);
    const double gb = first ? g_b1(rng) : g_b2(rng);
    double x = ga / (ga + gb);
    if (!(x > 0.0)) x = std::numeric_limits<double>::min();
    if (!(x < 1.0)) x = std::nextafter(1.0, 0.0);
    double phi = m.phi_min + x * (m.phi_max - m.phi_min);
    if (!(phi > m.phi_min)) phi = std::nextafter(m.phi_min, m.phi_max);
    if (!(phi < m.phi_max)) phi = std::nextafter(m.phi_max, m.phi_min);
    out.push_back(phi);
  }
  return out;
}

std::vector<double> sample(const MarginalModel& m, std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return sample(m, n, rng);
}

}  // namespace ctune
