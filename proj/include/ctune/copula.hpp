#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ctune/random.hpp"

namespace ctune {

/// Gumbel copula C(u, v) = exp(-((-ln u)^theta + (-ln v)^theta)^(1/theta)),
/// theta >= 1 (theta = 1 is independence).
class GumbelCopula {
 public:
  GumbelCopula() = default;
  explicit GumbelCopula(double theta);

  double theta() const { return theta_; }
  /// Kendall's tau implied by theta: 1 - 1/theta.
  double tau() const { return 1.0 - 1.0 / theta_; }

  double cdf(double u, double v) const;
  /// h-function dC/du(u, v) = P(V <= v | U = u).
  double conditional_cdf_given_u(double u, double v) const;
  /// Inverse of the h-function in v, by bisection to `tol`.
  double conditional_quantile_given_u(double u, double w, double tol = 1e-10) const;

  /// Distribution of C(U, V): K(t) = t - t ln(t) / theta.
  double kendall_function(double t) const;
  /// Inverse of kendall_function on (0, 1].
  double kendall_quantile(double p) const;

  /// Draws one (U, V) pair by the Marshall-Olkin frailty construction.
  std::pair<double, double> sample_one(Rng& rng) const;
  std::vector<std::pair<double, double>> sample_pairs(std::size_t n, Rng& rng) const;
  std::vector<std::pair<double, double>> sample_pairs(std::size_t n, std::uint64_t seed) const;

 private:
  double theta_ = 1.0;
};

/// P(Phi_cur <= b | Phi_prev <= a) = C(F_prev(a), F_cur(b)) / F_prev(a).
double conditional_event_prob(const GumbelCopula& c, double f_prev_at_a, double f_cur_at_b);

/// Tie-adjusted Kendall tau-b in O(n log n).
double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys);

struct ThetaFit {
  GumbelCopula copula;
  double tau = 0.0;  // the estimate the parameter came from, before clamping
  bool clamped = false;
};

/// theta = 1 / (1 - tau); negative tau is clamped to independence.
ThetaFit fit_theta(double tau);

/// Positive stable variate with Laplace transform exp(-t^alpha), 0 < alpha <= 1
/// (Kanter / Chambers-Mallows-Stuck representation).
double positive_stable(double alpha, Rng& rng);

}  // namespace ctune
