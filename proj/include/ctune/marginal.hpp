#pragma once

#include <cstdint>
#include <vector>

#include "ctune/random.hpp"

namespace ctune {

/// Distribution of a model's calibrated confidence: point masses at the
/// observed extremes plus a two-component beta mixture rescaled to
/// (phi_min, phi_max).
///
///   F(phi) = w_min 1{phi >= phi_min} + w_max 1{phi >= phi_max}
///            + (1 - w_min - w_max) [pi I_x(a1, b1) + (1 - pi) I_x(a2, b2)],
///   x = (phi - phi_min) / (phi_max - phi_min).
///
/// A point mass at a single value c is represented as phi_min = phi_max = c,
/// w_max = 1.
struct MarginalModel {
  double phi_min = 0.0;
  double phi_max = 1.0;
  double w_min = 0.0;
  double w_max = 0.0;
  double pi = 1.0;
  double alpha1 = 1.0;
  double beta1 = 1.0;
  double alpha2 = 1.0;
  double beta2 = 1.0;
  bool single_component_fallback = false;
  bool degenerate = false;

  double interior_weight() const { return 1.0 - w_min - w_max; }

  /// Right-continuous CDF; total on the real line.
  double cdf(double phi) const;
  /// Left limit F(phi-).
  double cdf_left(double phi) const;
  /// Generalized inverse inf{phi : F(phi) >= p}.
  double quantile(double p) const;
  double mean() const;

  /// CDF / inverse of the beta mixture on the unit interval.
  double mixture_cdf(double x) const;
  double mixture_quantile(double s) const;
  double mixture_log_pdf(double x) const;

  bool has_interior() const { return !degenerate && interior_weight() > 0.0; }
};

struct MarginalFitOptions {
  double endpoint_rel_tol = 1e-12;
  double ll_tolerance = 1e-9;
  std::size_t max_iterations = 500;
  std::size_t min_interior = 10;
};

/// Per-iteration observed-data log-likelihood of the interior mixture.
struct MarginalFitTrace {
  std::vector<double> log_likelihood;
  bool converged = false;
};

MarginalModel fit_marginal(const std::vector<double>& phis, const MarginalFitOptions& opt = {},
                           MarginalFitTrace* trace = nullptr);

std::vector<double> sample(const MarginalModel& m, std::size_t n, Rng& rng);
std::vector<double> sample(const MarginalModel& m, std::size_t n, std::uint64_t seed);

/// Maximum-likelihood beta shape parameters given weighted sufficient
/// statistics (sum of weights, sum of w log x, sum of w log(1 - x)), Newton
/// iterations on the digamma score started from (alpha, beta).
void beta_weighted_mle(double weight, double sum_log_x, double sum_log_1mx, double& alpha,
                       double& beta);

}  // namespace ctune
