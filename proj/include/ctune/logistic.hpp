#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ctune {

/// Maximum-likelihood logistic regression with an intercept, fit by
/// iteratively reweighted least squares. Small problems only (a handful of
/// predictors); the normal equations are solved densely.
struct LogisticFit {
  std::vector<double> coef;        // intercept first
  std::vector<double> covariance;  // row-major inverse observed information
  std::size_t iterations = 0;
  bool converged = false;
  bool separated = false;  // fell back to the ridge-penalized fit
  double log_likelihood = 0.0;
};

struct LogisticOptions {
  double tolerance = 1e-8;  // max absolute parameter change
  std::size_t max_iterations = 100;
  double separation_penalty = 1e-4;  // L2 on slopes when the MLE does not exist
};

/// `predictors` holds one column per predictor, each of length n.
LogisticFit fit_logistic(const std::vector<std::vector<double>>& predictors,
                         const std::vector<bool>& labels, const LogisticOptions& opt = {});

/// log10 of the two-sided standard-normal tail probability 2*Phi(-|z|),
/// accurate far into the tail where the probability itself underflows.
double log10_two_sided_p(double z);

/// Solves the symmetric positive-definite system A x = b in place (row-major A,
/// dimension p). Returns false when A is numerically singular.
bool solve_spd(std::vector<double> a, std::vector<double>& b, std::size_t p);
/// Inverse of a symmetric positive-definite matrix; false when singular.
bool invert_spd(const std::vector<double>& a, std::vector<double>& inverse, std::size_t p);

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace ctune
