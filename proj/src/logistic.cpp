#include "ctune/logistic.hpp"

#include <algorithm>
#include <limits>

#include "ctune/error.hpp"

namespace ctune {
namespace {

// log(1 + exp(x)) without overflow.
double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double log_likelihood(const std::vector<double>& eta, const std::vector<bool>& y) {
  double ll = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) ll += (y[i] ? eta[i] : 0.0) - log1p_exp(eta[i]);
  return ll;
}

}  // namespace

bool solve_spd(std::vector<double> a, std::vector<double>& b, std::size_t p) {
  // Cholesky with a relative pivot floor.
  double scale = 0.0;
  for (std::size_t i = 0; i < p; ++i) scale = std::max(scale, std::abs(a[i * p + i]));
  if (!(scale > 0.0)) return false;
  for (std::size_t j = 0; j < p; ++j) {
    double d = a[j * p + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * p + k] * a[j * p + k];
    if (!(d > 1e-11 * scale)) return false;
    d = std::sqrt(d);
    a[j * p + j] = d;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / d;
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * p + k] * b[k];
    b[i] = s / a[i * p + i];
  }
  for (std::size_t i = p; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < p; ++k) s -= a[k * p + i] * b[k];
    b[i] = s / a[i * p + i];
  }
  return true;
}

bool invert_spd(const std::vector<double>& a, std::vector<double>& inverse, std::size_t p) {
  inverse.assign(p * p, 0.0);
  for (std::size_t c = 0; c < p; ++c) {
    std::vector<double> e(p, 0.0);
    e[c] = 1.0;
    if (!solve_spd(a, e, p)) return false;
    for (std::size_t r = 0; r < p; ++r) inverse[r * p + c] = e[r];
  }
  return true;
}

LogisticFit fit_logistic(const std::vector<std::vector<double>>& predictors,
                         const std::vector<bool>& labels, const LogisticOptions& opt) {
  const std::size_t n = labels.size();
  const std::size_t p = predictors.size() + 1;
  for (const auto& col : predictors) {
    if (col.size() != n) throw Error(ErrorCode::kInvalidArgument, "predictor length mismatch");
  }
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (n_pos == 0 || n_pos == n) {
    throw Error(ErrorCode::kSingleClassTrainingSet, "logistic regression needs both labels");
  }
  auto x = [&](std::size_t i, std::size_t j) { return j == 0 ? 1.0 : predictors[j - 1][i]; };

  auto run = [&](double penalty, LogisticFit& fit) -> bool {
    fit.coef.assign(p, 0.0);
    const double base = static_cast<double>(n_pos) / static_cast<double>(n);
    fit.coef[0] = std::log(base / (1.0 - base));
    std::vector<double> eta(n, fit.coef[0]);
    auto objective = [&](const std::vector<double>& e, const std::vector<double>& b) {
      double pen = 0.0;
      for (std::size_t j = 1; j < p; ++j) pen += b[j] * b[j];
      return log_likelihood(e, labels) - 0.5 * penalty * pen;
    };
    double current = objective(eta, fit.coef);
    for (fit.iterations = 0; fit.iterations < opt.max_iterations; ++fit.iterations) {
      std::vector<double> info(p * p, 0.0), grad(p, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double mu = sigmoid(eta[i]);
        const double w = mu * (1.0 - mu);
        const double r = (labels[i] ? 1.0 : 0.0) - mu;
        for (std::size_t a = 0; a < p; ++a) {
          const double xa = x(i, a);
          grad[a] += xa * r;
          for (std::size_t b = 0; b <= a; ++b) info[a * p + b] += w * xa * x(i, b);
        }
      }
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < a; ++b) info[b * p + a] = info[a * p + b];
      for (std::size_t j = 1; j < p; ++j) {
        info[j * p + j] += penalty;
        grad[j] -= penalty * fit.coef[j];
      }
      std::vector<double> step = grad;
      if (!solve_spd(info, step, p)) {
        if (fit.iterations == 0 && penalty == 0.0) {
          throw Error(ErrorCode::kSingularInformation,
                      "design matrix is rank deficient (collinear predictors)");
        }
        return false;
      }
      // Step halving keeps the (penalized) likelihood nondecreasing.
      double t = 1.0;
      std::vector<double> trial(p), trial_eta(n);
      double next = current;
      for (int h = 0; h < 40; ++h, t *= 0.5) {
        for (std::size_t j = 0; j < p; ++j) trial[j] = fit.coef[j] + t * step[j];
        for (std::size_t i = 0; i < n; ++i) {
          double e = 0.0;
          for (std::size_t j = 0; j < p; ++j) e += x(i, j) * trial[j];
          trial_eta[i] = e;
        }
        next = objective(trial_eta, trial);
        if (next >= current - 1e-12 * std::abs(current)) break;
      }
      double change = 0.0;
      for (std::size_t j = 0; j < p; ++j) change = std::max(change, std::abs(trial[j] - fit.coef[j]));
      fit.coef = trial;
      eta = trial_eta;
      current = next;
      if (change < opt.tolerance) {
        fit.converged = true;
        ++fit.iterations;
        break;
      }
    }
    fit.log_likelihood = log_likelihood(eta, labels);
    std::vector<double> info(p * p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = sigmoid(eta[i]);
      const double w = mu * (1.0 - mu);
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) info[a * p + b] += w * x(i, a) * x(i, b);
    }
    for (std::size_t j = 1; j < p; ++j) info[j * p + j] += penalty;
    if (!invert_spd(info, fit.covariance, p)) {
      fit.covariance.assign(p * p, std::numeric_limits<double>::infinity());
    }
    return fit.converged;
  };

  LogisticFit fit;
  if (run(0.0, fit)) return fit;
  LogisticFit penalized;
  run(opt.separation_penalty, penalized);
  penalized.separated = true;
  return penalized;
}

double log10_two_sided_p(double z) {
  const double x = std::abs(z) / std::sqrt(2.0);
  const double p = std::erfc(x);
  if (p > 1e-300) return std::log10(p);
  // Asymptotic expansion of log erfc(x) for large x.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) - 15.0 / (8.0 * x2 * x2 * x2);
  const double ln_p = -x2 - std::log(x * std::sqrt(M_PI)) + std::log(series);
  return ln_p / std::log(10.0);
}

}  // namespace ctune
