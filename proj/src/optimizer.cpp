#include "ctune/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "ctune/error.hpp"

namespace ctune {
namespace {

struct Counted {
  const Objective& f;
  std::size_t calls = 0;
  double operator()(const std::vector<double>& x) {
    ++calls;
    const double v = f(x);
    if (!std::isfinite(v)) throw Error(ErrorCode::kOptimizerDiverged, "objective is not finite");
    return v;
  }
};

}  // namespace

BoxMinimizeResult minimize_box(const Objective& objective, std::vector<double> x,
                               const std::vector<double>& lower,
                               const std::vector<double>& upper,
                               const BoxMinimizeOptions& opt) {
  const std::size_t n = x.size();
  if (lower.size() != n || upper.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "bound dimensions do not match the start point");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) throw Error(ErrorCode::kInvalidArgument, "empty box");
  }
  Counted f{objective};
  auto project = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lower[i], upper[i]);
  };
  auto gradient = [&](const std::vector<double>& at) {
    std::vector<double> g(n, 0.0);
    std::vector<double> probe = at;
    for (std::size_t i = 0; i < n; ++i) {
      const double hi = std::min(at[i] + opt.fd_step, upper[i]);
      const double lo = std::max(at[i] - opt.fd_step, lower[i]);
      if (!(hi > lo)) continue;
      probe[i] = hi;
      const double f_hi = f(probe);
      probe[i] = lo;
      const double f_lo = f(probe);
      probe[i] = at[i];
      g[i] = (f_hi - f_lo) / (hi - lo);
    }
    return g;
  };
  auto projected_norm = [&](const std::vector<double>& at, const std::vector<double>& g) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double moved = std::clamp(at[i] - g[i], lower[i], upper[i]) - at[i];
      norm = std::max(norm, std::abs(moved));
    }
    return norm;
  };

  project(x);
  BoxMinimizeResult res;
  double fx = f(x);
  std::vector<double> g = gradient(x);
  // Inverse Hessian approximation, row-major.
  std::vector<double> h(n * n, 0.0);
  auto reset_h = [&] {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
  };
  reset_h();

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (projected_norm(x, g) < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<bool> free(n, true);
    for (std::size_t i = 0; i < n; ++i) {
      if ((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)) free[i] = false;
    }
    auto direction = [&] {
      std::vector<double> d(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (!free[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (free[j]) d[i] -= h[i * n + j] * g[j];
        }
      }
      return d;
    };
    std::vector<double> d = direction();
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += g[i] * d[i];
    if (!(slope < 0.0)) {
      reset_h();
      d = direction();
    }

    double t = 1.0;
    std::vector<double> trial(n);
    double f_trial = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + t * d[i];
      project(trial);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (trial[i] - x[i]);
      if (trial == x) break;
      f_trial = f(trial);
      if (f_trial <= fx + 1e-4 * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No progress along the quasi-Newton path; retry once from steepest descent.
      bool was_identity = true;
      for (std::size_t i = 0; i < n && was_identity; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (h[i * n + j] != (i == j ? 1.0 : 0.0)) was_identity = false;
      if (was_identity) break;
      reset_h();
      continue;
    }
    std::vector<double> g_new = gradient(trial);
    std::vector<double> s(n), y(n);
    double sy = 0.0, ss = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial[i] - x[i];
      y[i] = g_new[i] - g[i];
      sy += s[i] * y[i];
      ss += s[i] * s[i];
      yy += y[i] * y[i];
    }
    const double f_change = fx - f_trial;
    x = trial;
    fx = f_trial;
    g = g_new;
    if (sy > 1e-12 * std::sqrt(ss * yy)) {
      if (res.iterations == 0) {
        // Scale the initial matrix to the observed curvature.
        reset_h();
        for (std::size_t i = 0; i < n; ++i) h[i * n + i] = sy / yy;
      }
      // BFGS inverse update: H = (I - r s y') H (I - r y s') + r s s'.
      const double r = 1.0 / sy;
      std::vector<double> hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) hy[i] += h[i * n + j] * y[j];
      double yhy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yhy += y[i] * hy[i];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          h[i * n + j] += -r * (s[i] * hy[j] + hy[i] * s[j]) + (r * r * yhy + r) * s[i] * s[j];
        }
      }
    }
    if (f_change <= 1e-15 * (1.0 + std::abs(fx)) && std::sqrt(ss) < 1e-12) break;
  }
  res.x = std::move(x);
  res.value = fx;
  res.evaluations = f.calls;
  return res;
}

}  // namespace ctune
