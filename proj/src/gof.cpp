#include "ctune/gof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctune/error.hpp"
#include "ctune/parallel.hpp"
#include "ctune/random.hpp"

namespace ctune {
namespace {

// int_{lo}^{hi} (c(u) - u)^2 du where c starts at c0 and rises by `step` at
// each sorted breakpoint.
double step_cvm(double c0, const std::vector<double>& breaks, double step, double lo, double hi) {
  auto segment = [](double c, double a, double b) {
    if (!(b > a)) return 0.0;
    const double da = c - a, db = c - b;
    return (da * da * da - db * db * db) / 3.0;
  };
  double total = 0.0, c = c0, at = lo;
  for (double b : breaks) {
    const double x = std::clamp(b, lo, hi);
    total += segment(c, at, x);
    at = std::max(at, x);
    c += step;
  }
  return total + segment(c, at, hi);
}

double p_value(double observed, const std::vector<double>& boot) {
  std::size_t exceed = 0;
  for (double s : boot) exceed += s >= observed ? 1 : 0;
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(boot.size()) + 1.0);
}

}  // namespace

double marginal_cvm_integral(const MarginalModel& m, const std::vector<double>& phis) {
  const std::size_t n = phis.size();
  if (n == 0) throw Error(ErrorCode::kTooFewPoints, "empty sample");
  const double inv_n = 1.0 / static_cast<double>(n);
  std::size_t at_or_below_min = 0, at_or_below_max = 0;
  std::vector<double> interior;
  for (double x : phis) {
    if (x <= m.phi_min) {
      ++at_or_below_min;
    } else if (x < m.phi_max) {
      interior.push_back(m.cdf(x));
    }
    if (x <= m.phi_max) ++at_or_below_max;
  }
  std::sort(interior.begin(), interior.end());
  const double fn_min = static_cast<double>(at_or_below_min) * inv_n;
  const double fn_max = static_cast<double>(at_or_below_max) * inv_n;
  double total = 0.0;
  if (m.degenerate || !(m.phi_max > m.phi_min)) {
    // Single atom: F jumps from 0 to 1 at phi_min.
    const double fn = static_cast<double>(std::count_if(phis.begin(), phis.end(),
                                                        [&](double x) { return x <= m.phi_min; })) *
                      inv_n;
    return (fn - 1.0) * (fn - 1.0);
  }
  total += m.w_min * (fn_min - m.w_min) * (fn_min - m.w_min);
  total += step_cvm(fn_min, interior, inv_n, m.w_min, 1.0 - m.w_max);
  total += m.w_max * (fn_max - 1.0) * (fn_max - 1.0);
  return total;
}

GofResult marginal_cvm(const MarginalModel& m, const std::vector<double>& test_phis,
                       std::size_t B, std::uint64_t seed, const MarginalGofOptions& opt) {
  const std::size_t n = test_phis.size();
  if (n < 20) throw Error(ErrorCode::kTooFewPoints, "marginal CvM needs at least 20 points");
  GofResult r;
  r.n = n;
  r.bootstrap_B = B;
  const double integral = marginal_cvm_integral(m, test_phis);
  r.statistic = std::sqrt(integral);
  r.normalized = integral;
  r.bootstrap.assign(B, 0.0);
  parallel_for(B, [&](std::size_t b) {
    auto rng = make_rng(seed, b);
    const auto x = sample(m, n, rng);
    MarginalModel refit;
    if (opt.fit_size == 0) {
      refit = fit_marginal(x, opt.fit);
    } else {
      refit = fit_marginal(sample(m, opt.fit_size, rng), opt.fit);
    }
    r.bootstrap[b] = std::sqrt(marginal_cvm_integral(refit, x));
  });
  r.p_value = p_value(r.statistic, r.bootstrap);
  r.reject_at_05 = r.p_value < 0.05;
  return r;
}

std::vector<double> kendall_pseudo_observations(
    const std::vector<std::pair<double, double>>& pairs) {
  const std::size_t n = pairs.size();
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = pairs[i].second;
  std::vector<double> sorted_y = ys;
  std::sort(sorted_y.begin(), sorted_y.end());
  // Rank = number of y values <= y_i, 1-based, ties share the upper rank.
  auto rank = [&](double y) {
    return static_cast<std::size_t>(std::upper_bound(sorted_y.begin(), sorted_y.end(), y) -
                                    sorted_y.begin());
  };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pairs[a].first < pairs[b].first; });
  std::vector<std::size_t> tree(n + 1, 0);
  auto add = [&](std::size_t i) {
    for (; i <= n; i += i & (~i + 1)) ++tree[i];
  };
  auto prefix = [&](std::size_t i) {
    std::size_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  };
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pairs[order[j]].first == pairs[order[i]].first) add(rank(ys[order[j++]]));
    for (std::size_t t = i; t < j; ++t) {
      v[order[t]] = static_cast<double>(prefix(rank(ys[order[t]]))) / static_cast<double>(n);
    }
    i = j;
  }
  return v;
}

double kendall_cvm_integral(const GumbelCopula& c,
                            const std::vector<std::pair<double, double>>& pairs) {
  const auto v = kendall_pseudo_observations(pairs);
  std::vector<double> u(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) u[i] = c.kendall_function(v[i]);
  std::sort(u.begin(), u.end());
  return step_cvm(0.0, u, 1.0 / static_cast<double>(v.size()), 0.0, 1.0);
}

GofResult kendall_transform_cvm(
    const GumbelCopula& c, const std::vector<std::pair<double, double>>& pairs, std::size_t B,
    std::uint64_t seed,
    const std::optional<std::pair<MarginalModel, MarginalModel>>& marginals) {
  std::vector<std::pair<double, double>> used;
  if (marginals) {
    const auto& [mx, my] = *marginals;
    for (const auto& p : pairs) {
      if (p.first > mx.phi_min && p.first < mx.phi_max && p.second > my.phi_min &&
          p.second < my.phi_max) {
        used.push_back(p);
      }
    }
  } else {
    used = pairs;
  }
  const std::size_t n = used.size();
  if (n < 30) throw Error(ErrorCode::kTooFewPoints, "copula CvM needs at least 30 interior pairs");
  GofResult r;
  r.n = n;
  r.bootstrap_B = B;
  const double nd = static_cast<double>(n);
  const double integral = kendall_cvm_integral(c, used);
  r.statistic = nd * integral;
  r.normalized = std::sqrt(nd) * integral;
  r.bootstrap.assign(B, 0.0);
  parallel_for(B, [&](std::size_t b) {
    auto rng = make_rng(seed, b);
    const auto sim = c.sample_pairs(n, rng);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) std::tie(xs[i], ys[i]) = sim[i];
    const auto refit = fit_theta(kendall_tau(xs, ys)).copula;
    r.bootstrap[b] = nd * kendall_cvm_integral(refit, sim);
  });
  r.p_value = p_value(r.statistic, r.bootstrap);
  r.reject_at_05 = r.p_value < 0.05;
  return r;
}

std::string tau_subset_name(TauSubset s) {
  switch (s) {
    case TauSubset::kAll: return "all";
    case TauSubset::kBothCorrect: return "both_correct";
    case TauSubset::kBothIncorrect: return "both_incorrect";
  }
  return "all";
}

TauSubset parse_tau_subset(const std::string& name) {
  if (name == "all") return TauSubset::kAll;
  if (name == "both_correct") return TauSubset::kBothCorrect;
  if (name == "both_incorrect") return TauSubset::kBothIncorrect;
  throw Error(ErrorCode::kInvalidArgument, "unknown tau subset '" + name + "'");
}

TauMatrix tau_matrix(const AlignedDataset& ds, const std::vector<Calibrator>& calibrators,
                     TauSubset subset, SplitTag tag, std::size_t min_n) {
  const std::size_t k = ds.num_models();
  if (calibrators.size() != k) {
    throw Error(ErrorCode::kInvalidArgument, "one calibrator per model is required");
  }
  const auto rows = ds.indices(tag);
  std::vector<std::vector<double>> conf(k, std::vector<double>(rows.size()));
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      conf[m][r] = calibrators[m].predict(ds.record(rows[r], m).raw_confidence);
    }
  }
  TauMatrix out;
  out.k = k;
  out.tau.assign(k * k, std::numeric_limits<double>::quiet_NaN());
  out.n.assign(k * k, 0);
  out.available.assign(k * k, false);
  for (std::size_t i = 0; i < k; ++i) {
    out.tau[i * k + i] = 1.0;
    out.n[i * k + i] = rows.size();
    out.available[i * k + i] = true;
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<double> xs, ys;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const bool ci = ds.record(rows[r], i).correct, cj = ds.record(rows[r], j).correct;
        if (subset == TauSubset::kBothCorrect && !(ci && cj)) continue;
        if (subset == TauSubset::kBothIncorrect && (ci || cj)) continue;
        xs.push_back(conf[i][r]);
        ys.push_back(conf[j][r]);
      }
      const std::size_t needed = subset == TauSubset::kAll ? 2 : min_n;
      out.n[i * k + j] = out.n[j * k + i] = xs.size();
      if (xs.size() < needed) continue;
      try {
        const double t = kendall_tau(xs, ys);
        out.tau[i * k + j] = out.tau[j * k + i] = t;
        out.available[i * k + j] = out.available[j * k + i] = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateInput) throw;
      }
    }
  }
  return out;
}

}  // namespace ctune
