#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ctune/error.hpp"
#include "ctune/gof.hpp"
#include "test_support.hpp"

using namespace ctune;
using namespace ctune::testing;

namespace {

MarginalModel mixed_model() {
  MarginalModel m;
  m.phi_min = 0.1;
  m.phi_max = 0.95;
  m.w_min = 0.05;
  m.w_max = 0.15;
  m.pi = 0.6;
  m.alpha1 = 2.0;
  m.beta1 = 5.0;
  m.alpha2 = 8.0;
  m.beta2 = 3.0;
  return m;
}

MarginalModel single_beta(double a, double b) {
  MarginalModel m;
  m.phi_min = 0.0;
  m.phi_max = 1.0;
  m.pi = 1.0;
  m.alpha1 = a;
  m.beta1 = b;
  m.alpha2 = a;
  m.beta2 = b;
  return m;
}

// Midpoint rule over the quantile scale: atoms contribute their own mass,
// the continuous part is integrated in u = F(x), where x_i <= Q(u) iff
// F(x_i) <= u.
double marginal_integral_oracle(const MarginalModel& m, const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  std::vector<double> us;
  for (double x : xs) us.push_back(m.cdf(x));
  std::sort(us.begin(), us.end());
  auto count_le = [&](double u) { return (std::upper_bound(us.begin(), us.end(), u) - us.begin()) / n; };
  auto fn = [&](double x) {
    return std::count_if(xs.begin(), xs.end(), [&](double y) { return y <= x; }) / n;
  };
  double total = m.w_min * std::pow(fn(m.phi_min) - m.w_min, 2) + m.w_max * std::pow(fn(m.phi_max) - 1.0, 2);
  const int steps = 400000;
  const double lo = m.w_min, hi = 1.0 - m.w_max, h = (hi - lo) / steps;
  for (int i = 0; i < steps; ++i) {
    const double u = lo + (i + 0.5) * h;
    total += h * std::pow(count_le(u) - u, 2);
  }
  return total;
}

double kendall_integral_oracle(const GumbelCopula& c, const std::vector<double>& v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  const int steps = 200000;
  double total = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double u = (i + 0.5) / steps;
    const double t = c.kendall_quantile(u);
    const double kn = (std::upper_bound(s.begin(), s.end(), t) - s.begin()) / n;
    total += (kn - u) * (kn - u) / steps;
  }
  return total;
}

Calibrator identity_like() {
  Calibrator c;
  c.slope = 1.0;
  c.xi_min = 0.0;
  c.xi_max = 50.0;
  return c;
}

}  // namespace

TEST_CASE("marginal CvM integral matches a quadrature oracle") {
  auto rng = make_rng(2);
  for (int rep = 0; rep < 4; ++rep) {
    const auto m = rep == 0 ? mixed_model() : random_marginal(rng);
    const auto xs = sample(m, 200, rng);
    CHECK(marginal_cvm_integral(m, xs) == doctest::Approx(marginal_integral_oracle(m, xs)).epsilon(1e-5));
  }
  // A sample concentrated on phi_max only.
  const auto m = mixed_model();
  const std::vector<double> top(30, m.phi_max);
  CHECK(marginal_cvm_integral(m, top) == doctest::Approx(marginal_integral_oracle(m, top)).epsilon(1e-5));
}

TEST_CASE("marginal CvM: perfect sample, shifted sample, permutation invariance") {
  const auto m = mixed_model();
  const std::size_t n = 400;
  std::vector<double> exact;
  for (std::size_t i = 1; i <= n; ++i) exact.push_back(m.quantile((i - 0.5) / n));
  const auto good = marginal_cvm(m, exact, 200, 5);
  CHECK(good.p_value > 0.5);
  CHECK(good.bootstrap.size() == 200);
  CHECK(good.statistic == doctest::Approx(std::sqrt(good.normalized)));

  const auto shifted_data = sample(single_beta(5, 2), 1000, std::uint64_t{6});
  const auto bad = marginal_cvm(single_beta(2, 5), shifted_data, 200, 7);
  CHECK(bad.p_value < 0.05);
  CHECK(bad.reject_at_05);
  CHECK(bad.p_value == doctest::Approx(1.0 / 201.0));

  auto perm = shifted_data;
  std::shuffle(perm.begin(), perm.end(), make_rng(1));
  CHECK(marginal_cvm_integral(single_beta(2, 5), perm) == marginal_cvm_integral(single_beta(2, 5), shifted_data));

  CHECK_THROWS_AS(marginal_cvm(m, std::vector<double>(19, 0.5), 10, 1), Error);
}

TEST_CASE("marginal CvM on well-fit held-out data is a few percent") {
  const auto m = mixed_model();
  double acc = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const auto fit = fit_marginal(sample(m, 300, std::uint64_t(100 + r)));
    acc += std::sqrt(marginal_cvm_integral(fit, sample(m, 1000, std::uint64_t(200 + r))));
  }
  const double mean = acc / reps;
  CHECK(mean >= 0.01);
  CHECK(mean <= 0.05);
}

TEST_CASE("marginal bootstrap is deterministic and p-values lie in (0, 1]") {
  const auto m = mixed_model();
  const auto xs = sample(m, 200, std::uint64_t{8});
  const auto fit = fit_marginal(xs);
  const auto a = marginal_cvm(fit, xs, 40, 3);
  const auto b = marginal_cvm(fit, xs, 40, 3);
  CHECK(a.bootstrap == b.bootstrap);
  CHECK(a.p_value == b.p_value);
  CHECK(a.p_value > 0.0);
  CHECK(a.p_value <= 1.0);
  const auto exceed = std::count_if(a.bootstrap.begin(), a.bootstrap.end(), [&](double s) { return s >= a.statistic; });
  CHECK(a.p_value == doctest::Approx((1.0 + exceed) / 41.0));
}

TEST_CASE("pseudo-observations match the quadratic definition") {
  auto rng = make_rng(11);
  std::vector<std::pair<double, double>> p(300);
  for (auto& [x, y] : p) {
    x = std::round(unif(rng, 0, 20));
    y = std::round(x + unif(rng, 0, 10));
  }
  const auto v = kendall_pseudo_observations(p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::size_t c = 0;
    for (const auto& q : p) c += (q.first <= p[i].first && q.second <= p[i].second) ? 1 : 0;
    CHECK(v[i] == static_cast<double>(c) / p.size());
  }
}

TEST_CASE("kendall CvM integral matches a quadrature oracle and is permutation invariant") {
  const GumbelCopula c(2.0);
  auto pairs = c.sample_pairs(300, 4);
  const double exact = kendall_cvm_integral(c, pairs);
  CHECK(exact >= 0.0);
  CHECK(exact == doctest::Approx(kendall_integral_oracle(c, kendall_pseudo_observations(pairs))).epsilon(1e-4));
  std::shuffle(pairs.begin(), pairs.end(), make_rng(2));
  CHECK(kendall_cvm_integral(c, pairs) == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("kendall transform test: power, determinism, interior filtering") {
  const auto indep = GumbelCopula(1.0).sample_pairs(1000, 12);
  const auto r = kendall_transform_cvm(GumbelCopula(3.0), indep, 200, 13);
  CHECK(r.p_value < 0.05);
  CHECK(r.statistic >= 0.0);
  CHECK(r.normalized == doctest::Approx(r.statistic / std::sqrt(1000.0)));

  const GumbelCopula c(2.0);
  const auto pairs = c.sample_pairs(500, 14);
  std::vector<double> xs, ys;
  for (auto [x, y] : pairs) {
    xs.push_back(x);
    ys.push_back(y);
  }
  const auto fitted = fit_theta(kendall_tau(xs, ys)).copula;
  const auto a = kendall_transform_cvm(fitted, pairs, 50, 15);
  const auto b = kendall_transform_cvm(fitted, pairs, 50, 15);
  CHECK(a.bootstrap == b.bootstrap);
  CHECK(a.p_value == b.p_value);

  MarginalModel unit;
  unit.phi_min = 0.2;
  unit.phi_max = 0.8;
  const auto filtered = kendall_transform_cvm(fitted, pairs, 5, 1, std::make_pair(unit, unit));
  std::size_t inside = 0;
  for (auto [x, y] : pairs) inside += (x > 0.2 && x < 0.8 && y > 0.2 && y < 0.8) ? 1 : 0;
  CHECK(filtered.n == inside);
  CHECK_THROWS_AS(kendall_transform_cvm(fitted, std::vector<std::pair<double, double>>(pairs.begin(), pairs.begin() + 29), 5, 1), Error);
}

TEST_CASE("kendall transform test rarely rejects under the null") {
  int rejections = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const auto pairs = GumbelCopula(2.0).sample_pairs(300, 1000 + r);
    std::vector<double> xs, ys;
    for (auto [x, y] : pairs) {
      xs.push_back(x);
      ys.push_back(y);
    }
    const auto fitted = fit_theta(kendall_tau(xs, ys)).copula;
    rejections += kendall_transform_cvm(fitted, pairs, 100, 2000 + r).reject_at_05 ? 1 : 0;
  }
  CHECK(rejections <= 4);
}

TEST_CASE("tau matrix: diagonal, identical columns, small subsets") {
  std::vector<QueryRecord> recs;
  auto rng = make_rng(20);
  for (int q = 0; q < 200; ++q) {
    const double p = unif(rng, 0.05, 0.95);
    const bool inc = q < 30;  // exactly 30 queries where both models fail
    recs.push_back({"q" + std::to_string(q), "a", p, !inc, 1, 1});
    recs.push_back({"q" + std::to_string(q), "b", p, !inc && q % 2 == 0, 1, 1});
    recs.push_back({"q" + std::to_string(q), "c", unif(rng, 0.05, 0.95), true, 1, 1});
  }
  auto ds = AlignedDataset::from_records(recs, {"a", "b", "c"});
  ds = ds.with_split(std::vector<SplitTag>(200, SplitTag::kTest));
  const std::vector<Calibrator> cals(3, identity_like());
  const auto all = tau_matrix(ds, cals, TauSubset::kAll);
  for (std::size_t i = 0; i < 3; ++i) CHECK(all.at(i, i) == 1.0);
  CHECK(all.at(0, 1) == doctest::Approx(1.0));
  CHECK(all.at(1, 0) == all.at(0, 1));
  CHECK(std::abs(all.at(0, 2)) < 0.2);

  const auto inc = tau_matrix(ds, cals, TauSubset::kBothIncorrect);
  CHECK(inc.n[0 * 3 + 1] == 30);
  CHECK_FALSE(inc.has(0, 1));
  const auto cor = tau_matrix(ds, cals, TauSubset::kBothCorrect);
  CHECK(cor.has(0, 1));
  CHECK(cor.n[0 * 3 + 1] == 85);
  CHECK(parse_tau_subset(tau_subset_name(TauSubset::kBothCorrect)) == TauSubset::kBothCorrect);
  CHECK_THROWS_AS(parse_tau_subset("some"), Error);
}
