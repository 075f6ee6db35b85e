#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <limits>
#include <random>

#include "ctune/calibration.hpp"
#include "ctune/error.hpp"
#include "ctune/logistic.hpp"
#include "ctune/random.hpp"

using namespace ctune;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

bool bernoulli(Rng& rng, double p) { return uniform_open(rng) < p; }

}  // namespace

TEST_CASE("transform values and branch continuity") {
  CHECK(transform(0.9, TaskKind::kMultipleChoice) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK(transform(0.5, TaskKind::kGeneration) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(transform(0.5, TaskKind::kMultipleChoice) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(transform(std::nextafter(0.5, 0.0), TaskKind::kGeneration) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(transform(0.2, TaskKind::kGeneration) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(transform(1.0, TaskKind::kMultipleChoice) == kInf);
  CHECK(transform(1.0, TaskKind::kGeneration) == kInf);
  CHECK(transform(0.0, TaskKind::kGeneration) == kInf);
  CHECK(transform(0.0, TaskKind::kMultipleChoice) == 0.0);
}

TEST_CASE("clamp_infinite") {
  auto r = clamp_infinite({1.0, 2.0, kInf});
  CHECK(r.xis == std::vector<double>{1.0, 2.0, 2.0});
  CHECK(r.xi_max == 2.0);
  CHECK(r.xi_min == 1.0);
  CHECK(clamp_infinite({0.3, 0.1}).xis == std::vector<double>{0.3, 0.1});
  CHECK(code_of([] { clamp_infinite({kInf, kInf}); }) == ErrorCode::kAllInfinite);
}

TEST_CASE("labels independent of the feature recover the base rate") {
  auto rng = make_rng(101);
  std::vector<double> p;
  std::vector<bool> y;
  for (int i = 0; i < 2000; ++i) {
    p.push_back(uniform_open(rng));
    y.push_back(bernoulli(rng, 0.7));
  }
  const auto cal = fit_calibrator(p, y, TaskKind::kMultipleChoice);
  CHECK(std::abs(cal.slope) < 0.1);
  CHECK(sigmoid(cal.intercept) == doctest::Approx(0.70).epsilon(0.02 / 0.7));
}

TEST_CASE("logistic coefficients recovered from simulated data") {
  auto rng = make_rng(202);
  std::vector<double> p;
  std::vector<bool> y;
  for (int i = 0; i < 5000; ++i) {
    const double xi = 2.0 * uniform_open(rng);
    p.push_back(-std::expm1(-xi));
    y.push_back(bernoulli(rng, sigmoid(0.5 + 2.0 * xi)));
  }
  const auto cal = fit_calibrator(p, y, TaskKind::kMultipleChoice);
  CHECK(std::abs(cal.intercept - 0.5) <= 0.15);
  CHECK(std::abs(cal.slope - 2.0) <= 0.15);
  CHECK_FALSE(cal.separation_flag);
}

TEST_CASE("single-class and separated training sets") {
  CHECK(code_of([] {
          fit_calibrator({0.2, 0.5, 0.9}, {true, true, true}, TaskKind::kMultipleChoice);
        }) == ErrorCode::kSingleClassTrainingSet);
  // Perfect separation: the penalized fit stays finite and is flagged.
  const auto cal = fit_calibrator({0.1, 0.2, 0.3, 0.7, 0.8, 0.9},
                                  {false, false, false, true, true, true},
                                  TaskKind::kMultipleChoice);
  CHECK(cal.separation_flag);
  CHECK(std::isfinite(cal.slope));
  CHECK(cal.slope > 0.0);
}

TEST_CASE("predict: identity case, clamping, monotonicity, open range") {
  Calibrator zero;
  zero.xi_min = 0.0;
  zero.xi_max = 5.0;
  for (double p : {0.0, 0.3, 0.99, 1.0}) CHECK(zero.predict(p) == 0.5);

  Calibrator c;
  c.intercept = -1.0;
  c.slope = 1.5;
  c.xi_min = 0.05;
  c.xi_max = 4.0;
  CHECK(c.predict(1.0) == sigmoid(-1.0 + 1.5 * 4.0));
  CHECK(c.predict(0.0) == sigmoid(-1.0 + 1.5 * 0.05));
  double prev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double v = c.predict(i / 1000.0);
    CHECK(v >= prev);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    prev = v;
  }

  Calibrator steep;
  steep.intercept = -800.0;
  steep.slope = 400.0;
  steep.xi_min = 0.0;
  steep.xi_max = 40.0;
  CHECK(steep.predict(0.0) > 0.0);
  CHECK(steep.predict(1.0) < 1.0);
}

TEST_CASE("ECE examples") {
  CHECK(ece(std::vector<double>(10, 0.8), {1, 1, 1, 1, 1, 1, 1, 1, 0, 0}).ece ==
        doctest::Approx(0.0).epsilon(1e-12));
  const auto half = ece(std::vector<double>(10, 1.0), {1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
  CHECK(half.ece == doctest::Approx(0.5));
  CHECK(half.bins.size() == 1);

  // Hand enumeration: linear-interpolated deciles put each sample in its own
  // bin, so ECE is the mean of |i/10 - 1{i > 5}|.
  std::vector<double> conf;
  std::vector<bool> y;
  double oracle = 0.0;
  for (int i = 1; i <= 10; ++i) {
    conf.push_back(i / 10.0);
    y.push_back(i > 5);
    oracle += std::abs(i / 10.0 - (i > 5 ? 1.0 : 0.0)) / 10.0;
  }
  const auto rep = ece(conf, y);
  CHECK(rep.bins.size() == 10);
  for (const auto& b : rep.bins) CHECK(b.count == 1);
  CHECK(rep.ece == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(rep.ece == doctest::Approx(0.25).epsilon(1e-12));

  CHECK(code_of([] { ece({}, {}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("ECE is permutation invariant and bins partition the sample") {
  auto rng = make_rng(7);
  std::vector<double> c;
  std::vector<bool> y;
  for (int i = 0; i < 500; ++i) {
    c.push_back(std::round(uniform_open(rng) * 20) / 20);  // heavy ties
    y.push_back(bernoulli(rng, c.back()));
  }
  const auto base = ece(c, y);
  std::size_t total = 0;
  for (const auto& b : base.bins) total += b.count;
  CHECK(total == c.size());
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> c2;
    std::vector<bool> y2;
    for (auto i : idx) {
      c2.push_back(c[i]);
      y2.push_back(y[i]);
    }
    CHECK(ece(c2, y2).ece == doctest::Approx(base.ece).epsilon(1e-12));
  }
}

TEST_CASE("ECE of a calibrator on its own predictive distribution is small") {
  Calibrator cal;
  cal.intercept = -1.0;
  cal.slope = 1.2;
  cal.xi_min = 0.0;
  cal.xi_max = 6.0;
  auto rng = make_rng(99);
  std::vector<double> phi;
  std::vector<bool> y;
  for (int i = 0; i < 10000; ++i) {
    phi.push_back(cal.predict(uniform_open(rng)));
    y.push_back(bernoulli(rng, phi.back()));
  }
  CHECK(ece(phi, y).ece <= 0.03);
}

TEST_CASE("transform lowers test ECE in the overconfident regime") {
  auto rng = make_rng(31337);
  std::lognormal_distribution<double> skew(1.0, 0.8);
  auto draw = [&](std::size_t n, std::vector<double>& p, std::vector<bool>& y) {
    for (std::size_t i = 0; i < n; ++i) {
      const double z = skew(rng);
      const double praw = sigmoid(z);
      const double xi = -std::log1p(-std::min(praw, 1.0 - 1e-16));
      p.push_back(praw);
      y.push_back(bernoulli(rng, sigmoid(-1.5 + 0.7 * xi)));
    }
  };
  std::vector<double> ptr, pte;
  std::vector<bool> ytr, yte;
  draw(2000, ptr, ytr);
  draw(5000, pte, yte);
  auto test_ece = [&](bool use_transform) {
    const auto cal = fit_calibrator(ptr, ytr, TaskKind::kMultipleChoice, use_transform);
    std::vector<double> phi;
    for (double p : pte) phi.push_back(cal.predict(p));
    return ece(phi, yte).ece;
  };
  CHECK(test_ece(true) <= test_ece(false));
}

TEST_CASE("ancestor regression: rank deficiency") {
  auto rng = make_rng(5);
  std::vector<double> x;
  std::vector<bool> y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(uniform_open(rng));
    y.push_back(bernoulli(rng, 0.5));
  }
  CHECK(code_of([&] { ancestor_regression(y, x, x); }) == ErrorCode::kSingularInformation);
}

TEST_CASE("ancestor regression under the null and under a Markov alternative") {
  const double log_alpha = std::log10(0.05);
  int null_markov = 0, null_ancestor = 0, alt_ok = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    auto rng = make_rng(1000 + s);
    std::vector<double> m, a;
    std::vector<bool> y0, y1;
    for (int i = 0; i < 1000; ++i) {
      m.push_back(uniform_open(rng));
      a.push_back(uniform_open(rng));
      y0.push_back(bernoulli(rng, 0.6));
      y1.push_back(bernoulli(rng, sigmoid(-3.0 + 6.0 * m.back())));
    }
    const auto r0 = ancestor_regression(y0, m, a);
    if (r0.markov_log10_p > log_alpha) ++null_markov;
    if (r0.ancestor_log10_p > log_alpha) ++null_ancestor;
    const auto r1 = ancestor_regression(y1, m, a);
    if (r1.markov_log10_p < -3.0 && r1.ancestor_log10_p > log_alpha) ++alt_ok;
  }
  // Each predictor is non-significant on at least 90% of null seeds.
  CHECK(null_markov >= static_cast<int>(0.9 * seeds));
  CHECK(null_ancestor >= static_cast<int>(0.9 * seeds));
  CHECK(alt_ok >= static_cast<int>(0.9 * seeds));
}

TEST_CASE("two-sided log10 p-value") {
  CHECK(log10_two_sided_p(0.0) == doctest::Approx(0.0));
  CHECK(log10_two_sided_p(1.959963984540054) == doctest::Approx(std::log10(0.05)).epsilon(1e-9));
  // Far tail: finite and close to the asymptotic expansion.
  const double z = 60.0;
  const double asym = (-z * z / 2 - std::log(z) - 0.5 * std::log(2 * M_PI) + std::log(2.0)) / std::log(10.0);
  CHECK(log10_two_sided_p(z) == doctest::Approx(asym).epsilon(1e-3));
}
