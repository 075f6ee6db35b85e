#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ctune/error.hpp"
#include "ctune/gridsearch.hpp"
#include "test_support.hpp"

using namespace ctune;
using namespace ctune::testing;

namespace {

OperatingPoint op(double p, double c) { return OperatingPoint{p, c}; }

std::vector<OperatingPoint> random_points(Rng& rng, std::size_t n, bool coarse) {
  std::vector<OperatingPoint> pts(n);
  for (auto& p : pts) {
    if (coarse) {  // many exact ties
      p = op(std::round(unif(rng, 0, 10)) / 10.0, std::round(unif(rng, 0, 10)));
    } else {
      const double c = unif(rng, 0.0, 1.0);
      p = op(std::sqrt(c) - unif(rng, 0.0, 0.3), c);
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("candidate counts") {
  GridSpec spec;
  CHECK(spec.points_per_dim() == 40);
  CHECK(enumerate_candidates(random_cascade(2, 1), spec).count() == 40);
  CHECK(enumerate_candidates(random_cascade(5, 1), spec).count() == 2'560'000);
  GridSpec half;
  half.mass_step = 0.5;
  CHECK(enumerate_candidates(random_cascade(3, 1), half).count() == 4);
  for (std::size_t k = 2; k <= 5; ++k) {
    const double count = static_cast<double>(enumerate_candidates(random_cascade(k, 2), spec).count());
    CHECK(std::log(count) == doctest::Approx((k - 1) * std::log(40.0)).epsilon(1e-14));
  }
  GridSpec bad;
  bad.mass_step = 0.0;
  CHECK_THROWS_AS(bad.points_per_dim(), Error);
  CHECK_THROWS_AS(enumerate_candidates(random_cascade(1, 1), spec), Error);
}

TEST_CASE("quantile grid starts at phi_min and stops short of phi_max") {
  const auto cm = random_cascade(2, 3);
  const auto& m = cm.marginal(0);
  const auto g = quantile_grid(m, GridSpec{});
  REQUIRE(g.size() == 40);
  CHECK(g.front() == m.phi_min);
  CHECK(g.back() < m.phi_max);
  CHECK(std::is_sorted(g.begin(), g.end()));
  for (std::size_t j = 1; j < g.size(); ++j) CHECK(g[j] == m.quantile(j * 0.025));
}

TEST_CASE("enumeration is the row-major Cartesian product") {
  const auto cm = random_cascade(3, 4);
  GridSpec spec;
  spec.mass_step = 0.25;
  auto e = enumerate_candidates(cm, spec);
  const auto g0 = quantile_grid(cm.marginal(0), spec);
  const auto g1 = quantile_grid(cm.marginal(1), spec);
  ThresholdVector t;
  std::uint64_t i = 0;
  while (e.next(t)) {
    CHECK(t.phi == std::vector<double>{g0[i / 4], g1[i % 4]});
    CHECK(e.at(i).phi == t.phi);
    ++i;
  }
  CHECK(i == 16);
  e.reset();
  CHECK(e.next(t));
}

TEST_CASE("pareto filter examples") {
  const std::vector<OperatingPoint> pts{op(0.9, 5), op(0.8, 1), op(0.7, 3)};
  auto kept = pareto_filter(pts);
  std::sort(kept.begin(), kept.end());
  CHECK(kept == std::vector<std::size_t>{0, 1});
  CHECK(pareto_filter({op(0.5, 2)}) == std::vector<std::size_t>{0});
  CHECK(pareto_filter({op(0.5, 2), op(0.5, 2), op(0.5, 2)}) == std::vector<std::size_t>{0});
  // Equal on one coordinate is not domination.
  CHECK(pareto_filter({op(0.9, 5), op(0.8, 5)}).size() == 2);
  CHECK(pareto_filter({op(0.9, 5), op(0.9, 4)}).size() == 2);
}

TEST_CASE("pareto filter equals the quadratic oracle") {
  auto rng = make_rng(77);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 1 + static_cast<std::size_t>(unif(rng, 0, 2000));
    const auto pts = random_points(rng, n, rep % 2 == 0);
    auto fast = pareto_filter(pts);
    std::sort(fast.begin(), fast.end());
    CHECK(fast == pareto_bruteforce(pts));
  }
}

TEST_CASE("pareto output is sorted by cost and mutually nondominated") {
  auto rng = make_rng(78);
  const auto pts = random_points(rng, 500, false);
  const auto kept = pareto_filter(pts);
  for (std::size_t i = 1; i < kept.size(); ++i) {
    CHECK(pts[kept[i]].expected_cost >= pts[kept[i - 1]].expected_cost);
  }
  for (auto a : kept) {
    for (auto b : kept) {
      CHECK_FALSE((pts[a].p_correct > pts[b].p_correct && pts[a].expected_cost < pts[b].expected_cost));
    }
  }
}

TEST_CASE("skyline merge order does not matter") {
  auto rng = make_rng(79);
  const auto pts = random_points(rng, 900, true);
  std::vector<std::vector<IndexedPoint>> chunks(6);
  for (std::size_t i = 0; i < pts.size(); ++i) chunks[i % 6].push_back({i, pts[i]});
  std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
  std::vector<std::uint64_t> reference;
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<IndexedPoint> acc;
    for (auto c : order) acc = merge_skylines(std::move(acc), chunks[c]);
    std::vector<std::uint64_t> idx;
    for (const auto& p : acc) idx.push_back(p.index);
    if (rep == 0) reference = idx;
    CHECK(idx == reference);
  }
  std::vector<std::uint64_t> oracle;
  for (auto i : pareto_bruteforce(pts)) oracle.push_back(i);
  std::sort(reference.begin(), reference.end());
  CHECK(reference == oracle);
}

TEST_CASE("grid search equals brute-force evaluation at k = 2") {
  const auto cm = random_cascade(2, 5);
  GridStats stats;
  const auto front = grid_search(cm, GridSpec{}, &stats);
  CHECK(stats.candidates == 40);
  CHECK(stats.evaluations == 40);
  std::vector<OperatingPoint> all;
  auto e = enumerate_candidates(cm, GridSpec{});
  ThresholdVector t;
  while (e.next(t)) all.push_back(cm.evaluate(t));
  const auto kept = pareto_filter(all);
  REQUIRE(front.size() == kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    CHECK(front[i].point.p_correct == all[kept[i]].p_correct);
    CHECK(front[i].point.expected_cost == all[kept[i]].expected_cost);
    CHECK(front[i].thresholds.phi == e.at(kept[i]).phi);
    CHECK(front[i].subcascade_id == "m1>m2");
  }
}

TEST_CASE("grid search at k = 4 is invariant to enumeration order") {
  const auto cm = random_cascade(4, 6);
  GridSpec spec;
  spec.mass_step = 0.1;
  const auto front = grid_search(cm, spec);
  // Reverse-order enumeration through the same skyline.
  auto e = enumerate_candidates(cm, spec);
  std::vector<IndexedPoint> acc;
  for (std::uint64_t i = e.count(); i-- > 0;) acc = merge_skylines(std::move(acc), {{i, cm.evaluate(e.at(i))}});
  REQUIRE(acc.size() == front.size());
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(e.at(acc[i].index).phi == front[i].thresholds.phi);
}

TEST_CASE("candidate budget") {
  GridSpec spec;
  spec.candidate_budget = 1000;
  try {
    grid_search(random_cascade(3, 1), spec);
    FAIL("expected a budget error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCandidateBudgetExceeded);
  }
}
