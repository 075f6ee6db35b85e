#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ctune/error.hpp"
#include "ctune/evaluation.hpp"
#include "ctune/synth.hpp"
#include "ctune/tuner.hpp"
#include "test_support.hpp"

using namespace ctune;
using namespace ctune::testing;

namespace {

SynthModelSpec synth_model(const std::string& id, double price) {
  SynthModelSpec m;
  m.model_id = id;
  m.marginal.phi_min = 0.05;
  m.marginal.phi_max = 0.99;
  m.marginal.pi = 0.5;
  m.marginal.alpha1 = 2.0;
  m.marginal.beta1 = 3.0;
  m.marginal.alpha2 = 6.0;
  m.marginal.beta2 = 2.0;
  m.input_tokens = 10;
  m.output_tokens = 1;
  m.price = TokenPrice{price, price};
  return m;
}

// Hand dataset: confidences and labels chosen per cell; one token each way.
struct Hand {
  AlignedDataset ds;
  CascadeModel cm;
  PriceSheet prices;
};

Hand hand_dataset() {
  const std::vector<SynthModelSpec> specs{synth_model("small", 1.0), synth_model("large", 10.0)};
  const Calibrator c0 = synth_calibrator(specs[0]), c1 = synth_calibrator(specs[1]);
  // (phi_small, correct_small, phi_large, correct_large)
  const double rows[3][4] = {{0.9, 1, 0.8, 1}, {0.3, 1, 0.95, 0}, {0.8, 0, 0.7, 1}};
  std::vector<QueryRecord> recs;
  for (int q = 0; q < 3; ++q) {
    const std::string id = "q" + std::to_string(q);
    recs.push_back({id, "small", invert_calibrator(c0, rows[q][0]), rows[q][1] > 0, 1, 1});
    recs.push_back({id, "large", invert_calibrator(c1, rows[q][2]), rows[q][3] > 0, 1, 1});
  }
  auto ds = AlignedDataset::from_records(recs).with_split(std::vector<SplitTag>(3, SplitTag::kTest));
  std::vector<ModelComponent> ms{{"small", c0, specs[0].marginal, 2.0}, {"large", c1, specs[1].marginal, 20.0}};
  PairCopulaTable t;
  t[{0, 1}].copula = GumbelCopula(1.5);
  return {ds, CascadeModel(ms, t), PriceSheet{{"small", {1.0, 1.0}}, {"large", {10.0, 10.0}}}};
}

CurvePoint pt(double cost, double error) {
  CurvePoint p;
  p.cost = cost;
  p.error = error;
  return p;
}

ErrorCostCurve curve_of(std::vector<CurvePoint> pts) {
  ErrorCostCurve c;
  c.points = std::move(pts);
  return c;
}

}  // namespace

TEST_CASE("replay on a hand dataset") {
  const auto h = hand_dataset();
  // Threshold 0.5: only q1 (phi 0.3) defers, and the large model gets it wrong.
  const auto r = replay(h.ds, h.cm, ThresholdVector{{0.5}}, h.prices);
  CHECK(r.n == 3);
  CHECK(r.error_rate == doctest::Approx(2.0 / 3.0));  // q1 wrong at large, q2 wrong at small
  CHECK(r.mean_cost == doctest::Approx((2.0 + 22.0 + 2.0) / 3.0));
  // Threshold 0.85: q1 and q2 defer.
  const auto r2 = replay(h.ds, h.cm, ThresholdVector{{0.85}}, h.prices);
  CHECK(r2.error_rate == doctest::Approx(1.0 / 3.0));
  CHECK(r2.mean_cost == doctest::Approx((2.0 + 22.0 + 22.0) / 3.0));
  // Below every confidence: identical to the small model alone.
  const auto none = replay(h.ds, h.cm, ThresholdVector{{0.01}}, h.prices);
  const auto solo = replay(h.ds, h.cm.subcascade({0}), ThresholdVector{}, h.prices);
  CHECK(none.error_rate == solo.error_rate);
  CHECK(none.mean_cost == solo.mean_cost);
  CHECK(solo.error_rate == doctest::Approx(1.0 / 3.0));
  CHECK(solo.mean_cost == doctest::Approx(2.0));
  // A threshold exactly at a confidence defers (strict inequality).
  const auto at = replay(h.ds, h.cm, ThresholdVector{{h.cm.model(0).calibrator.predict(h.ds.record(2, 0).raw_confidence)}}, h.prices);
  CHECK(at.mean_cost == doctest::Approx((2.0 + 22.0 + 22.0) / 3.0));

  CHECK_THROWS_AS(replay(h.ds, h.cm, ThresholdVector{}, h.prices), Error);
  PriceSheet partial{{"small", {1.0, 1.0}}};
  try {
    replay(h.ds, h.cm, ThresholdVector{{0.5}}, partial);
    FAIL("expected MissingPrice");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingPrice);
  }
}

TEST_CASE("replay cost is nondecreasing in every threshold") {
  SynthSpec s;
  s.models = {synth_model("a", 1.0), synth_model("b", 3.0), synth_model("c", 9.0)};
  s.thetas = {2.0, 2.0};
  s.n_queries = 3000;
  s.seed = 4;
  const auto ds = emit_dataset(s);
  const auto cm = ground_truth_model(s);
  auto rng = make_rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    auto t = random_thresholds(cm, rng);
    const double base = replay(ds, cm, t, s.prices(), SplitTag::kTrain).mean_cost;
    for (std::size_t j = 0; j < 2; ++j) {
      auto up = t;
      up.phi[j] = std::min(0.99, up.phi[j] + unif(rng, 0.0, 0.3));
      CHECK(replay(ds, cm, up, s.prices(), SplitTag::kTrain).mean_cost >= base);
    }
  }
}

TEST_CASE("auc examples") {
  CHECK(auc(curve_of({pt(0, 0.5), pt(1, 0.1)})) == doctest::Approx(0.3));
  CHECK(auc(curve_of({pt(3, 0.2), pt(7, 0.2), pt(5, 0.2)})) == doctest::Approx(0.2));
  // Constant extension from interior extremes.
  auto c = curve_of({pt(2, 0.4), pt(3, 0.2)});
  c.cost_min = 0;
  c.cost_max = 4;
  CHECK(auc(c) == doctest::Approx(0.5 * 0.4 + 0.25 * 0.3 + 0.25 * 0.2));
  // Dominated points do not count.
  CHECK(auc(curve_of({pt(0, 0.5), pt(0.5, 0.6), pt(1, 0.1)})) == doctest::Approx(0.3));
  CHECK_THROWS_AS(auc(curve_of({pt(0, 0.5)})), Error);
}

TEST_CASE("auc is invariant to ordering and duplicates and lies in [0, 1]") {
  auto rng = make_rng(6);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<CurvePoint> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(pt(unif(rng, 0, 5), unif(rng, 0, 1)));
    const double a = auc(curve_of(pts));
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    auto shuffled = pts;
    shuffled.insert(shuffled.end(), pts.begin(), pts.begin() + 5);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(auc(curve_of(shuffled)) == doctest::Approx(a).epsilon(1e-14));
  }
}

TEST_CASE("frontier comparison") {
  const auto a = curve_of({pt(1, 0.4), pt(2, 0.3), pt(4, 0.1)});
  CHECK(compare_frontiers(a, a).pct_delta == doctest::Approx(0.0));
  auto half = a;
  for (auto& p : half.points) p.error *= 0.5;
  CHECK(compare_frontiers(half, a).pct_delta == doctest::Approx(-50.0));
  // Union range: b's extra reach changes a's normalization.
  const auto b = curve_of({pt(0, 0.5), pt(4, 0.1)});
  const auto cmp = compare_frontiers(a, b);
  CHECK(cmp.auc_b == doctest::Approx(0.3));
  CHECK(cmp.auc_a == doctest::Approx(0.25 * 0.4 + 0.25 * 0.35 + 0.5 * 0.2));
  // A single-point frontier is flat over the union range.
  const auto lone = compare_frontiers(curve_of({pt(2, 0.2)}), b);
  CHECK(lone.auc_a == doctest::Approx(0.2));
  CHECK(lone.pct_delta == doctest::Approx(100.0 * (0.2 - 0.3) / 0.3));
}

TEST_CASE("model curve and empirical curve carry the frontier") {
  const auto h = hand_dataset();
  FrontierPoint fp;
  fp.thresholds = ThresholdVector{{0.5}};
  fp.point = h.cm.evaluate(fp.thresholds);
  fp.members = h.cm.members();
  fp.subcascade_id = h.cm.subcascade_id();
  FrontierPoint solo;
  solo.point = h.cm.subcascade({1}).evaluate(ThresholdVector{});
  solo.members = {1};
  const auto mc = model_curve({fp, solo});
  CHECK(mc.points[0].error == doctest::Approx(1.0 - fp.point.p_correct));
  CHECK(curve_source_name(mc.points[0].source) == "model");
  const auto ec = empirical_curve({fp, solo}, h.ds, h.cm, h.prices);
  CHECK(ec.points[0].error == doctest::Approx(2.0 / 3.0));
  CHECK(ec.points[1].cost == doctest::Approx(20.0));
  CHECK(ec.points[1].error == doctest::Approx(1.0 / 3.0));
  CHECK(ec.points[1].subcascade_id == "large");
}

TEST_CASE("tuned frontier agrees with replay on data drawn from the model") {
  SynthSpec s;
  s.models = {synth_model("a", 1.0), synth_model("b", 8.0)};
  s.models[0].marginal.w_max = 0.05;
  s.thetas = {1.8};
  s.n_queries = 200000;
  s.seed = 7;
  const auto cm = ground_truth_model(s);
  const auto ds = emit_dataset(s).with_split(std::vector<SplitTag>(s.n_queries, SplitTag::kTest));
  const auto frontier = tune(cm, TuneConfig{});
  REQUIRE(frontier.size() >= 5);
  const double n = static_cast<double>(s.n_queries);
  for (const auto& fp : frontier) {
    const auto r = replay(ds, cm, fp.thresholds, s.prices());
    const double p = fp.point.p_correct;
    CHECK(std::abs((1.0 - r.error_rate) - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}
