#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ctune/error.hpp"
#include "ctune/model_io.hpp"
#include "test_support.hpp"

using namespace ctune;
using namespace ctune::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ctune_model_io_test";
  fs::create_directories(dir);
  return dir / name;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("cascade model survives a JSON round trip bit for bit") {
  const auto cm = random_cascade(4, 3);
  const auto path = scratch("model.json");
  save_model(cm, path);
  const auto back = load_model(path);
  CHECK(model_to_json(back).dump() == model_to_json(cm).dump());
  auto rng = make_rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const auto t = random_thresholds(cm, rng);
    const auto a = cm.evaluate(t), b = back.evaluate(t);
    CHECK(a.p_correct == b.p_correct);
    CHECK(a.expected_cost == b.expected_cost);
  }
  CHECK(model_to_json(cm)["copulas"].size() == 6);
}

TEST_CASE("calibrator and marginal round trips") {
  Calibrator c;
  c.task_kind = TaskKind::kGeneration;
  c.intercept = -1.25;
  c.slope = 0.1 + 0.2;
  c.xi_min = 0.5;
  c.xi_max = 7.0;
  c.separation_flag = true;
  c.use_transform = false;
  const auto cj = Json::parse(to_json(c).dump());
  const auto c2 = calibrator_from_json(cj);
  CHECK(c2.slope == c.slope);
  CHECK(c2.task_kind == c.task_kind);
  CHECK(c2.separation_flag);
  CHECK_FALSE(c2.use_transform);
  auto rng = make_rng(2);
  const auto m = random_marginal(rng);
  const auto m2 = marginal_from_json(Json::parse(to_json(m).dump()));
  for (double x : {0.1, 0.3, 0.7, 0.95}) CHECK(m2.cdf(x) == m.cdf(x));
}

TEST_CASE("synthetic spec round trip") {
  const auto s = default_synth_spec(3, 123, 9);
  const auto back = synth_spec_from_json(Json::parse(synth_spec_to_json(s).dump()));
  CHECK(back.k() == 3);
  CHECK(back.n_queries == 123);
  CHECK(back.seed == 9);
  CHECK(back.thetas == s.thetas);
  CHECK(back.models[2].price.gamma_in == s.models[2].price.gamma_in);
  CHECK(synth_spec_to_json(back).dump() == synth_spec_to_json(s).dump());
  Json bad = synth_spec_to_json(s);
  bad["thetas"] = Json::array({0.5, 1.0});
  CHECK(code_of([&] { synth_spec_from_json(bad); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("run config: defaults, round trip, validation") {
  const auto empty = run_config_from_json(Json::object());
  CHECK(empty.n_train == 0);
  CHECK(empty.model_selection);
  CHECK(empty.grid.mass_step == 0.025);
  CHECK(empty.gof_B == 1000);

  const auto j = Json::parse(R"({
    "model_order": ["a", "b"],
    "prices": {"a": {"gamma_in": 1e-7, "gamma_out": 2e-7}, "b": {"gamma_in": 1e-6, "gamma_out": 2e-6}},
    "task_kind": "generation",
    "task_kinds": {"a": "multiple_choice"},
    "n_train": 300, "split_seed": 4, "model_selection": false,
    "tune": {"growth": 1.25, "infill_q": 0.05, "restarts": 3},
    "grid": {"mass_step": 0.05},
    "gof": {"B": 200}
  })");
  const auto c = run_config_from_json(j);
  CHECK(c.model_order == std::vector<std::string>{"a", "b"});
  CHECK(c.prices.at("b").gamma_out == 2e-6);
  CHECK(c.default_task_kind == TaskKind::kGeneration);
  CHECK(c.task_kinds.at("a") == TaskKind::kMultipleChoice);
  CHECK(c.tune.growth == 1.25);
  CHECK(c.tune.restarts == 3);
  CHECK(c.grid.points_per_dim() == 20);
  CHECK(c.gof_B == 200);
  CHECK_FALSE(c.model_selection);
  CHECK(to_json(run_config_from_json(to_json(c))).dump() == to_json(c).dump());

  CHECK(code_of([] { run_config_from_json(Json::parse(R"({"tune": {"infill_q": 0.5}})")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([] { run_config_from_json(Json::parse(R"({"prices": {"a": {"gamma_in": 1}}})")); }) ==
        ErrorCode::kMalformedRecord);
}

TEST_CASE("frontier CSV round trip with subcascades") {
  const auto cm = random_cascade(3, 5);
  std::vector<FrontierPoint> pts;
  for (const auto& sub : {cm, cm.subcascade({0, 2}), cm.subcascade({1})}) {
    FrontierPoint fp;
    fp.lambda = 0.125;
    auto rng = make_rng(sub.size());
    fp.thresholds = random_thresholds(sub, rng);
    fp.members = sub.members();
    fp.subcascade_id = sub.subcascade_id();
    fp.point = OperatingPoint{0.7, 1.0 / 3.0};
    pts.push_back(fp);
  }
  const auto path = scratch("frontier.csv");
  write_text(frontier_csv(pts, 2), path);
  const auto back = read_frontier_csv(path, cm);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].thresholds.phi == pts[i].thresholds.phi);
    CHECK(back[i].members == pts[i].members);
    CHECK(back[i].point.expected_cost == pts[i].point.expected_cost);
    CHECK(back[i].lambda == 0.125);
  }
  CHECK(frontier_csv(back, 2) == frontier_csv(pts, 2));

  std::ofstream(scratch("bad.csv")) << "lambda,phi_1,p_correct_model,expected_cost_model,subcascade_id\n"
                                    << "1,0.5,0.7,1,m1>zz\n";
  CHECK(code_of([&] { read_frontier_csv(scratch("bad.csv"), cm); }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([&] { read_frontier_csv(scratch("absent.csv"), cm); }) == ErrorCode::kIo);
}

TEST_CASE("malformed and missing model files") {
  std::ofstream(scratch("garbage.json")) << "{ not json";
  CHECK(code_of([] { load_model(scratch("garbage.json")); }) == ErrorCode::kMalformedRecord);
  std::ofstream(scratch("partial.json")) << R"({"models": []})";
  CHECK(code_of([] { load_model(scratch("partial.json")); }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([] { load_model(scratch("nope.json")); }) == ErrorCode::kIo);
}
