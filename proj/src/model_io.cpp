#include "ctune/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctune/error.hpp"

namespace ctune {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->template get<T>();
}

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Json to_json(const Calibrator& c) {
  return Json{{"task_kind", std::string(task_kind_name(c.task_kind))},
              {"intercept", c.intercept},
              {"slope", c.slope},
              {"xi_min", c.xi_min},
              {"xi_max", c.xi_max},
              {"separation_flag", c.separation_flag},
              {"use_transform", c.use_transform}};
}

Calibrator calibrator_from_json(const Json& j) {
  Calibrator c;
  c.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
  c.intercept = j.at("intercept").get<double>();
  c.slope = j.at("slope").get<double>();
  c.xi_min = j.at("xi_min").get<double>();
  c.xi_max = j.at("xi_max").get<double>();
  c.separation_flag = get_or(j, "separation_flag", false);
  c.use_transform = get_or(j, "use_transform", true);
  return c;
}

Json to_json(const MarginalModel& m) {
  return Json{{"phi_min", m.phi_min}, {"phi_max", m.phi_max}, {"w_min", m.w_min},
              {"w_max", m.w_max},     {"pi", m.pi},           {"alpha1", m.alpha1},
              {"beta1", m.beta1},     {"alpha2", m.alpha2},   {"beta2", m.beta2},
              {"single_component_fallback", m.single_component_fallback},
              {"degenerate", m.degenerate}};
}

MarginalModel marginal_from_json(const Json& j) {
  MarginalModel m;
  m.phi_min = j.at("phi_min").get<double>();
  m.phi_max = j.at("phi_max").get<double>();
  m.w_min = get_or(j, "w_min", 0.0);
  m.w_max = get_or(j, "w_max", 0.0);
  m.pi = get_or(j, "pi", 1.0);
  m.alpha1 = get_or(j, "alpha1", 1.0);
  m.beta1 = get_or(j, "beta1", 1.0);
  m.alpha2 = get_or(j, "alpha2", 1.0);
  m.beta2 = get_or(j, "beta2", 1.0);
  m.single_component_fallback = get_or(j, "single_component_fallback", false);
  m.degenerate = get_or(j, "degenerate", false);
  return m;
}

Json model_to_json(const CascadeModel& cm) {
  Json j;
  j["format"] = "ctune-model";
  j["version"] = 1;
  Json order = Json::array();
  Json models = Json::array();
  for (std::size_t pos = 0; pos < cm.size(); ++pos) {
    const auto& mc = cm.model(pos);
    order.push_back(mc.model_id);
    models.push_back(Json{{"model_id", mc.model_id},
                          {"expected_cost", mc.expected_cost},
                          {"calibrator", to_json(mc.calibrator)},
                          {"marginal", to_json(mc.marginal)}});
  }
  j["model_order"] = order;
  j["models"] = models;
  Json copulas = Json::array();
  const auto& members = cm.members();
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const auto it = cm.root_pairs().find({members[a], members[b]});
      if (it == cm.root_pairs().end()) continue;
      const auto& pc = it->second;
      copulas.push_back(Json{{"i", a},
                             {"j", b},
                             {"family", "gumbel"},
                             {"theta", pc.copula.theta()},
                             {"tau", pc.tau},
                             {"clamped", pc.clamped},
                             {"n_pairs", pc.n_pairs}});
    }
  }
  j["copulas"] = copulas;
  j["metadata"] = Json{{"seed", cm.metadata().seed}, {"n_train", cm.metadata().n_train}};
  return j;
}

CascadeModel model_from_json(const Json& j) {
  try {
    std::vector<ModelComponent> models;
    for (const auto& m : j.at("models")) {
      ModelComponent mc;
      mc.model_id = m.at("model_id").get<std::string>();
      mc.expected_cost = m.at("expected_cost").get<double>();
      mc.calibrator = calibrator_from_json(m.at("calibrator"));
      mc.marginal = marginal_from_json(m.at("marginal"));
      models.push_back(std::move(mc));
    }
    PairCopulaTable copulas;
    for (const auto& c : j.at("copulas")) {
      PairCopula pc;
      pc.copula = GumbelCopula(c.at("theta").get<double>());
      pc.tau = get_or(c, "tau", pc.copula.tau());
      pc.clamped = get_or(c, "clamped", false);
      pc.n_pairs = get_or<std::size_t>(c, "n_pairs", 0);
      copulas[{c.at("i").get<std::size_t>(), c.at("j").get<std::size_t>()}] = pc;
    }
    FitMetadata meta;
    if (j.contains("metadata")) {
      meta.seed = get_or<std::uint64_t>(j["metadata"], "seed", 0);
      meta.n_train = get_or<std::size_t>(j["metadata"], "n_train", 0);
    }
    return CascadeModel(std::move(models), std::move(copulas), meta);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("model file: ") + e.what());
  }
}

void save_model(const CascadeModel& cm, const std::filesystem::path& path) {
  write_json(model_to_json(cm), path);
}

CascadeModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Json synth_spec_to_json(const SynthSpec& spec) {
  Json models = Json::array();
  for (const auto& m : spec.models) {
    models.push_back(Json{{"model_id", m.model_id},
                          {"marginal", to_json(m.marginal)},
                          {"task_kind", std::string(task_kind_name(m.task_kind))},
                          {"input_tokens", m.input_tokens},
                          {"output_tokens", m.output_tokens},
                          {"gamma_in", m.price.gamma_in},
                          {"gamma_out", m.price.gamma_out},
                          {"calibrator", to_json(synth_calibrator(m))}});
  }
  return Json{{"format", "ctune-synth"},
              {"models", models},
              {"thetas", spec.thetas},
              {"n_queries", spec.n_queries},
              {"seed", spec.seed}};
}

SynthSpec synth_spec_from_json(const Json& j) {
  try {
    SynthSpec spec;
    for (const auto& m : j.at("models")) {
      SynthModelSpec s;
      s.model_id = m.at("model_id").get<std::string>();
      s.marginal = marginal_from_json(m.at("marginal"));
      s.task_kind = parse_task_kind(get_or<std::string>(m, "task_kind", "multiple_choice"));
      s.input_tokens = get_or<std::uint64_t>(m, "input_tokens", 100);
      s.output_tokens = get_or<std::uint64_t>(m, "output_tokens", 10);
      s.price.gamma_in = get_or(m, "gamma_in", 0.0);
      s.price.gamma_out = get_or(m, "gamma_out", 0.0);
      spec.models.push_back(std::move(s));
    }
    spec.thetas = j.at("thetas").get<std::vector<double>>();
    spec.n_queries = get_or<std::size_t>(j, "n_queries", 1000);
    spec.seed = get_or<std::uint64_t>(j, "seed", 0);
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("synthetic spec: ") + e.what());
  }
}

FitOptions RunConfig::fit_options() const {
  FitOptions f;
  f.task_kinds = task_kinds;
  f.default_task_kind = default_task_kind;
  f.seed = split_seed;
  return f;
}

Json to_json(const RunConfig& c) {
  Json prices = Json::object();
  for (const auto& [id, p] : c.prices) {
    prices[id] = Json{{"gamma_in", p.gamma_in}, {"gamma_out", p.gamma_out}};
  }
  Json kinds = Json::object();
  for (const auto& [id, k] : c.task_kinds) kinds[id] = std::string(task_kind_name(k));
  const auto& t = c.tune;
  return Json{
      {"model_order", c.model_order},
      {"prices", prices},
      {"task_kind", std::string(task_kind_name(c.default_task_kind))},
      {"task_kinds", kinds},
      {"n_train", c.n_train},
      {"split_seed", c.split_seed},
      {"model_selection", c.model_selection},
      {"tune",
       Json{{"lambda0", t.lambda0},
            {"growth", t.growth},
            {"infill_q", t.infill_q},
            {"fd_step", t.fd_step},
            {"boundary_mass", t.boundary_mass},
            {"max_steps", t.max_steps},
            {"gradient_tolerance", t.gradient_tolerance},
            {"max_iterations", t.max_iterations},
            {"restarts", t.restarts},
            {"saturation_tol", t.saturation_tol},
            {"max_infill_depth", t.max_infill_depth}}},
      {"grid", Json{{"mass_step", c.grid.mass_step}, {"candidate_budget", c.grid.candidate_budget}}},
      {"gof", Json{{"B", c.gof_B}}}};
}

RunConfig run_config_from_json(const Json& j) {
  try {
    RunConfig c;
    c.model_order = get_or(j, "model_order", std::vector<std::string>{});
    if (j.contains("prices")) {
      for (const auto& [id, p] : j["prices"].items()) {
        TokenPrice tp;
        tp.gamma_in = p.at("gamma_in").get<double>();
        tp.gamma_out = p.at("gamma_out").get<double>();
        c.prices[id] = tp;
      }
    }
    c.default_task_kind = parse_task_kind(get_or<std::string>(j, "task_kind", "multiple_choice"));
    if (j.contains("task_kinds")) {
      for (const auto& [id, k] : j["task_kinds"].items()) {
        c.task_kinds[id] = parse_task_kind(k.get<std::string>());
      }
    }
    c.n_train = get_or<std::size_t>(j, "n_train", 0);
    c.split_seed = get_or<std::uint64_t>(j, "split_seed", 0);
    c.model_selection = get_or(j, "model_selection", true);
    if (j.contains("tune")) {
      const auto& t = j["tune"];
      auto& o = c.tune;
      o.lambda0 = get_or(t, "lambda0", o.lambda0);
      o.growth = get_or(t, "growth", o.growth);
      o.infill_q = get_or(t, "infill_q", o.infill_q);
      o.fd_step = get_or(t, "fd_step", o.fd_step);
      o.boundary_mass = get_or(t, "boundary_mass", o.boundary_mass);
      o.max_steps = get_or(t, "max_steps", o.max_steps);
      o.gradient_tolerance = get_or(t, "gradient_tolerance", o.gradient_tolerance);
      o.max_iterations = get_or(t, "max_iterations", o.max_iterations);
      o.restarts = get_or(t, "restarts", o.restarts);
      o.saturation_tol = get_or(t, "saturation_tol", o.saturation_tol);
      o.max_infill_depth = get_or(t, "max_infill_depth", o.max_infill_depth);
      o.validate();
    }
    if (j.contains("grid")) {
      c.grid.mass_step = get_or(j["grid"], "mass_step", c.grid.mass_step);
      c.grid.candidate_budget = get_or(j["grid"], "candidate_budget", c.grid.candidate_budget);
      c.grid.points_per_dim();
    }
    if (j.contains("gof")) c.gof_B = get_or(j["gof"], "B", c.gof_B);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return run_config_from_json(read_json(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void write_json(const Json& j, const std::filesystem::path& path) {
  write_text(j.dump(2) + "\n", path);
}

std::string frontier_csv(const std::vector<FrontierPoint>& points, std::size_t threshold_columns) {
  std::ostringstream out;
  out << "lambda";
  for (std::size_t c = 0; c < threshold_columns; ++c) out << ",phi_" << c + 1;
  out << ",p_correct_model,expected_cost_model,subcascade_id\n";
  for (const auto& fp : points) {
    out << fmt(fp.lambda);
    for (std::size_t c = 0; c < threshold_columns; ++c) {
      out << ',';
      if (c < fp.thresholds.phi.size()) out << fmt(fp.thresholds.phi[c]);
    }
    out << ',' << fmt(fp.point.p_correct) << ',' << fmt(fp.point.expected_cost) << ','
        << fp.subcascade_id << '\n';
  }
  return out.str();
}

std::vector<FrontierPoint> read_frontier_csv(const std::filesystem::path& path,
                                             const CascadeModel& cm) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::map<std::string, std::size_t> position;
  for (std::size_t pos = 0; pos < cm.size(); ++pos) position[cm.model(pos).model_id] = cm.members()[pos];
  std::string line;
  std::getline(in, line);
  const auto header = split_line(line, ',');
  if (header.size() < 4 || header.front() != "lambda" || header.back() != "subcascade_id") {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": not a frontier CSV");
  }
  const std::size_t n_phi = header.size() - 4;
  std::vector<FrontierPoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_line(line, ',');
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::kMalformedRecord,
                  path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != header.size()) fail("wrong number of fields");
    try {
      FrontierPoint fp;
      fp.lambda = std::stod(f[0]);
      fp.subcascade_id = f.back();
      for (const auto& id : split_line(fp.subcascade_id, '>')) {
        const auto it = position.find(id);
        if (it == position.end()) fail("unknown model '" + id + "'");
        fp.members.push_back(it->second);
      }
      for (std::size_t c = 0; c + 1 < fp.members.size(); ++c) {
        if (c >= n_phi || f[1 + c].empty()) fail("missing threshold");
        fp.thresholds.phi.push_back(std::stod(f[1 + c]));
      }
      fp.point.p_correct = std::stod(f[1 + n_phi]);
      fp.point.expected_cost = std::stod(f[2 + n_phi]);
      fp.objective = tune_objective(fp.point, fp.lambda);
      out.push_back(std::move(fp));
    } catch (const std::logic_error&) {
      fail("bad number");
    }
  }
  return out;
}

}  // namespace ctune
