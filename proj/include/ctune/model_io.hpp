#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctune/cascade_model.hpp"
#include "ctune/dataset.hpp"
#include "ctune/gridsearch.hpp"
#include "ctune/pipeline.hpp"
#include "ctune/synth.hpp"
#include "ctune/tuner.hpp"

namespace ctune {

using Json = nlohmann::ordered_json;

Json to_json(const Calibrator& c);
Calibrator calibrator_from_json(const Json& j);
Json to_json(const MarginalModel& m);
MarginalModel marginal_from_json(const Json& j);

Json model_to_json(const CascadeModel& cm);
CascadeModel model_from_json(const Json& j);
void save_model(const CascadeModel& cm, const std::filesystem::path& path);
CascadeModel load_model(const std::filesystem::path& path);

Json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const Json& j);

/// Run configuration shared by the command-line tools. Every field is
/// optional in the file.
struct RunConfig {
  std::vector<std::string> model_order;
  PriceSheet prices;
  std::map<std::string, TaskKind> task_kinds;
  TaskKind default_task_kind = TaskKind::kMultipleChoice;
  std::size_t n_train = 0;  // 0 keeps the dataset's own split
  std::uint64_t split_seed = 0;
  bool model_selection = true;
  TuneConfig tune;
  GridSpec grid;
  std::size_t gof_B = 1000;

  FitOptions fit_options() const;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);

/// Frontier CSV: lambda, phi_1..phi_{d}, p_correct_model, expected_cost_model,
/// subcascade_id. Thresholds of shorter subcascades leave trailing columns empty.
std::string frontier_csv(const std::vector<FrontierPoint>& points, std::size_t threshold_columns);
/// Reads back frontier CSV rows; `members` are resolved against the cascade.
std::vector<FrontierPoint> read_frontier_csv(const std::filesystem::path& path,
                                             const CascadeModel& cm);

void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace ctune
