#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctune/calibration.hpp"
#include "ctune/cascade_model.hpp"
#include "ctune/dataset.hpp"
#include "ctune/gof.hpp"

namespace ctune {

struct FitOptions {
  /// Task kind per model id; models not listed use `default_task_kind`.
  std::map<std::string, TaskKind> task_kinds;
  TaskKind default_task_kind = TaskKind::kMultipleChoice;
  bool use_transform = true;
  MarginalFitOptions marginal;
  std::uint64_t seed = 0;
};

/// Calibrates every model on the train split, fits its marginal on the
/// calibrated train confidences, and fits a Gumbel copula for every pair from
/// Kendall's tau.
CascadeModel fit_cascade(const AlignedDataset& ds, const PriceSheet& prices,
                         const FitOptions& opt = {});

/// Calibrated confidences of one model on one split.
std::vector<double> calibrated(const AlignedDataset& ds, const CascadeModel& cm, std::size_t pos,
                               SplitTag tag);

struct FitDiagnostics {
  std::vector<double> ece;  // per model, on the test split (train if no test queries)
  TauMatrix tau;
};

FitDiagnostics fit_diagnostics(const AlignedDataset& ds, const CascadeModel& cm);

}  // namespace ctune
