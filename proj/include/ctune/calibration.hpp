#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ctune {

enum class TaskKind { kMultipleChoice, kGeneration };

std::string_view task_kind_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// Spreads overconfident raw probabilities out with log asymptotes.
///
/// Multiple choice: xi = log(1 / (1 - p)). Generation: the same for p >= 1/2
/// and log(1 / p) below. Returns +infinity where the transform blows up.
double transform(double p_raw, TaskKind kind);

struct ClampResult {
  std::vector<double> xis;
  double xi_min = 0.0;
  double xi_max = 0.0;
};

/// Replaces +inf by the largest finite value and -inf by the smallest.
ClampResult clamp_infinite(const std::vector<double>& xis);

/// Logistic map from transformed raw confidence to calibrated confidence.
struct Calibrator {
  TaskKind task_kind = TaskKind::kMultipleChoice;
  double intercept = 0.0;
  double slope = 0.0;
  double xi_min = 0.0;
  double xi_max = 0.0;
  bool separation_flag = false;
  /// False only for the ablation variant that regresses on p_raw directly.
  bool use_transform = true;

  double feature(double p_raw) const;
  double predict(double p_raw) const;
};

Calibrator fit_calibrator(const std::vector<double>& raw_confidences,
                          const std::vector<bool>& labels, TaskKind kind,
                          bool use_transform = true);

struct EceBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct EceReport {
  double ece = 0.0;
  std::vector<EceBin> bins;
};

/// Expected calibration error over adaptive bins whose edges are the empirical
/// deciles (linear interpolation); coincident edges merge into one bin.
EceReport ece(const std::vector<double>& confidences, const std::vector<bool>& labels,
              std::size_t n_bins = 10);

struct AncestorRegression {
  double intercept = 0.0;
  double markov_coef = 0.0;
  double ancestor_coef = 0.0;
  double markov_log10_p = 0.0;
  double ancestor_log10_p = 0.0;
};

/// Regresses a model's correctness on the calibrated confidence of its
/// immediate predecessor (Markov predictor) and of an earlier ancestor.
/// Wald p-values come from the inverse observed information.
AncestorRegression ancestor_regression(const std::vector<bool>& target,
                                       const std::vector<double>& markov_conf,
                                       const std::vector<double>& ancestor_conf);

}  // namespace ctune
