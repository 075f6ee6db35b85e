#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctune/cascade_model.hpp"

namespace ctune {

struct TuneConfig {
  /// Starting cost sensitivity; 0 selects 1e-3 / sum of expected costs.
  double lambda0 = 0.0;
  double growth = 0.5;             // lambda <- (1 + growth) lambda
  double infill_q = 0.1;           // largest allowed quantile gap between neighbours
  double fd_step = 1e-4;           // in quantile mass
  double boundary_mass = 1e-6;     // distance kept from the endpoint masses
  std::size_t max_steps = 100;     // lambda steps per sweep
  double gradient_tolerance = 1e-7;
  std::size_t max_iterations = 200;
  std::size_t restarts = 3;        // median start plus restarts - 1 random starts
  double saturation_tol = 1e-3;    // sweep stops at cost <= E[C_1] (1 + tol)
  std::size_t max_infill_depth = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FrontierPoint {
  double lambda = 0.0;
  ThresholdVector thresholds;
  OperatingPoint point;
  double objective = 0.0;
  std::string subcascade_id;
  /// Positions of the subcascade's models in the full cascade.
  std::vector<std::size_t> members;
  /// True for points produced by infill rather than optimization.
  bool interpolated = false;
};

/// Work counters; a solve is one call of solve_single.
struct TuneStats {
  std::size_t solves = 0;
  std::size_t sweeps = 0;
  std::size_t infill_insertions = 0;
  std::size_t residual_gaps = 0;  // gaps still above q when the depth cap hit
  std::uint64_t evaluations = 0;
};

double tune_objective(const OperatingPoint& p, double lambda);
double resolved_lambda0(const CascadeModel& cm, const TuneConfig& cfg);

/// Box for the optimizer in quantile coordinates u_j = F_j(phi_j).
struct QuantileBox {
  std::vector<double> lower;
  std::vector<double> upper;
};
QuantileBox quantile_box(const CascadeModel& cm, double boundary_mass);
ThresholdVector thresholds_from_quantiles(const CascadeModel& cm, const std::vector<double>& u);
std::vector<double> quantiles_from_thresholds(const CascadeModel& cm, const ThresholdVector& t);

/// Minimizes (1 - P(correct)) + lambda E[cost] over interior thresholds.
/// `stream` decorrelates the random starts of different solves.
FrontierPoint solve_single(const CascadeModel& cm, double lambda, const TuneConfig& cfg,
                           const std::optional<ThresholdVector>& warm_start = std::nullopt,
                           std::uint64_t stream = 0, TuneStats* stats = nullptr);

/// Lambda sweep with warm starts; points sorted by expected cost.
/// Throws Error(kEmptySweep) when the first solve is already saturated.
std::vector<FrontierPoint> sweep(const CascadeModel& cm, const TuneConfig& cfg,
                                 TuneStats* stats = nullptr);

/// Inserts threshold midpoints between neighbours whose quantile gap exceeds
/// q in any coordinate, recursively, keeping the input order otherwise.
std::vector<FrontierPoint> adaptive_infill(const std::vector<FrontierPoint>& points,
                                           const CascadeModel& cm, double q,
                                           std::size_t max_depth = 20,
                                           TuneStats* stats = nullptr);

/// Sweeps (and infills) every subcascade and keeps the Pareto-optimal union.
std::vector<FrontierPoint> tune_with_model_selection(const CascadeModel& cm,
                                                     const TuneConfig& cfg,
                                                     TuneStats* stats = nullptr);

/// Sweep plus infill on the cascade as given, sorted by expected cost.
std::vector<FrontierPoint> tune(const CascadeModel& cm, const TuneConfig& cfg,
                                TuneStats* stats = nullptr);

}  // namespace ctune
