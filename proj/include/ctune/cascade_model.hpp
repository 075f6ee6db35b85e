#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ctune/calibration.hpp"
#include "ctune/copula.hpp"
#include "ctune/marginal.hpp"

namespace ctune {

/// Deferral thresholds phi_1..phi_{k-1}; model i answers iff its calibrated
/// confidence exceeds phi_i. The last model has no threshold.
struct ThresholdVector {
  std::vector<double> phi;
};

struct OperatingPoint {
  double p_correct = 0.0;
  double expected_cost = 0.0;
};

struct PairCopula {
  GumbelCopula copula;
  double tau = 0.0;
  bool clamped = false;
  std::size_t n_pairs = 0;
};

struct ModelComponent {
  std::string model_id;
  Calibrator calibrator;
  MarginalModel marginal;
  double expected_cost = 0.0;
};

struct FitMetadata {
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
};

/// Quantile-spaced integration nodes over a marginal's support. Node 0 sits at
/// phi_min and the last node at phi_max; `cdf` holds the continuous part of
/// F at each node (right limit at phi_min, left limit at phi_max) and `moment`
/// the partial first moment of that continuous part, so each cell's
/// representative value is its exact centroid rather than the midpoint.
struct StieltjesGrid {
  std::vector<double> phi;
  std::vector<double> cdf;
  std::vector<double> moment;

  /// Mean of phi over the continuous mass in [phi[j], phi[j+1]].
  double cell_mean(std::size_t j) const;
};

/// Integral of phi against the continuous part of the marginal on [phi_min, x].
double partial_first_moment(const MarginalModel& m, double x);

StieltjesGrid make_stieltjes_grid(const MarginalModel& m, std::size_t nodes = 512);

/// Copulas keyed by (i, j), i < j, over the positions of the full cascade.
using PairCopulaTable = std::map<std::pair<std::size_t, std::size_t>, PairCopula>;

/// Markov-copula model of a cascade's calibrated confidences.
///
/// Positions are 0-based: model 0 is the cheapest. A subcascade shares the
/// components, copulas, integration grids and memo tables of its parent and
/// differs only in its member list.
class CascadeModel {
 public:
  CascadeModel(std::vector<ModelComponent> models, PairCopulaTable copulas,
               FitMetadata metadata = {});

  std::size_t size() const { return members_.size(); }
  const ModelComponent& model(std::size_t pos) const;
  const MarginalModel& marginal(std::size_t pos) const { return model(pos).marginal; }
  double expected_cost(std::size_t pos) const { return model(pos).expected_cost; }
  const StieltjesGrid& grid(std::size_t pos) const;
  /// Copula between positions pos-1 and pos of this (sub)cascade.
  const PairCopula& adjacent_copula(std::size_t pos) const;
  /// Copula between two positions of the full cascade.
  const PairCopula& root_pair(std::size_t i, std::size_t j) const;
  const PairCopulaTable& root_pairs() const;
  std::size_t root_size() const;

  /// Positions of this cascade's models inside the full cascade.
  const std::vector<std::size_t>& members() const { return members_; }
  /// Member model ids joined by '>'.
  std::string subcascade_id() const;
  const FitMetadata& metadata() const;
  /// Non-fatal findings made at assembly (for example non-monotone costs).
  const std::vector<std::string>& warnings() const;

  /// All 2^k - 1 nonempty order-preserving subcascades of this cascade.
  std::vector<CascadeModel> subcascades() const;
  CascadeModel subcascade(std::vector<std::size_t> positions) const;

  /// P(Phi_pos <= b | Phi_{pos-1} <= a); for pos 0 the unconditional F_0(b).
  double conditional_event_prob(std::size_t pos, double a, double b) const;

  /// Integral of phi over {phi > b} against the law of Phi_pos conditional on
  /// {Phi_{pos-1} <= a}; for pos 0 the conditioning is dropped and `a` ignored.
  /// b = -infinity integrates over the whole support.
  double conditional_correctness_integral(std::size_t pos, double a, double b) const;

  /// Probability of correctness and expected cost of the cascade under the
  /// given thresholds, accumulated in one pass over the models.
  OperatingPoint evaluate(const ThresholdVector& t) const;

  /// Number of evaluate() calls made so far on this model family.
  std::uint64_t evaluation_count() const;

  /// True when every threshold lies strictly inside its marginal's support.
  bool is_interior(const ThresholdVector& t) const;

 private:
  struct Shared;
  struct Table;

  CascadeModel(std::shared_ptr<Shared> shared, std::vector<std::size_t> members);
  std::shared_ptr<const Table> table(std::size_t pos, double a) const;

  std::shared_ptr<Shared> shared_;
  std::vector<std::size_t> members_;
};

}  // namespace ctune
