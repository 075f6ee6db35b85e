#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctune/calibration.hpp"
#include "ctune/cascade_model.hpp"
#include "ctune/dataset.hpp"
#include "ctune/marginal.hpp"

namespace ctune {

struct SynthModelSpec {
  std::string model_id;
  MarginalModel marginal;
  TaskKind task_kind = TaskKind::kMultipleChoice;
  std::uint64_t input_tokens = 100;
  std::uint64_t output_tokens = 10;
  TokenPrice price;
};

/// Generative chain: Phi_1 from its marginal, each next confidence drawn from
/// the Gumbel conditional given the previous value.
struct SynthSpec {
  std::vector<SynthModelSpec> models;
  std::vector<double> thetas;  // adjacent pairs, size k - 1
  std::size_t n_queries = 1000;
  std::uint64_t seed = 0;

  std::size_t k() const { return models.size(); }
  void validate() const;
  PriceSheet prices() const;
};

/// Known calibrator whose inverse produces the emitted raw confidences: slope
/// 1 and an intercept one unit below logit(phi_min), so transformed values
/// stay >= 1.
Calibrator synth_calibrator(const SynthModelSpec& m);

/// n_queries x k calibrated confidences, row-major.
std::vector<std::vector<double>> sample_chain(const SynthSpec& spec);

/// Raw confidence that `cal` maps back to phi.
double invert_calibrator(const Calibrator& cal, double phi);

/// Dataset with correctness ~ Bernoulli(phi) and fixed token counts. All
/// queries are tagged as train.
AlignedDataset emit_dataset(const SynthSpec& spec);
AlignedDataset emit_dataset(const SynthSpec& spec, const std::vector<std::vector<double>>& phis);

/// Model with the spec's true marginals, adjacent Gumbel copulas, synthetic
/// calibrators and exact expected costs. Non-adjacent pairs are absent.
CascadeModel ground_truth_model(const SynthSpec& spec);


/// Built-in k-model chain (1 <= k <= 5) with per-token prices whose ratios
/// follow published small/large price gaps (up to 30x). Used by the bundled
/// data and the runtime-scaling command.
SynthSpec default_synth_spec(std::size_t k, std::size_t n_queries, std::uint64_t seed);

}  // namespace ctune
