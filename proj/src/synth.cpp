#include "ctune/synth.hpp"

#include <cmath>
#include <limits>

#include "ctune/copula.hpp"
#include "ctune/error.hpp"
#include "ctune/parallel.hpp"
#include "ctune/random.hpp"

namespace ctune {
namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

void SynthSpec::validate() const {
  if (models.empty()) throw Error(ErrorCode::kInvalidArgument, "synthetic spec needs a model");
  if (thetas.size() + 1 != models.size()) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic spec needs k - 1 thetas");
  }
  for (double t : thetas) {
    if (!(t >= 1.0) || !std::isfinite(t)) throw Error(ErrorCode::kInvalidArgument, "theta must be >= 1");
  }
  for (const auto& m : models) {
    const auto& g = m.marginal;
    if (!(g.phi_min > 0.0) || !(g.phi_max <= 1.0) || !(g.phi_min <= g.phi_max) ||
        g.w_min < 0.0 || g.w_max < 0.0 || g.w_min + g.w_max > 1.0 + 1e-12) {
      throw Error(ErrorCode::kInvalidArgument, "invalid marginal for " + m.model_id);
    }
  }
}

PriceSheet SynthSpec::prices() const {
  PriceSheet p;
  for (const auto& m : models) p[m.model_id] = m.price;
  return p;
}

Calibrator synth_calibrator(const SynthModelSpec& m) {
  Calibrator c;
  c.task_kind = m.task_kind;
  c.slope = 1.0;
  c.intercept = logit(m.marginal.phi_min) - 1.0;
  c.xi_min = 1.0;
  c.xi_max = m.marginal.phi_max < 1.0 ? logit(m.marginal.phi_max) - c.intercept
                                      : std::numeric_limits<double>::max();
  return c;
}

double invert_calibrator(const Calibrator& cal, double phi) {
  if (phi >= 1.0) return 1.0;
  const double feature = (logit(phi) - cal.intercept) / cal.slope;
  if (!cal.use_transform) return feature;
  // Both transforms coincide with -log(1 - p) on p >= 1/2.
  if (cal.task_kind == TaskKind::kGeneration && feature < std::log(2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "transformed value below log 2 has no p >= 1/2 preimage");
  }
  if (!(feature >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative transformed value");
  return -std::expm1(-feature);
}

std::vector<std::vector<double>> sample_chain(const SynthSpec& spec) {
  spec.validate();
  const std::size_t k = spec.k();
  std::vector<GumbelCopula> copulas;
  for (double t : spec.thetas) copulas.emplace_back(t);
  std::vector<std::vector<double>> out(spec.n_queries, std::vector<double>(k));
  parallel_for(spec.n_queries, [&](std::size_t q) {
    auto rng = make_rng(spec.seed, q);
    auto& row = out[q];
    row[0] = spec.models[0].marginal.quantile(uniform_open(rng));
    for (std::size_t i = 1; i < k; ++i) {
      const auto& prev = spec.models[i - 1].marginal;
      const double lo = prev.cdf_left(row[i - 1]), hi = prev.cdf(row[i - 1]);
      // Randomized probability integral transform across an atom.
      const double u = hi > lo ? lo + (hi - lo) * uniform_open(rng) : hi;
      const double v = copulas[i - 1].conditional_quantile_given_u(u, uniform_open(rng), 1e-10);
      row[i] = spec.models[i].marginal.quantile(std::clamp(v, 1e-300, 1.0));
    }
  });
  return out;
}

AlignedDataset emit_dataset(const SynthSpec& spec, const std::vector<std::vector<double>>& phis) {
  spec.validate();
  const std::size_t k = spec.k();
  std::vector<Calibrator> cals;
  std::vector<std::string> order;
  for (const auto& m : spec.models) {
    cals.push_back(synth_calibrator(m));
    order.push_back(m.model_id);
  }
  std::vector<QueryRecord> records(phis.size() * k);
  // Correctness draws use their own stream so they do not shift the chain.
  parallel_for(phis.size(), [&](std::size_t q) {
    auto rng = make_rng(mix_seed(spec.seed, 0x636f7272656374ULL), q);
    for (std::size_t i = 0; i < k; ++i) {
      auto& r = records[q * k + i];
      r.query_id = "q" + std::to_string(q);
      r.model_id = spec.models[i].model_id;
      r.raw_confidence = invert_calibrator(cals[i], phis[q][i]);
      r.correct = uniform_open(rng) < phis[q][i];
      r.input_tokens = spec.models[i].input_tokens;
      r.output_tokens = spec.models[i].output_tokens;
    }
  });
  return AlignedDataset::from_records(std::move(records), order);
}

AlignedDataset emit_dataset(const SynthSpec& spec) { return emit_dataset(spec, sample_chain(spec)); }

CascadeModel ground_truth_model(const SynthSpec& spec) {
  spec.validate();
  std::vector<ModelComponent> models;
  for (const auto& m : spec.models) {
    ModelComponent c;
    c.model_id = m.model_id;
    c.calibrator = synth_calibrator(m);
    c.marginal = m.marginal;
    c.expected_cost = m.price.gamma_in * static_cast<double>(m.input_tokens) +
                      m.price.gamma_out * static_cast<double>(m.output_tokens);
    models.push_back(std::move(c));
  }
  PairCopulaTable copulas;
  for (std::size_t i = 0; i < spec.thetas.size(); ++i) {
    PairCopula pc;
    pc.copula = GumbelCopula(spec.thetas[i]);
    pc.tau = pc.copula.tau();
    copulas[{i, i + 1}] = pc;
  }
  FitMetadata meta;
  meta.seed = spec.seed;
  return CascadeModel(std::move(models), std::move(copulas), meta);
}


SynthSpec default_synth_spec(std::size_t k, std::size_t n_queries, std::uint64_t seed) {
  struct Row {
    const char* id;
    double phi_min, phi_max, w_min, w_max, pi, a1, b1, a2, b2, usd_per_mtok;
    std::uint64_t in, out;
  };
  static const Row rows[] = {
      {"tiny", 0.15, 0.97, 0.02, 0.03, 0.5, 2.0, 4.0, 6.0, 2.0, 0.10, 300, 6},
      {"small", 0.20, 0.98, 0.02, 0.04, 0.5, 2.0, 3.0, 7.0, 2.0, 0.15, 300, 6},
      {"medium", 0.25, 0.985, 0.02, 0.05, 0.45, 2.0, 3.0, 8.0, 2.0, 0.20, 300, 6},
      {"large", 0.30, 0.99, 0.01, 0.08, 0.4, 2.0, 2.0, 9.0, 2.0, 0.90, 300, 6},
      {"xlarge", 0.35, 0.995, 0.01, 0.10, 0.35, 2.0, 2.0, 10.0, 2.0, 3.00, 300, 6},
  };
  // Spread shorter cascades over the size range.
  static const std::vector<std::vector<std::size_t>> pick = {
      {4}, {0, 4}, {0, 2, 4}, {0, 2, 3, 4}, {0, 1, 2, 3, 4}};
  if (k < 1 || k > 5) throw Error(ErrorCode::kInvalidArgument, "built-in spec supports 1 <= k <= 5");
  SynthSpec spec;
  for (std::size_t idx : pick[k - 1]) {
    const Row& r = rows[idx];
    SynthModelSpec m;
    m.model_id = r.id;
    m.marginal = MarginalModel{r.phi_min, r.phi_max, r.w_min, r.w_max, r.pi, r.a1, r.b1, r.a2, r.b2};
    m.input_tokens = r.in;
    m.output_tokens = r.out;
    m.price = TokenPrice{r.usd_per_mtok * 1e-6, r.usd_per_mtok * 1e-6};
    spec.models.push_back(m);
  }
  spec.thetas.assign(k - 1, 1.8);
  spec.n_queries = n_queries;
  spec.seed = seed;
  return spec;
}

}  // namespace ctune
