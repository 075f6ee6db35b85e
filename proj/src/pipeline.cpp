#include "ctune/pipeline.hpp"

#include "ctune/error.hpp"

namespace ctune {

CascadeModel fit_cascade(const AlignedDataset& ds, const PriceSheet& prices,
                         const FitOptions& opt) {
  const std::size_t k = ds.num_models();
  if (k == 0 || ds.count(SplitTag::kTrain) == 0) {
    throw Error(ErrorCode::kEmptyInput, "no training queries");
  }
  validate_prices(prices);
  const auto costs = expected_cost_per_model(ds, prices);
  std::vector<ModelComponent> models(k);
  std::vector<std::vector<double>> phis(k);
  for (std::size_t m = 0; m < k; ++m) {
    auto& mc = models[m];
    mc.model_id = ds.model_order()[m];
    const auto it = opt.task_kinds.find(mc.model_id);
    const TaskKind kind = it == opt.task_kinds.end() ? opt.default_task_kind : it->second;
    const auto raws = ds.raw_confidences(m, SplitTag::kTrain);
    try {
      mc.calibrator = fit_calibrator(raws, ds.labels(m, SplitTag::kTrain), kind, opt.use_transform);
    } catch (const Error& e) {
      throw Error(e.code(), "calibrating " + mc.model_id + ": " + e.what());
    }
    phis[m].reserve(raws.size());
    for (double p : raws) phis[m].push_back(mc.calibrator.predict(p));
    mc.marginal = fit_marginal(phis[m], opt.marginal);
    mc.expected_cost = costs[m];
  }
  PairCopulaTable copulas;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      PairCopula pc;
      pc.n_pairs = phis[i].size();
      try {
        const auto fit = fit_theta(kendall_tau(phis[i], phis[j]));
        pc.copula = fit.copula;
        pc.tau = fit.tau;
        pc.clamped = fit.clamped;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateInput) throw;
        // A constant confidence column carries no rank information.
        pc.copula = GumbelCopula(1.0);
        pc.tau = 0.0;
        pc.clamped = true;
      }
      copulas[{i, j}] = pc;
    }
  }
  FitMetadata meta;
  meta.seed = opt.seed;
  meta.n_train = ds.count(SplitTag::kTrain);
  return CascadeModel(std::move(models), std::move(copulas), meta);
}

std::vector<double> calibrated(const AlignedDataset& ds, const CascadeModel& cm, std::size_t pos,
                               SplitTag tag) {
  const auto& cal = cm.model(pos).calibrator;
  const auto raws = ds.raw_confidences(ds.model_index(cm.model(pos).model_id), tag);
  std::vector<double> out;
  out.reserve(raws.size());
  for (double p : raws) out.push_back(cal.predict(p));
  return out;
}

FitDiagnostics fit_diagnostics(const AlignedDataset& ds, const CascadeModel& cm) {
  const SplitTag tag = ds.count(SplitTag::kTest) > 0 ? SplitTag::kTest : SplitTag::kTrain;
  FitDiagnostics d;
  std::vector<Calibrator> cals;
  for (std::size_t pos = 0; pos < cm.size(); ++pos) {
    const auto conf = calibrated(ds, cm, pos, tag);
    const auto labels = ds.labels(ds.model_index(cm.model(pos).model_id), tag);
    d.ece.push_back(ece(conf, labels).ece);
    cals.push_back(cm.model(pos).calibrator);
  }
  std::vector<std::size_t> cols;
  for (std::size_t pos = 0; pos < cm.size(); ++pos) cols.push_back(ds.model_index(cm.model(pos).model_id));
  d.tau = tau_matrix(ds.select_models(cols), cals, TauSubset::kAll, tag);
  return d;
}

}  // namespace ctune
