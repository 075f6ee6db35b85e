#include "ctune/cascade_model.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include <boost/math/special_functions/beta.hpp>

#include "ctune/error.hpp"

namespace ctune {
namespace {

constexpr std::size_t kUnconditional = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kMaxCachedTables = 4096;

struct TableKey {
  std::size_t pred;
  std::size_t cur;
  std::uint64_t a_bits;
  bool operator==(const TableKey&) const = default;
};

struct TableKeyHash {
  std::size_t operator()(const TableKey& k) const {
    std::uint64_t h = k.a_bits * 0x9e3779b97f4a7c15ULL;
    h ^= (static_cast<std::uint64_t>(k.pred) + 0x632be59bd9b4e019ULL) + (h << 6) + (h >> 2);
    h ^= (static_cast<std::uint64_t>(k.cur) + 0x85ebca6b) + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

double partial_first_moment(const MarginalModel& m, double x) {
  if (!m.has_interior() || !(m.phi_max > m.phi_min) || x <= m.phi_min) return 0.0;
  const double span = m.phi_max - m.phi_min;
  const double t = std::min(1.0, (x - m.phi_min) / span);
  // int_0^t s Beta(s; a, b) ds = a / (a + b) I_t(a + 1, b).
  auto first = [t](double a, double b) {
    return t >= 1.0 ? a / (a + b) : a / (a + b) * boost::math::ibeta(a + 1.0, b, t);
  };
  double scaled = 0.0;
  if (m.pi > 0.0) scaled += m.pi * first(m.alpha1, m.beta1);
  if (m.pi < 1.0) scaled += (1.0 - m.pi) * first(m.alpha2, m.beta2);
  return m.interior_weight() * (m.phi_min * m.mixture_cdf(t) + span * scaled);
}

double StieltjesGrid::cell_mean(std::size_t j) const {
  const double mass = cdf[j + 1] - cdf[j];
  const double mid = 0.5 * (phi[j] + phi[j + 1]);
  if (!(mass > 0.0)) return mid;
  return std::clamp((moment[j + 1] - moment[j]) / mass, phi[j], phi[j + 1]);
}

StieltjesGrid make_stieltjes_grid(const MarginalModel& m, std::size_t nodes) {
  StieltjesGrid g;
  nodes = std::max<std::size_t>(nodes, 2);
  if (m.degenerate || !(m.phi_max > m.phi_min)) {
    g.phi = {m.phi_min, m.phi_max};
    g.cdf = {m.w_min, m.w_min};
    g.moment = {0.0, 0.0};
    return g;
  }
  g.phi.resize(nodes);
  g.cdf.resize(nodes);
  g.moment.resize(nodes);
  const double span = m.phi_max - m.phi_min;
  const bool interior = m.interior_weight() > 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    // Chebyshev-clustered quantile levels: cells are finest at both ends,
    // where the copula weight changes fastest in F.
    const double s = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(j) /
                                          static_cast<double>(nodes - 1)));
    const double x = interior ? m.mixture_quantile(s) : s;
    g.phi[j] = j == 0 ? m.phi_min : (j + 1 == nodes ? m.phi_max : m.phi_min + x * span);
    g.cdf[j] = m.w_min + m.interior_weight() * (j == 0 ? 0.0 : (j + 1 == nodes ? 1.0 : m.mixture_cdf(x)));
  }
  // Keep nodes sorted even if the root finder returned equal neighbours.
  for (std::size_t j = 1; j < nodes; ++j) {
    g.phi[j] = std::max(g.phi[j], g.phi[j - 1]);
    g.cdf[j] = std::max(g.cdf[j], g.cdf[j - 1]);
  }
  for (std::size_t j = 0; j < nodes; ++j) {
    g.moment[j] = j + 1 == nodes ? partial_first_moment(m, m.phi_max) : partial_first_moment(m, g.phi[j]);
  }
  for (std::size_t j = 1; j < nodes; ++j) g.moment[j] = std::max(g.moment[j], g.moment[j - 1]);
  return g;
}

struct CascadeModel::Table {
  double fa = 1.0;
  std::vector<double> g;       // conditional CDF at grid nodes (continuous part)
  std::vector<double> suffix;  // trapezoid sums from node j to the last node
  double min_jump = 0.0;
  double max_jump = 0.0;
};

struct CascadeModel::Shared {
  std::vector<ModelComponent> models;
  std::vector<StieltjesGrid> grids;
  PairCopulaTable copulas;
  FitMetadata metadata;
  std::vector<std::string> warnings;
  GumbelCopula independence;

  std::mutex cache_mutex;
  std::unordered_map<TableKey, std::shared_ptr<const Table>, TableKeyHash> cache;
  std::atomic<std::uint64_t> evaluations{0};
};

CascadeModel::CascadeModel(std::vector<ModelComponent> models, PairCopulaTable copulas,
                           FitMetadata metadata) {
  if (models.empty()) throw Error(ErrorCode::kInvalidArgument, "cascade needs at least one model");
  auto shared = std::make_shared<Shared>();
  for (std::size_t i = 0; i + 1 < models.size(); ++i) {
    if (!copulas.count({i, i + 1})) {
      throw Error(ErrorCode::kMissingPairCopula, "no copula between " + models[i].model_id +
                                                     " and " + models[i + 1].model_id);
    }
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& mc = models[i];
    if (!(mc.expected_cost > 0.0)) {
      shared->warnings.push_back("expected cost of " + mc.model_id + " is not positive");
    }
    if (i > 0 && mc.expected_cost < models[i - 1].expected_cost) {
      shared->warnings.push_back("expected cost decreases from " + models[i - 1].model_id +
                                 " to " + mc.model_id);
    }
    shared->grids.push_back(make_stieltjes_grid(mc.marginal));
  }
  shared->models = std::move(models);
  shared->copulas = std::move(copulas);
  shared->metadata = metadata;
  std::vector<std::size_t> members(shared->models.size());
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
  shared_ = std::move(shared);
  members_ = std::move(members);
}

CascadeModel::CascadeModel(std::shared_ptr<Shared> shared, std::vector<std::size_t> members)
    : shared_(std::move(shared)), members_(std::move(members)) {}

const ModelComponent& CascadeModel::model(std::size_t pos) const {
  return shared_->models.at(members_.at(pos));
}

const StieltjesGrid& CascadeModel::grid(std::size_t pos) const {
  return shared_->grids.at(members_.at(pos));
}

const PairCopula& CascadeModel::root_pair(std::size_t i, std::size_t j) const {
  auto it = shared_->copulas.find({std::min(i, j), std::max(i, j)});
  if (it == shared_->copulas.end()) {
    throw Error(ErrorCode::kMissingPairCopula,
                "no copula between " + shared_->models.at(i).model_id + " and " +
                    shared_->models.at(j).model_id);
  }
  return it->second;
}

const PairCopula& CascadeModel::adjacent_copula(std::size_t pos) const {
  if (pos == 0 || pos >= members_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "adjacent copula needs 1 <= pos < k");
  }
  return root_pair(members_[pos - 1], members_[pos]);
}

const PairCopulaTable& CascadeModel::root_pairs() const { return shared_->copulas; }
std::size_t CascadeModel::root_size() const { return shared_->models.size(); }
const FitMetadata& CascadeModel::metadata() const { return shared_->metadata; }
const std::vector<std::string>& CascadeModel::warnings() const { return shared_->warnings; }

std::string CascadeModel::subcascade_id() const {
  std::string id;
  for (std::size_t pos = 0; pos < members_.size(); ++pos) {
    if (pos) id += '>';
    id += model(pos).model_id;
  }
  return id;
}

CascadeModel CascadeModel::subcascade(std::vector<std::size_t> positions) const {
  if (positions.empty()) throw Error(ErrorCode::kInvalidArgument, "empty subcascade");
  std::vector<std::size_t> members;
  for (std::size_t pos : positions) {
    members.push_back(members_.at(pos));
    if (members.size() > 1 && members[members.size() - 2] >= members.back()) {
      throw Error(ErrorCode::kInvalidArgument, "subcascade must preserve cascade order");
    }
  }
  CascadeModel sub(shared_, std::move(members));
  for (std::size_t pos = 1; pos < sub.size(); ++pos) sub.adjacent_copula(pos);
  return sub;
}

std::vector<CascadeModel> CascadeModel::subcascades() const {
  const std::size_t k = members_.size();
  if (k >= 63) throw Error(ErrorCode::kInvalidArgument, "cascade too long to enumerate");
  std::vector<CascadeModel> out;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << k); ++mask) {
    std::vector<std::size_t> positions;
    for (std::size_t pos = 0; pos < k; ++pos) {
      if (mask & (std::uint64_t{1} << pos)) positions.push_back(pos);
    }
    out.push_back(subcascade(std::move(positions)));
  }
  return out;
}

double CascadeModel::conditional_event_prob(std::size_t pos, double a, double b) const {
  const double fb = marginal(pos).cdf(b);
  if (pos == 0) return fb;
  const double fa = marginal(pos - 1).cdf(a);
  return ctune::conditional_event_prob(adjacent_copula(pos).copula, fa, fb);
}

std::shared_ptr<const CascadeModel::Table> CascadeModel::table(std::size_t pos, double a) const {
  const std::size_t cur = members_.at(pos);
  const std::size_t pred = pos == 0 ? kUnconditional : members_[pos - 1];
  const TableKey key{pred, cur, pos == 0 ? 0 : std::bit_cast<std::uint64_t>(a)};
  {
    std::lock_guard lock(shared_->cache_mutex);
    auto it = shared_->cache.find(key);
    if (it != shared_->cache.end()) return it->second;
  }
  auto t = std::make_shared<Table>();
  const GumbelCopula* copula = &shared_->independence;
  if (pos > 0) {
    t->fa = shared_->models[pred].marginal.cdf(a);
    if (!(t->fa > 0.0)) {
      throw Error(ErrorCode::kConditioningOnNullEvent,
                  "P(Phi <= a) is zero for " + shared_->models[pred].model_id);
    }
    copula = &root_pair(pred, cur).copula;
  }
  const auto& grid = shared_->grids[cur];
  const std::size_t n = grid.phi.size();
  t->g.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    t->g[j] = pos == 0 ? grid.cdf[j] : std::min(1.0, copula->cdf(t->fa, grid.cdf[j]) / t->fa);
  }
  t->suffix.assign(n, 0.0);
  for (std::size_t j = n - 1; j-- > 0;) {
    t->suffix[j] = t->suffix[j + 1] + grid.cell_mean(j) * (t->g[j + 1] - t->g[j]);
  }
  t->min_jump = grid.phi.front() * t->g.front();
  t->max_jump = grid.phi.back() * (1.0 - t->g.back());
  std::lock_guard lock(shared_->cache_mutex);
  if (shared_->cache.size() >= kMaxCachedTables) shared_->cache.clear();
  shared_->cache.emplace(key, t);
  return t;
}

double CascadeModel::conditional_correctness_integral(std::size_t pos, double a, double b) const {
  const auto t = table(pos, a);
  const auto& grid = this->grid(pos);
  if (b >= grid.phi.back()) return 0.0;
  if (b < grid.phi.front()) return t->min_jump + t->suffix.front() + t->max_jump;
  // Segment [phi_j, phi_{j+1}) containing b.
  const auto it = std::upper_bound(grid.phi.begin(), grid.phi.end(), b);
  const auto j1 = static_cast<std::size_t>(it - grid.phi.begin());
  double gb = marginal(pos).cdf(b);
  if (pos > 0) gb = std::min(1.0, adjacent_copula(pos).copula.cdf(t->fa, gb) / t->fa);
  gb = std::min(gb, t->g[j1]);
  // Centroid of the continuous mass in [b, phi_{j1}].
  const auto& m = marginal(pos);
  const double fb_cont = std::max(m.cdf(b), grid.cdf[j1 - 1]);
  const double mass = grid.cdf[j1] - fb_cont;
  double centroid = 0.5 * (b + grid.phi[j1]);
  if (mass > 0.0) {
    centroid = std::clamp((grid.moment[j1] - partial_first_moment(m, b)) / mass, b, grid.phi[j1]);
  }
  const double partial = centroid * (t->g[j1] - gb);
  return partial + t->suffix[j1] + t->max_jump;
}

OperatingPoint CascadeModel::evaluate(const ThresholdVector& t) const {
  const std::size_t k = size();
  if (t.phi.size() + 1 != k) {
    throw Error(ErrorCode::kInvalidThreshold, "expected " + std::to_string(k - 1) +
                                                  " thresholds, got " +
                                                  std::to_string(t.phi.size()));
  }
  shared_->evaluations.fetch_add(1, std::memory_order_relaxed);
  constexpr double kLast = -std::numeric_limits<double>::infinity();
  auto threshold = [&](std::size_t pos) { return pos + 1 < k ? t.phi[pos] : kLast; };

  double cum_cost = expected_cost(0);
  double cum_transition = 1.0;
  double p_correct = 0.0, cost = 0.0;

  const double phi0 = threshold(0);
  const double defer0 = conditional_event_prob(0, 0.0, phi0);
  p_correct += conditional_correctness_integral(0, 0.0, phi0);
  cost += (1.0 - defer0) * cum_cost;
  cum_transition *= defer0;

  for (std::size_t pos = 1; pos < k; ++pos) {
    cum_cost += expected_cost(pos);
    // Every later term carries this factor; a null event contributes nothing.
    if (cum_transition == 0.0) break;
    const double a = threshold(pos - 1), b = threshold(pos);
    const double defer = pos + 1 < k ? conditional_event_prob(pos, a, b) : 0.0;
    p_correct += cum_transition * conditional_correctness_integral(pos, a, b);
    cost += cum_transition * (1.0 - defer) * cum_cost;
    cum_transition *= defer;
  }
  return {p_correct, cost};
}

std::uint64_t CascadeModel::evaluation_count() const { return shared_->evaluations.load(); }

bool CascadeModel::is_interior(const ThresholdVector& t) const {
  if (t.phi.size() + 1 != size()) return false;
  for (std::size_t pos = 0; pos < t.phi.size(); ++pos) {
    const auto& m = marginal(pos);
    if (!(t.phi[pos] > m.phi_min && t.phi[pos] < m.phi_max)) return false;
  }
  return true;
}

}  // namespace ctune
