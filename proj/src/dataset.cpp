#include "ctune/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ctune/error.hpp"
#include "ctune/random.hpp"

namespace ctune {
namespace {

constexpr const char* kHeader =
    "query_id,model_id,raw_confidence,correct,input_tokens,output_tokens";

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kMalformedRecord,
              "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_confidence(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    malformed(line, "raw_confidence '" + s + "' is not a number");
  }
  if (used != s.size()) malformed(line, "raw_confidence '" + s + "' is not a number");
  return v;
}

std::uint64_t parse_count(const std::string& s, const char* column, std::size_t line) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    malformed(line, std::string(column) + " '" + s + "' is not a nonnegative integer");
  }
  return v;
}

bool parse_label(const std::string& s, std::size_t line) {
  if (s == "0") return false;
  if (s == "1") return true;
  malformed(line, "correct must be 0 or 1, got '" + s + "'");
}

void check_confidence(double v, std::size_t line) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::kBadConfidence, "line " + std::to_string(line) +
                                               ": raw_confidence " + std::to_string(v) +
                                               " outside [0,1]");
  }
}

std::vector<QueryRecord> read_csv(std::istream& in) {
  std::vector<QueryRecord> records;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) malformed(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) malformed(1, std::string("header must be '") + kHeader + "'");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 6) {
      malformed(line_no, "expected 6 fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) malformed(line_no, "empty query_id or model_id");
    QueryRecord r;
    r.query_id = f[0];
    r.model_id = f[1];
    r.raw_confidence = parse_confidence(f[2], line_no);
    check_confidence(r.raw_confidence, line_no);
    r.correct = parse_label(f[3], line_no);
    r.input_tokens = parse_count(f[4], "input_tokens", line_no);
    r.output_tokens = parse_count(f[5], "output_tokens", line_no);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<QueryRecord> read_jsonl(std::istream& in) {
  std::vector<QueryRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      malformed(line_no, e.what());
    }
    QueryRecord r;
    try {
      r.query_id = j.at("query_id").get<std::string>();
      r.model_id = j.at("model_id").get<std::string>();
      r.raw_confidence = j.at("raw_confidence").get<double>();
      const auto& c = j.at("correct");
      if (c.is_boolean()) {
        r.correct = c.get<bool>();
      } else {
        const auto v = c.get<std::int64_t>();
        if (v != 0 && v != 1) malformed(line_no, "correct must be 0 or 1");
        r.correct = v == 1;
      }
      const auto in_tok = j.at("input_tokens").get<std::int64_t>();
      const auto out_tok = j.at("output_tokens").get<std::int64_t>();
      if (in_tok < 0 || out_tok < 0) malformed(line_no, "negative token count");
      r.input_tokens = static_cast<std::uint64_t>(in_tok);
      r.output_tokens = static_cast<std::uint64_t>(out_tok);
    } catch (const nlohmann::json::exception& e) {
      malformed(line_no, e.what());
    }
    check_confidence(r.raw_confidence, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

AlignedDataset AlignedDataset::from_records(std::vector<QueryRecord> records,
                                            std::vector<std::string> model_order) {
  AlignedDataset ds;
  std::unordered_map<std::string, std::size_t> model_pos;
  if (model_order.empty()) {
    for (const auto& r : records) {
      if (model_pos.emplace(r.model_id, model_order.size()).second) {
        model_order.push_back(r.model_id);
      }
    }
  } else {
    for (std::size_t i = 0; i < model_order.size(); ++i) {
      if (!model_pos.emplace(model_order[i], i).second) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate model in order: " + model_order[i]);
      }
    }
  }
  std::unordered_map<std::string, std::size_t> query_pos;
  for (const auto& r : records) {
    if (query_pos.emplace(r.query_id, ds.queries_.size()).second) {
      ds.queries_.push_back(r.query_id);
    }
  }
  const std::size_t k = model_order.size();
  std::vector<QueryRecord> table(ds.queries_.size() * k);
  std::vector<char> filled(table.size(), 0);
  for (auto& r : records) {
    auto mit = model_pos.find(r.model_id);
    if (mit == model_pos.end()) continue;  // models outside the cascade are ignored
    const std::size_t cell = query_pos.at(r.query_id) * k + mit->second;
    if (filled[cell]) {
      throw Error(ErrorCode::kMalformedRecord,
                  "duplicate record (" + r.query_id + ", " + r.model_id + ")");
    }
    filled[cell] = 1;
    table[cell] = std::move(r);
  }
  std::string missing;
  std::size_t n_missing = 0;
  for (std::size_t q = 0; q < ds.queries_.size(); ++q) {
    for (std::size_t m = 0; m < k; ++m) {
      if (filled[q * k + m]) continue;
      if (n_missing++ < 20) {
        missing += (missing.empty() ? "" : ", ");
        missing += "(" + ds.queries_[q] + ", " + model_order[m] + ")";
      }
    }
  }
  if (n_missing > 0) {
    throw Error(ErrorCode::kNonRectangular,
                std::to_string(n_missing) + " missing cell(s): " + missing);
  }
  ds.model_order_ = std::move(model_order);
  ds.table_ = std::move(table);
  ds.split_.assign(ds.queries_.size(), SplitTag::kTrain);
  return ds;
}

std::size_t AlignedDataset::model_index(const std::string& model_id) const {
  auto it = std::find(model_order_.begin(), model_order_.end(), model_id);
  if (it == model_order_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown model " + model_id);
  }
  return static_cast<std::size_t>(it - model_order_.begin());
}

std::vector<std::size_t> AlignedDataset::indices(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < split_.size(); ++q) {
    if (split_[q] == tag) out.push_back(q);
  }
  return out;
}

std::size_t AlignedDataset::count(SplitTag tag) const {
  return static_cast<std::size_t>(std::count(split_.begin(), split_.end(), tag));
}

AlignedDataset AlignedDataset::with_split(std::vector<SplitTag> tags) const {
  if (tags.size() != queries_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "split tag count does not match query count");
  }
  AlignedDataset out = *this;
  out.split_ = std::move(tags);
  return out;
}

AlignedDataset AlignedDataset::select(const std::vector<std::size_t>& query_indices) const {
  AlignedDataset out;
  out.model_order_ = model_order_;
  const std::size_t k = model_order_.size();
  out.queries_.reserve(query_indices.size());
  out.table_.reserve(query_indices.size() * k);
  for (std::size_t q : query_indices) {
    out.queries_.push_back(queries_.at(q));
    out.split_.push_back(split_[q]);
    for (std::size_t m = 0; m < k; ++m) out.table_.push_back(table_[q * k + m]);
  }
  return out;
}

AlignedDataset AlignedDataset::select_models(const std::vector<std::size_t>& model_indices) const {
  AlignedDataset out;
  const std::size_t k = model_order_.size();
  for (std::size_t m : model_indices) out.model_order_.push_back(model_order_.at(m));
  out.queries_ = queries_;
  out.split_ = split_;
  for (std::size_t q = 0; q < queries_.size(); ++q) {
    for (std::size_t m : model_indices) out.table_.push_back(table_[q * k + m]);
  }
  return out;
}

std::vector<double> AlignedDataset::raw_confidences(std::size_t model, SplitTag tag) const {
  std::vector<double> out;
  for (std::size_t q = 0; q < queries_.size(); ++q) {
    if (split_[q] == tag) out.push_back(record(q, model).raw_confidence);
  }
  return out;
}

std::vector<bool> AlignedDataset::labels(std::size_t model, SplitTag tag) const {
  std::vector<bool> out;
  for (std::size_t q = 0; q < queries_.size(); ++q) {
    if (split_[q] == tag) out.push_back(record(q, model).correct);
  }
  return out;
}

AlignedDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());
  auto records = format == DatasetFormat::kCsv ? read_csv(in) : read_jsonl(in);
  return AlignedDataset::from_records(std::move(records));
}

AlignedDataset load_dataset(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  const auto format =
      (ext == ".jsonl" || ext == ".json") ? DatasetFormat::kJsonl : DatasetFormat::kCsv;
  return load_dataset(path, format);
}

std::string to_csv(const AlignedDataset& ds) {
  std::string out = kHeader;
  out += '\n';
  char buf[64];
  for (std::size_t q = 0; q < ds.num_queries(); ++q) {
    for (std::size_t m = 0; m < ds.num_models(); ++m) {
      const auto& r = ds.record(q, m);
      std::snprintf(buf, sizeof buf, "%.17g", r.raw_confidence);
      out += r.query_id + ',' + r.model_id + ',' + buf + ',' + (r.correct ? '1' : '0') + ',' +
             std::to_string(r.input_tokens) + ',' + std::to_string(r.output_tokens) + '\n';
    }
  }
  return out;
}

void write_dataset(const AlignedDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << to_csv(ds);
}

AlignedDataset split(const AlignedDataset& ds, std::size_t n_train, std::uint64_t seed) {
  const std::size_t n = ds.num_queries();
  if (n_train >= n) {
    throw Error(ErrorCode::kNTrainTooLarge, "n_train=" + std::to_string(n_train) +
                                                " must be below query count " +
                                                std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed);
  // Explicit Fisher-Yates: std::shuffle's draw sequence is implementation-defined.
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<SplitTag> tags(n, SplitTag::kTest);
  for (std::size_t i = 0; i < n_train; ++i) tags[order[i]] = SplitTag::kTrain;
  return ds.with_split(std::move(tags));
}

AlignedDataset balanced_subsample(const AlignedDataset& ds, std::size_t target_n,
                                  std::uint64_t seed) {
  const auto train = ds.indices(SplitTag::kTrain);
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "dataset has no train split");
  if (target_n < 2) throw Error(ErrorCode::kInvalidArgument, "target_n must be at least 2");
  const std::size_t k = ds.num_models();
  std::vector<std::vector<std::size_t>> correct(k), incorrect(k);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t q : train) (ds.record(q, m).correct ? correct : incorrect)[m].push_back(q);
    if (incorrect[m].empty()) {
      throw Error(ErrorCode::kNoIncorrectExamples, "model " + ds.model_order()[m] +
                                                       " has no incorrect train example");
    }
    if (correct[m].empty()) {
      throw Error(ErrorCode::kSingleClassTrainingSet,
                  "model " + ds.model_order()[m] + " has no correct train example");
    }
  }
  auto rng = make_rng(seed);
  auto draw = [&rng](const std::vector<std::size_t>& pool) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
  };
  std::set<std::size_t> chosen;
  // Stop once no further pair can fit, or after a bounded number of draws when
  // pools are too small to reach the target.
  const std::size_t max_draws = 50 * target_n + 100;
  for (std::size_t d = 0; d < max_draws && chosen.size() + 1 < target_n; ++d) {
    const std::size_t m = d % k;
    const std::size_t a = draw(correct[m]);
    const std::size_t b = draw(incorrect[m]);
    const std::size_t fresh = (chosen.count(a) ? 0 : 1) + (chosen.count(b) ? 0 : 1);
    if (chosen.size() + fresh > target_n) continue;
    chosen.insert(a);
    chosen.insert(b);
  }
  std::vector<std::size_t> keep;
  for (std::size_t q = 0; q < ds.num_queries(); ++q) {
    if (chosen.count(q)) {
      keep.push_back(q);
    } else if (ds.split_tags()[q] == SplitTag::kTest) {
      keep.push_back(q);
    }
  }
  return ds.select(keep);
}

void validate_prices(const PriceSheet& prices) {
  for (const auto& [model, p] : prices) {
    if (!(p.gamma_in > 0.0) || !(p.gamma_out > 0.0) || !std::isfinite(p.gamma_in) ||
        !std::isfinite(p.gamma_out)) {
      throw Error(ErrorCode::kInvalidArgument, "prices for " + model + " must be positive");
    }
  }
}

std::vector<double> expected_cost_per_model(const AlignedDataset& ds, const PriceSheet& prices) {
  const auto train = ds.indices(SplitTag::kTrain);
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "dataset has no train split");
  std::vector<double> out;
  for (std::size_t m = 0; m < ds.num_models(); ++m) {
    auto it = prices.find(ds.model_order()[m]);
    if (it == prices.end()) {
      throw Error(ErrorCode::kMissingPrice, "no price for model " + ds.model_order()[m]);
    }
    double in_sum = 0.0, out_sum = 0.0;
    for (std::size_t q : train) {
      in_sum += static_cast<double>(ds.record(q, m).input_tokens);
      out_sum += static_cast<double>(ds.record(q, m).output_tokens);
    }
    const double n = static_cast<double>(train.size());
    out.push_back(it->second.gamma_in * in_sum / n + it->second.gamma_out * out_sum / n);
  }
  return out;
}

}  // namespace ctune
