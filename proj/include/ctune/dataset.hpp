#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ctune {

struct QueryRecord {
  std::string query_id;
  std::string model_id;
  double raw_confidence = 0.0;
  bool correct = false;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
};

enum class SplitTag { kTrain, kTest };

enum class DatasetFormat { kCsv, kJsonl };

/// Rectangular (query x model) table of logged observations.
///
/// `model_order` is the cascade order, smallest model first. Every query has
/// exactly one record per model; `record(q, m)` indexes by position in
/// `queries()` and `model_order()`.
class AlignedDataset {
 public:
  AlignedDataset() = default;

  /// Builds from loose records; enforces rectangularity and uniqueness.
  /// `model_order` may be empty, in which case first-appearance order is used.
  static AlignedDataset from_records(std::vector<QueryRecord> records,
                                     std::vector<std::string> model_order = {});

  std::size_t num_queries() const { return queries_.size(); }
  std::size_t num_models() const { return model_order_.size(); }
  const std::vector<std::string>& model_order() const { return model_order_; }
  const std::vector<std::string>& queries() const { return queries_; }
  const std::vector<SplitTag>& split_tags() const { return split_; }

  const QueryRecord& record(std::size_t query, std::size_t model) const {
    return table_[query * model_order_.size() + model];
  }
  std::size_t model_index(const std::string& model_id) const;

  std::vector<std::size_t> indices(SplitTag tag) const;
  std::size_t count(SplitTag tag) const;

  /// Copy with a new split assignment (one tag per query).
  AlignedDataset with_split(std::vector<SplitTag> tags) const;
  /// Copy restricted to the given queries (in the given order), preserving tags.
  AlignedDataset select(const std::vector<std::size_t>& query_indices) const;
  /// Copy restricted to a subset of models (positions into model_order).
  AlignedDataset select_models(const std::vector<std::size_t>& model_indices) const;

  /// Column of raw confidences / labels for one model on one split.
  std::vector<double> raw_confidences(std::size_t model, SplitTag tag) const;
  std::vector<bool> labels(std::size_t model, SplitTag tag) const;

 private:
  std::vector<std::string> model_order_;
  std::vector<std::string> queries_;
  std::vector<QueryRecord> table_;
  std::vector<SplitTag> split_;
};

struct TokenPrice {
  double gamma_in = 0.0;
  double gamma_out = 0.0;
};

using PriceSheet = std::map<std::string, TokenPrice>;

AlignedDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
AlignedDataset load_dataset(const std::filesystem::path& path);  // by extension

/// Canonical CSV: fixed header and column order, queries in table order,
/// models in cascade order, confidences printed with round-trip precision.
std::string to_csv(const AlignedDataset& ds);
void write_dataset(const AlignedDataset& ds, const std::filesystem::path& path);

AlignedDataset split(const AlignedDataset& ds, std::size_t n_train, std::uint64_t seed);

/// Low-sample training split built from (correct, incorrect) pairs per model.
///
/// Models are visited round-robin; each visit draws one train query the model
/// answered correctly and one it answered incorrectly. Duplicates collapse, so
/// the result has between 2/3 of `target_n` and `target_n` queries. Queries not
/// selected become test queries only if they were test queries before; the
/// rest of the old train split is dropped.
AlignedDataset balanced_subsample(const AlignedDataset& ds, std::size_t target_n,
                                  std::uint64_t seed);

void validate_prices(const PriceSheet& prices);

/// Mean per-query cost of each model on the train split, in cascade order.
std::vector<double> expected_cost_per_model(const AlignedDataset& ds,
                                            const PriceSheet& prices);

/// Actual cost of one record.
inline double record_cost(const QueryRecord& r, const TokenPrice& p) {
  return p.gamma_in * static_cast<double>(r.input_tokens) +
         p.gamma_out * static_cast<double>(r.output_tokens);
}

}  // namespace ctune
