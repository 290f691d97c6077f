#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tfln/rng.hpp"
#include "tfln/tensor.hpp"

namespace tfln {

/// Schema entry for one input column. Only real-valued columns exist; the
/// extension point for richer column kinds is this enum.
struct FeatureColumn {
  enum class Kind { kRealValued };

  std::string name;
  Kind kind = Kind::kRealValued;
  std::size_t dimension = 1;

  bool operator==(const FeatureColumn&) const = default;
};

/// In-memory dataset: an n x d feature tensor, n targets, and the schema.
/// Classifier targets are integer labels stored as doubles.
struct Dataset {
  Tensor features;
  std::vector<double> targets;
  std::vector<FeatureColumn> schema;

  std::size_t n() const { return targets.size(); }
  std::size_t dim() const { return features.cols(); }

  /// Copies the given rows into a new dataset (schema shared).
  Dataset select_rows(const std::vector<std::size_t>& rows) const;
};

/// One unit of training input as delivered by a batch stream.
struct Batch {
  Tensor features;
  std::vector<double> targets;
  std::size_t epoch = 0;
  std::size_t index_in_epoch = 0;

  bool operator==(const Batch&) const = default;
};

/// Parses an iris CSV: header line
/// `sepal_length,sepal_width,petal_length,petal_width,label`, then rows of
/// four real features and an integer label in {0,1,2}. Accepts LF or CRLF.
Dataset load_iris(const std::filesystem::path& path);

/// Same parser over an in-memory document (the bundled copy uses this).
Dataset parse_iris_csv(const std::string& text);

/// One real_valued column per feature dimension, named feature_0..feature_{d-1}.
std::vector<FeatureColumn> infer_real_valued_columns(const Tensor& features);

/// Deterministic split: Fisher-Yates over row indices with the framework
/// PRNG, last floor(n * test_fraction) shuffled rows become the test set.
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);

/// A pull-based stream of batches. next() returns nullopt when the stream is
/// exhausted; infinite streams never return nullopt.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual std::optional<Batch> next() = 0;
};

/// Cycles a dataset in mini-batches forever. The final batch of an epoch may
/// be short. With shuffling on, each epoch's order is drawn from the seeded
/// stream, so a given seed reproduces the same sequence of epochs.
class DatasetBatchIterator : public BatchSource {
 public:
  DatasetBatchIterator(Dataset dataset, std::size_t batch_size, bool shuffle_each_epoch,
                       std::uint64_t seed);

  std::optional<Batch> next() override;

 private:
  void start_epoch();

  Dataset dataset_;
  std::size_t batch_size_;
  bool shuffle_;
  RngState rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  std::size_t index_in_epoch_ = 0;
};

/// Repeats one fixed full-dataset batch forever; the full-batch fit path.
class FullBatchSource : public BatchSource {
 public:
  explicit FullBatchSource(const Dataset& dataset);
  FullBatchSource(Tensor features, std::vector<double> targets);

  std::optional<Batch> next() override;

 private:
  Batch batch_;
  std::size_t epoch_ = 0;
};

}  // namespace tfln
