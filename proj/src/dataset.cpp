#include "tfln/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tfln/error.hpp"

namespace tfln {

namespace {

constexpr const char* kIrisHeader =
    "sepal_length,sepal_width,petal_length,petal_width,label";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& field, std::size_t line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": '" + field +
                     "' is not a number");
  }
  return value;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.schema = schema;
  out.targets.reserve(rows.size());
  if (!rows.empty()) {
    out.features = Tensor(rows.size(), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= n()) {
        throw ValidationError("select_rows: row " + std::to_string(rows[i]) +
                              " outside dataset of " + std::to_string(n()) + " rows");
      }
      for (std::size_t j = 0; j < features.cols(); ++j) {
        out.features(i, j) = features(rows[i], j);
      }
      out.targets.push_back(targets[rows[i]]);
    }
  }
  return out;
}

Dataset parse_iris_csv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("iris csv: empty document");
  }
  if (strip_cr(line) != kIrisHeader) {
    throw ParseError("line 1: expected header '" + std::string(kIrisHeader) + "'");
  }

  std::vector<double> feature_values;
  std::vector<double> targets;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 5) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                       std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < 4; ++j) {
      feature_values.push_back(parse_double(fields[j], line_no));
    }
    const double label = parse_double(fields[4], line_no);
    if (label != 0.0 && label != 1.0 && label != 2.0) {
      throw ParseError("line " + std::to_string(line_no) + ": label '" + fields[4] +
                       "' outside {0,1,2}");
    }
    targets.push_back(label);
  }
  if (targets.empty()) {
    throw ParseError("iris csv: no data rows");
  }

  Dataset ds;
  ds.features = Tensor(targets.size(), 4, std::move(feature_values));
  ds.targets = std::move(targets);
  ds.schema = infer_real_valued_columns(ds.features);
  return ds;
}

Dataset load_iris(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open iris csv: " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_iris_csv(buffer.str());
}

std::vector<FeatureColumn> infer_real_valued_columns(const Tensor& features) {
  if (features.cols() == 0) {
    throw ValidationError("infer_real_valued_columns: features have no columns");
  }
  std::vector<FeatureColumn> columns;
  columns.reserve(features.cols());
  for (std::size_t j = 0; j < features.cols(); ++j) {
    columns.push_back({"feature_" + std::to_string(j), FeatureColumn::Kind::kRealValued, 1});
  }
  return columns;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction >= 0.0) || test_fraction >= 1.0) {
    throw ValidationError("train_test_split: test_fraction must be in [0, 1), got " +
                          std::to_string(test_fraction));
  }
  const std::size_t n = ds.n();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngState rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_test =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction));
  const std::vector<std::size_t> train_rows(order.begin(),
                                            order.begin() + (n - n_test));
  const std::vector<std::size_t> test_rows(order.begin() + (n - n_test), order.end());
  return {ds.select_rows(train_rows), ds.select_rows(test_rows)};
}

DatasetBatchIterator::DatasetBatchIterator(Dataset dataset, std::size_t batch_size,
                                           bool shuffle_each_epoch, std::uint64_t seed)
    : dataset_(std::move(dataset)),
      batch_size_(batch_size),
      shuffle_(shuffle_each_epoch),
      rng_(seed) {
  if (batch_size_ == 0 || batch_size_ > dataset_.n()) {
    throw ValidationError("batch_iterator: batch_size " + std::to_string(batch_size_) +
                          " outside [1, " + std::to_string(dataset_.n()) + "]");
  }
  order_.resize(dataset_.n());
  start_epoch();
}

void DatasetBatchIterator::start_epoch() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (shuffle_) {
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng_.uniform_index(i));
      std::swap(order_[i - 1], order_[j]);
    }
  }
  cursor_ = 0;
  index_in_epoch_ = 0;
}

std::optional<Batch> DatasetBatchIterator::next() {
  if (cursor_ >= order_.size()) {
    ++epoch_;
    start_epoch();
  }
  const std::size_t take = std::min(batch_size_, order_.size() - cursor_);
  std::vector<std::size_t> rows(order_.begin() + cursor_,
                                order_.begin() + cursor_ + take);
  cursor_ += take;
  Dataset slice = dataset_.select_rows(rows);
  Batch batch{std::move(slice.features), std::move(slice.targets), epoch_,
              index_in_epoch_++};
  return batch;
}

FullBatchSource::FullBatchSource(const Dataset& dataset)
    : FullBatchSource(dataset.features, dataset.targets) {}

FullBatchSource::FullBatchSource(Tensor features, std::vector<double> targets)
    : batch_{std::move(features), std::move(targets), 0, 0} {
  if (batch_.features.rows() != batch_.targets.size()) {
    throw ValidationError("full batch: " + std::to_string(batch_.features.rows()) +
                          " feature rows vs " + std::to_string(batch_.targets.size()) +
                          " targets");
  }
}

std::optional<Batch> FullBatchSource::next() {
  Batch batch = batch_;
  batch.epoch = epoch_++;
  return batch;
}

}  // namespace tfln
