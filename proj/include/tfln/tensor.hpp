#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace tfln {

/// Dense row-major 2-D matrix of 64-bit floats: the universal value type.
///
/// A default-constructed Tensor is the empty sentinel (0x0); every other
/// tensor has rows >= 1 and cols >= 1 and data.size() == rows * cols.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  /// Builds a tensor from row literals: Tensor::from_rows({{1, 2}, {3, 4}}).
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool operator==(const Tensor& other) const = default;

  /// Copies one row into a 1 x cols tensor.
  Tensor row(std::size_t r) const;

  /// "RxC" shape string for diagnostics.
  std::string shape_str() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& x);

/// Per-row softmax, computed with per-row max subtraction so large logits do
/// not overflow. Each output row sums to 1.
Tensor softmax_rows(const Tensor& x);

/// Per-row log-softmax, same stabilization as softmax_rows.
Tensor log_softmax_rows(const Tensor& x);

/// n x depth tensor with on_value at column labels[i] of row i, off_value elsewhere.
Tensor one_hot(const std::vector<std::int64_t>& labels, std::size_t depth,
               double on_value, double off_value);

/// Index of each row's maximum; ties break to the lowest index.
std::vector<std::int64_t> argmax_rows(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// Adds a 1 x C bias row to every row of a.
Tensor add_row_broadcast(const Tensor& a, const Tensor& bias);

/// 1 x C tensor of column sums.
Tensor column_sums(const Tensor& a);

bool all_finite(const Tensor& a);

/// Largest absolute element-wise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Converts real-valued targets to integer labels; rejects non-integral values.
std::vector<std::int64_t> to_label_vector(const std::vector<double>& targets);

}  // namespace tfln
