#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace multidir {

// Dense row-major grid; parent matrices in this library are J rows (parents)
// by K columns (categories).
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T value = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T value) { data_.assign(data_.size(), value); }

  T row_sum(std::size_t r) const {
    T total{};
    for (std::size_t c = 0; c < cols_; ++c) total += (*this)(r, c);
    return total;
  }

  T column_sum(std::size_t c) const {
    T total{};
    for (std::size_t r = 0; r < rows_; ++r) total += (*this)(r, c);
    return total;
  }

  T sum() const {
    T total{};
    for (const T& v : data_) total += v;
    return total;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

inline void require_same_shape(std::size_t rows_a, std::size_t cols_a,
                               std::size_t rows_b, std::size_t cols_b,
                               const char* what) {
  if (rows_a != rows_b || cols_a != cols_b) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace multidir
