// Dense row-major double matrix. Everything in this project is desk scale
// (windows of at most a few hundred cells), so a flat std::vector with
// bounds-checked access is all we need.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace deltattr {

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) {
      throw std::invalid_argument("Matrix: negative shape " + shape_str(rows, cols));
    }
  }

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols, 0.0); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[index(r, c)]; }
  double operator()(int r, int c) const { return data_[index(r, c)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void require_shape(int rows, int cols, const std::string& what) const {
    if (rows_ != rows || cols_ != cols) {
      throw std::invalid_argument(what + ": expected shape " + shape_str(rows, cols) +
                                  ", got " + shape_str(rows_, cols_));
    }
  }

  // this += scale * other
  void add_scaled(const Matrix& other, double scale) {
    check_same_shape(other, "Matrix::add_scaled");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
  }

  void scale(double s) {
    for (double& v : data_) v *= s;
  }

  double sum() const {
    double acc = 0.0;
    for (double v : data_) acc += v;
    return acc;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  static std::string shape_str(int r, int c) {
    return std::to_string(r) + "x" + std::to_string(c);
  }

  size_t index(int r, int c) const {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) {
      throw std::out_of_range("Matrix: index (" + std::to_string(r) + "," +
                              std::to_string(c) + ") outside " + shape_str(rows_, cols_));
    }
    return static_cast<size_t>(r) * cols_ + c;
  }

  void check_same_shape(const Matrix& other, const std::string& what) const {
    if (!same_shape(other)) {
      throw std::invalid_argument(what + ": shape mismatch " + shape_str(rows_, cols_) +
                                  " vs " + shape_str(other.rows_, other.cols_));
    }
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// out = (1 - t) * a + t * b
inline Matrix lerp(const Matrix& a, const Matrix& b, double t) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("lerp: shape mismatch");
  }
  Matrix out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      out(r, c) = (1.0 - t) * a(r, c) + t * b(r, c);
    }
  }
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      m = std::max(m, std::abs(a(r, c) - b(r, c)));
    }
  }
  return m;
}

}  // namespace deltattr
