// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major linear algebra in 64-bit floating point. Every other module
// builds on these types; the heavy products dispatch to the kernels in
// kernels.hpp.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpt {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  // Bitwise comparison of contents.
  bool operator==(const Vector& other) const = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::string shape_string() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Products. matmul_nt computes a * bᵀ and matmul_tn computes aᵀ * b without
// materialising the transpose.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix outer(const Vector& u, const Vector& v);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Vector add(const Vector& a, const Vector& b);
Vector scale(const Vector& a, double factor);

// In-place accumulation: dst += factor * src.
void axpy(Matrix& dst, const Matrix& src, double factor = 1.0);
void axpy(Vector& dst, const Vector& src, double factor = 1.0);

// Rows [begin, end) as a new matrix.
Matrix row_slice(const Matrix& a, std::size_t begin, std::size_t end);

std::size_t argmax(std::span<const double> values);

Vector softmax_with_temperature(const Vector& logits, double temperature);
// Softmax into caller storage; out.size() must equal logits.size().
void softmax_into(std::span<const double> logits, double temperature, std::span<double> out);
// log-sum-exp with max subtraction.
double log_sum_exp(std::span<const double> values);

inline constexpr double kLayerNormEps = 1e-6;

// Row-wise layer normalisation: gain ∘ (x - mean) / sqrt(var + eps) + bias.
Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias,
                  double eps = kLayerNormEps);

double gelu(double x);
double gelu_grad(double x);

// Mean over rows of -log softmax(logits_row)[target].
double cross_entropy_from_logits(const Matrix& logits, std::span<const int> targets);

double l2_norm(std::span<const double> values);
double l2_norm(const Matrix& a);
double l2_norm(const Vector& v);
double cosine(const Vector& u, const Vector& v);

bool all_finite(std::span<const double> values);

}  // namespace mpt
