// SPDX-License-Identifier: Apache-2.0

#include "mpt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mpt/kernels.hpp"

namespace mpt {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                   b.shape_string());
}

bool use_parallel(kernels::Dims d) {
  return d.m * d.n * d.k >= kernels::kParallelThreshold && !kernels::in_parallel_region();
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << '(' << rows_ << 'x' << cols_ << ')';
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  const kernels::Dims d{a.rows(), b.cols(), a.cols()};
  if (use_parallel(d))
    kernels::parallel::gemm_nn(d, a.values(), b.values(), c.values());
  else
    kernels::serial::gemm_nn(d, a.values(), b.values(), c.values());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  const kernels::Dims d{a.rows(), b.rows(), a.cols()};
  if (use_parallel(d))
    kernels::parallel::gemm_nt(d, a.values(), b.values(), c.values());
  else
    kernels::serial::gemm_nt(d, a.values(), b.values(), c.values());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  const kernels::Dims d{a.cols(), b.cols(), a.rows()};
  if (use_parallel(d))
    kernels::parallel::gemm_tn(d, a.values(), b.values(), c.values());
  else
    kernels::serial::gemm_tn(d, a.values(), b.values(), c.values());
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("hadamard", a, b);
  Matrix c(a.rows(), a.cols());
  auto av = a.values();
  auto bv = b.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] * bv[i];
  return c;
}

Matrix outer(const Vector& u, const Vector& v) {
  if (u.empty() || v.empty()) throw ShapeError("outer: zero-length input");
  Matrix c(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) c(i, j) = u[i] * v[j];
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("add", a, b);
  Matrix c = a;
  axpy(c, b);
  return c;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix c = a;
  for (double& x : c.values()) x *= factor;
  return c;
}

Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("add: vector length mismatch");
  Vector c = a;
  axpy(c, b);
  return c;
}

Vector scale(const Vector& a, double factor) {
  Vector c = a;
  for (double& x : c.values()) x *= factor;
  return c;
}

void axpy(Matrix& dst, const Matrix& src, double factor) {
  if (!dst.same_shape(src)) shape_error("axpy", dst, src);
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
}

void axpy(Vector& dst, const Vector& src, double factor) {
  if (dst.size() != src.size()) throw ShapeError("axpy: vector length mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
}

Matrix row_slice(const Matrix& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows())
    throw ShapeError("row_slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + a.shape_string());
  Matrix out(end - begin, a.cols());
  std::copy(a.values().begin() + static_cast<std::ptrdiff_t>(begin * a.cols()),
            a.values().begin() + static_cast<std::ptrdiff_t>(end * a.cols()),
            out.values().begin());
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax: empty input");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) -
                                  values.begin());
}

void softmax_into(std::span<const double> logits, double temperature, std::span<double> out) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  if (logits.size() != out.size()) throw ShapeError("softmax: output length mismatch");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp((logits[j] - mx) / temperature);
    z += out[j];
  }
  for (double& p : out) p /= z;
}

Vector softmax_with_temperature(const Vector& logits, double temperature) {
  if (logits.empty()) throw ShapeError("softmax: empty input");
  Vector out(logits.size());
  softmax_into(logits.values(), temperature, out.values());
  return out;
}

double log_sum_exp(std::span<const double> values) {
  const double mx = *std::max_element(values.begin(), values.end());
  double z = 0.0;
  for (double x : values) z += std::exp(x - mx);
  return mx + std::log(z);
}

Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, double eps) {
  if (gain.size() != x.cols() || bias.size() != x.cols())
    throw ShapeError("layer_norm: gain/bias length does not match " + x.shape_string());
  Matrix y(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    auto out = y.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] = gain[c] * (in[c] - mean) * inv + bias[c];
  }
  return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double cross_entropy_from_logits(const Matrix& logits, std::span<const int> targets) {
  if (targets.size() != logits.rows())
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     logits.shape_string() + " logits");
  if (targets.empty()) throw ShapeError("cross_entropy: empty target");
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto t = static_cast<std::size_t>(targets[i]);
    if (targets[i] < 0 || t >= logits.cols()) throw ShapeError("cross_entropy: target id out of range");
    auto row = logits.row(i);
    total += log_sum_exp(row) - row[t];
  }
  return total / static_cast<double>(targets.size());
}

double l2_norm(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

double l2_norm(const Matrix& a) { return l2_norm(a.values()); }
double l2_norm(const Vector& v) { return l2_norm(v.values()); }

double cosine(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw ShapeError("cosine: length mismatch");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine: zero-norm input");
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace mpt
