// SPDX-License-Identifier: Apache-2.0

#include <omp.h>

#include <cmath>
#include <limits>

#include "doctest.h"
#include "mpt/kernels.hpp"
#include "mpt/numerics.hpp"
#include "support.hpp"

using namespace mpt;
using mpt::test::max_abs_diff;
using mpt::test::naive_matmul;
using mpt::test::random_matrix;
using mpt::test::random_vector;

TEST_CASE("products agree with the triple-loop oracle") {
  const Matrix a = random_matrix(7, 5, 1);
  const Matrix b = random_matrix(5, 9, 2);
  CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-13);

  const Matrix bt = random_matrix(9, 5, 3);
  CHECK(max_abs_diff(matmul_nt(a, bt), naive_matmul(a, transpose(bt))) < 1e-13);

  const Matrix at = random_matrix(5, 7, 4);
  CHECK(max_abs_diff(matmul_tn(at, b), naive_matmul(transpose(at), b)) < 1e-13);
}

TEST_CASE("hand-computed 2x2 product") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  CHECK(matmul(a, b) == Matrix{{19, 22}, {43, 50}});
  CHECK(matmul(a, Matrix::identity(2)) == a);
}

TEST_CASE("shape mismatches throw ShapeError") {
  const Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(hadamard(a, Matrix(3, 2)), ShapeError);
  CHECK_THROWS_AS(add(a, Matrix(2, 2)), ShapeError);
  CHECK_THROWS_AS(outer(Vector{}, Vector{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(row_slice(a, 1, 3), ShapeError);
}

TEST_CASE("outer and hadamard") {
  const Matrix o = outer(Vector{1, 2}, Vector{3, 4, 5});
  CHECK(o == Matrix{{3, 4, 5}, {6, 8, 10}});
  CHECK(hadamard(o, Matrix(2, 3, 2.0)) == Matrix{{6, 8, 10}, {12, 16, 20}});
}

TEST_CASE("serial and parallel kernels are bitwise identical") {
  omp_set_num_threads(4);
  for (auto [m, n, k] : {std::tuple{64, 80, 48}, std::tuple{129, 67, 33}, std::tuple{3, 5, 1}}) {
    const Matrix a = random_matrix(m, k, 10 + m);
    const Matrix b = random_matrix(k, n, 20 + n);
    const Matrix bt = random_matrix(n, k, 30 + n);
    const Matrix at = random_matrix(k, m, 40 + m);
    const kernels::Dims d{std::size_t(m), std::size_t(n), std::size_t(k)};
    Matrix s(m, n), p(m, n);
    kernels::serial::gemm_nn(d, a.values(), b.values(), s.values());
    kernels::parallel::gemm_nn(d, a.values(), b.values(), p.values());
    CHECK(s == p);
    kernels::serial::gemm_nt(d, a.values(), bt.values(), s.values());
    kernels::parallel::gemm_nt(d, a.values(), bt.values(), p.values());
    CHECK(s == p);
    kernels::serial::gemm_tn(d, at.values(), b.values(), s.values());
    kernels::parallel::gemm_tn(d, at.values(), b.values(), p.values());
    CHECK(s == p);
  }
  // Large enough to take the parallel dispatch inside matmul.
  const Matrix a = random_matrix(80, 64, 5);
  const Matrix b = random_matrix(64, 72, 6);
  Matrix s(80, 72);
  kernels::serial::gemm_nn({80, 72, 64}, a.values(), b.values(), s.values());
  CHECK(matmul(a, b) == s);
  omp_set_num_threads(1);
}

TEST_CASE("softmax matches exp / sum and is temperature-scaled") {
  const Vector z{1.0, -2.0, 0.5, 3.0};
  for (double t : {1.0, 2.0, 0.5}) {
    const Vector p = softmax_with_temperature(z, t);
    double denom = 0.0;
    for (double x : z.values()) denom += std::exp(x / t);
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(p[i] == doctest::Approx(std::exp(z[i] / t) / denom).epsilon(1e-14));
      total += p[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(softmax_with_temperature(z, 0.0), std::invalid_argument);
}

TEST_CASE("log_sum_exp is stable for large inputs") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> small{-1000.0, -1001.0};
  CHECK(log_sum_exp(small) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))));
}

TEST_CASE("layer_norm against a direct computation") {
  const Matrix x = random_matrix(3, 6, 9, 4.0);
  const Vector g = random_vector(6, 10);
  const Vector b = random_vector(6, 11);
  const Matrix y = layer_norm(x, g, b);
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < 6; ++j) mean += x(i, j) / 6.0;
    for (std::size_t j = 0; j < 6; ++j) var += (x(i, j) - mean) * (x(i, j) - mean) / 6.0;
    for (std::size_t j = 0; j < 6; ++j) {
      const double expect = g[j] * (x(i, j) - mean) / std::sqrt(var + 1e-6) + b[j];
      CHECK(y(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("gelu uses the erf form and its derivative matches finite differences") {
  for (double x : {-3.0, -0.7, 0.0, 0.3, 2.5}) {
    CHECK(gelu(x) == doctest::Approx(0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)))).epsilon(1e-15));
    const double h = 1e-5;
    const double fd = (gelu(x + h) - gelu(x - h)) / (2 * h);
    CHECK(gelu_grad(x) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("cross entropy is the mean negative log-probability") {
  const Matrix logits{{0.0, std::log(3.0)}, {std::log(2.0), std::log(2.0)}};
  const std::vector<int> t{1, 0};
  CHECK(cross_entropy_from_logits(logits, t) ==
        doctest::Approx(-(std::log(0.75) + std::log(0.5)) / 2.0));
  const std::vector<int> bad{2, 0};
  CHECK_THROWS(cross_entropy_from_logits(logits, bad));
}

TEST_CASE("cosine") {
  CHECK(cosine(Vector{1, 0}, Vector{0, 3}) == 0.0);
  CHECK(cosine(Vector{1, 2}, Vector{2, 4}) == doctest::Approx(1.0));
  CHECK(cosine(Vector{1, 2}, Vector{-1, -2}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine(Vector{0, 0}, Vector{1, 1}), std::invalid_argument);
}

TEST_CASE("all_finite and argmax") {
  std::vector<double> v{1, 5, 5, 2};
  CHECK(argmax(v) == 1);
  CHECK(all_finite(v));
  v[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(v));
}
