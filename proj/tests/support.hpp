// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures and naive oracles for the unit tests.

#pragma once

#include <cmath>
#include <vector>

#include "mpt/model.hpp"
#include "mpt/numerics.hpp"
#include "mpt/rng.hpp"

namespace mpt::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& x : m.values()) x = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

inline Vector random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Vector v(n);
  for (double& x : v.values()) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

// Triple loop with long double accumulation; independent of the kernels.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += static_cast<long double>(a(i, p)) * b(p, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 20;
  c.d_model = 16;
  c.n_heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.ff_dim = 32;
  c.max_src_len = 8;
  c.max_tgt_len = 8;
  return c;
}

inline FrozenModel tiny_model(std::uint64_t seed = 11) {
  Rng rng(seed);
  return init_model(tiny_config(), rng);
}

}  // namespace mpt::test
