// SPDX-License-Identifier: Apache-2.0
//
// Raw dense product kernels over row-major buffers. Two implementations share
// one contract: `serial` is the reference, `parallel` splits output rows across
// OpenMP threads. Each output element is reduced in the same order in both, so
// the results are bitwise identical regardless of thread count.

#pragma once

#include <cstddef>
#include <span>

namespace mpt::kernels {

struct Dims {
  std::size_t m;  // output rows
  std::size_t n;  // output cols
  std::size_t k;  // reduction length
};

namespace serial {
// c[m×n] = a[m×k] * b[k×n]
void gemm_nn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
// c[m×n] = a[m×k] * b[n×k]ᵀ
void gemm_nt(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
// c[m×n] = a[k×m]ᵀ * b[k×n]
void gemm_tn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
}  // namespace serial

namespace parallel {
void gemm_nn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_nt(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_tn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
}  // namespace parallel

// Products with at least this many multiply-adds go to the parallel kernels
// when called outside an existing parallel region.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 16;

bool in_parallel_region();
int max_threads();

}  // namespace mpt::kernels
