// SPDX-License-Identifier: Apache-2.0

#include "mpt/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpt::kernels {

namespace {

// Row kernels shared by both implementations so the reduction order matches.
inline void row_nn(Dims d, const double* a, const double* b, double* c, std::size_t i) {
  double* out = c + i * d.n;
  for (std::size_t j = 0; j < d.n; ++j) out[j] = 0.0;
  const double* arow = a + i * d.k;
  for (std::size_t p = 0; p < d.k; ++p) {
    const double s = arow[p];
    const double* brow = b + p * d.n;
    for (std::size_t j = 0; j < d.n; ++j) out[j] += s * brow[j];
  }
}

inline void row_nt(Dims d, const double* a, const double* b, double* c, std::size_t i) {
  const double* arow = a + i * d.k;
  double* out = c + i * d.n;
  for (std::size_t j = 0; j < d.n; ++j) {
    const double* brow = b + j * d.k;
    double acc = 0.0;
    for (std::size_t p = 0; p < d.k; ++p) acc += arow[p] * brow[p];
    out[j] = acc;
  }
}

inline void row_tn(Dims d, const double* a, const double* b, double* c, std::size_t i) {
  double* out = c + i * d.n;
  for (std::size_t j = 0; j < d.n; ++j) out[j] = 0.0;
  for (std::size_t p = 0; p < d.k; ++p) {
    const double s = a[p * d.m + i];
    const double* brow = b + p * d.n;
    for (std::size_t j = 0; j < d.n; ++j) out[j] += s * brow[j];
  }
}

}  // namespace

namespace serial {

void gemm_nn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < d.m; ++i) row_nn(d, a.data(), b.data(), c.data(), i);
}

void gemm_nt(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < d.m; ++i) row_nt(d, a.data(), b.data(), c.data(), i);
}

void gemm_tn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < d.m; ++i) row_tn(d, a.data(), b.data(), c.data(), i);
}

}  // namespace serial

namespace parallel {

void gemm_nn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  const auto rows = static_cast<long long>(d.m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    row_nn(d, a.data(), b.data(), c.data(), static_cast<std::size_t>(i));
}

void gemm_nt(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  const auto rows = static_cast<long long>(d.m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    row_nt(d, a.data(), b.data(), c.data(), static_cast<std::size_t>(i));
}

void gemm_tn(Dims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  const auto rows = static_cast<long long>(d.m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i)
    row_tn(d, a.data(), b.data(), c.data(), static_cast<std::size_t>(i));
}

}  // namespace parallel

bool in_parallel_region() {
#ifdef _OPENMP
  return omp_get_level() > 0;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mpt::kernels
