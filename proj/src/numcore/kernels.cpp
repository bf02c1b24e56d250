// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/numcore/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef ATLAB_HAVE_OPENMP
#include <omp.h>
#endif

namespace atlab::num::kernels {

namespace {

int g_threads = 1;
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

template <class T>
inline void gemm_nn_row(const T* a_row, const T* b, T* out_row, std::size_t k, std::size_t m,
                        const T* bias, bool accumulate, double* acc) {
  std::fill(acc, acc + m, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = static_cast<double>(a_row[p]);
    if (av == 0.0) continue;
    const T* b_row = b + p * m;
    for (std::size_t j = 0; j < m; ++j) acc[j] += av * static_cast<double>(b_row[j]);
  }
  if (bias) {
    for (std::size_t j = 0; j < m; ++j) acc[j] += static_cast<double>(bias[j]);
  }
  if (accumulate) {
    for (std::size_t j = 0; j < m; ++j) out_row[j] += static_cast<T>(acc[j]);
  } else {
    for (std::size_t j = 0; j < m; ++j) out_row[j] = static_cast<T>(acc[j]);
  }
}

// Row i of aᵀb: sum over p of a[p,i] * b[p,:], p ascending.
template <class T>
inline void gemm_tn_row(const T* a, const T* b, T* out_row, std::size_t i, std::size_t n,
                        std::size_t k, std::size_t m, bool accumulate, double* acc) {
  std::fill(acc, acc + m, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = static_cast<double>(a[p * n + i]);
    if (av == 0.0) continue;
    const T* b_row = b + p * m;
    for (std::size_t j = 0; j < m; ++j) acc[j] += av * static_cast<double>(b_row[j]);
  }
  if (accumulate) {
    for (std::size_t j = 0; j < m; ++j) out_row[j] += static_cast<T>(acc[j]);
  } else {
    for (std::size_t j = 0; j < m; ++j) out_row[j] = static_cast<T>(acc[j]);
  }
}

}  // namespace

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }

bool openmp_enabled() {
#ifdef ATLAB_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

namespace serial {

template <class T>
void gemm_nn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, std::span<const T> bias, bool accumulate) {
  std::vector<double> acc(m);
  const T* bias_ptr = bias.empty() ? nullptr : bias.data();
  for (std::size_t i = 0; i < n; ++i) {
    gemm_nn_row(a.data() + i * k, b.data(), out.data() + i * m, k, m, bias_ptr, accumulate,
                acc.data());
  }
}

template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate) {
  std::vector<double> acc(m);
  for (std::size_t i = 0; i < n; ++i) {
    gemm_tn_row(a.data(), b.data(), out.data() + i * m, i, n, k, m, accumulate, acc.data());
  }
}

}  // namespace serial

namespace parallel {

template <class T>
void gemm_nn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, std::span<const T> bias, bool accumulate) {
  const T* bias_ptr = bias.empty() ? nullptr : bias.data();
#ifdef ATLAB_HAVE_OPENMP
#pragma omp parallel num_threads(g_threads)
  {
    std::vector<double> acc(m);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      gemm_nn_row(a.data() + i * k, b.data(), out.data() + i * m, k, m, bias_ptr, accumulate,
                  acc.data());
    }
  }
#else
  serial::gemm_nn(a, b, out, n, k, m, bias, accumulate);
  (void)bias_ptr;
#endif
}

template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate) {
#ifdef ATLAB_HAVE_OPENMP
#pragma omp parallel num_threads(g_threads)
  {
    std::vector<double> acc(m);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      gemm_tn_row(a.data(), b.data(), out.data() + i * m, static_cast<std::size_t>(i), n, k, m,
                  accumulate, acc.data());
    }
  }
#else
  serial::gemm_tn(a, b, out, n, k, m, accumulate);
#endif
}

}  // namespace parallel

template <class T>
void gemm_nn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, std::span<const T> bias, bool accumulate) {
  if (g_threads > 1 && n > 1 && n * k * m >= kParallelWork) {
    parallel::gemm_nn(a, b, out, n, k, m, bias, accumulate);
  } else {
    serial::gemm_nn(a, b, out, n, k, m, bias, accumulate);
  }
}

template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate) {
  if (g_threads > 1 && n > 1 && n * k * m >= kParallelWork) {
    parallel::gemm_tn(a, b, out, n, k, m, accumulate);
  } else {
    serial::gemm_tn(a, b, out, n, k, m, accumulate);
  }
}

template <class T>
void transpose(std::span<const T> src, std::span<T> dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

template <class T>
void gemm_nt(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate) {
  std::vector<T> bt(k * m);
  transpose<T>(b, bt, m, k);
  gemm_nn<T>(a, bt, out, n, k, m, {}, accumulate);
}

#define ATLAB_INSTANTIATE_KERNELS(T)                                                       \
  template void serial::gemm_nn<T>(std::span<const T>, std::span<const T>, std::span<T>,  \
                                   std::size_t, std::size_t, std::size_t,                  \
                                   std::span<const T>, bool);                              \
  template void serial::gemm_tn<T>(std::span<const T>, std::span<const T>, std::span<T>,  \
                                   std::size_t, std::size_t, std::size_t, bool);           \
  template void parallel::gemm_nn<T>(std::span<const T>, std::span<const T>,              \
                                     std::span<T>, std::size_t, std::size_t, std::size_t,  \
                                     std::span<const T>, bool);                            \
  template void parallel::gemm_tn<T>(std::span<const T>, std::span<const T>,              \
                                     std::span<T>, std::size_t, std::size_t, std::size_t,  \
                                     bool);                                                \
  template void gemm_nn<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                           std::size_t, std::size_t, std::size_t, std::span<const T>,      \
                           bool);                                                          \
  template void gemm_tn<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                           std::size_t, std::size_t, std::size_t, bool);                   \
  template void gemm_nt<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                           std::size_t, std::size_t, std::size_t, bool);                   \
  template void transpose<T>(std::span<const T>, std::span<T>, std::size_t, std::size_t);

ATLAB_INSTANTIATE_KERNELS(float)
ATLAB_INSTANTIATE_KERNELS(double)

#undef ATLAB_INSTANTIATE_KERNELS

}  // namespace atlab::num::kernels
