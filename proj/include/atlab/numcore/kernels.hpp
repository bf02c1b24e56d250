// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

// Dense row-major matrix kernels. Every output element is accumulated in
// double over the inner dimension in ascending order, so the serial and the
// OpenMP variants produce bit-identical results: the parallel versions only
// distribute whole output rows across threads.

namespace atlab::num::kernels {

// Threads used by the parallel variants; 1 selects the serial path.
void set_num_threads(int n);
int num_threads();
bool openmp_enabled();

namespace serial {

// out[n×m] (+)= a[n×k] · b[k×m] (+ bias[m])
template <class T>
void gemm_nn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, std::span<const T> bias = {},
             bool accumulate = false);

// out[n×m] (+)= a[k×n]ᵀ · b[k×m]
template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate = false);

}  // namespace serial

namespace parallel {

template <class T>
void gemm_nn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, std::span<const T> bias = {},
             bool accumulate = false);

template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate = false);

}  // namespace parallel

// Dispatchers: parallel when more than one thread is configured and the
// problem is large enough to amortize the fork, serial otherwise.
template <class T>
void gemm_nn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, std::span<const T> bias = {},
             bool accumulate = false);

template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate = false);

// out[n×m] (+)= a[n×k] · b[m×k]ᵀ, via an explicit transpose of b.
template <class T>
void gemm_nt(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t n,
             std::size_t k, std::size_t m, bool accumulate = false);

template <class T>
void transpose(std::span<const T> src, std::span<T> dst, std::size_t rows, std::size_t cols);

}  // namespace atlab::num::kernels
