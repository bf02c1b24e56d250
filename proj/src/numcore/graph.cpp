// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/numcore/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atlab/numcore/kernels.hpp"

namespace atlab::num {

namespace {

template <class T>
void require_matrix(const Tensor<T>& x, std::string_view op) {
  if (!x.defined() || x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         (x.defined() ? shape_string(x.shape()) : std::string("undefined")));
  }
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

}  // namespace

template <class T>
void Graph<T>::clear() {
  nodes_.clear();
  min_relu_margin_ = 1e300;
}

template <class T>
bool Graph<T>::needs_grad(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <class T>
Tensor<T> Graph<T>::finish(std::string_view op, Tensor<T> out, bool track,
                           std::function<void()> propagate) {
  for (T v : out.values()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value produced by " + std::string(op));
  }
  if (track) {
    out.set_requires_grad(true);
    nodes_.push_back(Node{op, out, std::move(propagate)});
  }
  return out;
}

template <class T>
Tensor<T> Graph<T>::affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_matrix(x, "affine");
  require_matrix(w, "affine");
  const std::size_t n = x.rows(), din = x.cols(), dout = w.cols();
  if (w.rows() != din) shape_mismatch("affine", x.shape(), w.shape());
  if (b.size() != dout) shape_mismatch("affine", w.shape(), b.shape());
  Tensor<T> out({n, dout});
  kernels::gemm_nn<T>(x.values(), w.values(), out.values(), n, din, dout, b.values());
  const bool track = needs_grad({&x, &w, &b});
  return finish("affine", out, track, [x, w, b, out, n, din, dout]() mutable {
    auto g = out.grad();
    if (x.requires_grad()) kernels::gemm_nt<T>(g, w.values(), x.grad(), n, dout, din, true);
    if (w.requires_grad()) kernels::gemm_tn<T>(x.values(), g, w.grad(), din, n, dout, true);
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t j = 0; j < dout; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += g[i * dout + j];
        gb[j] += static_cast<T>(s);
      }
    }
  });
}

template <class T>
Tensor<T> Graph<T>::matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) shape_mismatch("matmul", a.shape(), b.shape());
  Tensor<T> out({n, m});
  kernels::gemm_nn<T>(a.values(), b.values(), out.values(), n, k, m);
  return finish("matmul", out, needs_grad({&a, &b}), [a, b, out, n, k, m]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) kernels::gemm_nt<T>(g, b.values(), a.grad(), n, m, k, true);
    if (b.requires_grad()) kernels::gemm_tn<T>(a.values(), g, b.grad(), k, n, m, true);
  });
}

template <class T>
Tensor<T> Graph<T>::matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) shape_mismatch("matmul_nt", a.shape(), b.shape());
  Tensor<T> out({n, m});
  kernels::gemm_nt<T>(a.values(), b.values(), out.values(), n, k, m);
  return finish("matmul_nt", out, needs_grad({&a, &b}), [a, b, out, n, k, m]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) kernels::gemm_nn<T>(g, b.values(), a.grad(), n, m, k, {}, true);
    if (b.requires_grad()) kernels::gemm_tn<T>(g, a.values(), b.grad(), m, n, k, true);
  });
}

template <class T>
Tensor<T> Graph<T>::transpose(const Tensor<T>& x) {
  require_matrix(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor<T> out({c, r});
  kernels::transpose<T>(x.values(), out.values(), r, c);
  return finish("transpose", out, needs_grad({&x}), [x, out, r, c]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
}

template <class T>
Tensor<T> Graph<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + b[i];
  return finish("add", out, needs_grad({&a, &b}), [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

template <class T>
Tensor<T> Graph<T>::mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] * b[i];
  return finish("mul", out, needs_grad({&a, &b}), [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
    }
  });
}

template <class T>
Tensor<T> Graph<T>::add_row(const Tensor<T>& x, const Tensor<T>& r) {
  require_matrix(x, "add_row");
  const std::size_t n = x.rows(), d = x.cols();
  if (r.size() != d) shape_mismatch("add_row", x.shape(), r.shape());
  Tensor<T> out(x.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) o[i * d + j] = x[i * d + j] + r[j];
  }
  return finish("add_row", out, needs_grad({&x, &r}), [x, r, out, n, d]() mutable {
    auto g = out.grad();
    if (x.requires_grad()) {
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (r.requires_grad()) {
      auto gr = r.grad();
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += g[i * d + j];
        gr[j] += static_cast<T>(s);
      }
    }
  });
}

template <class T>
Tensor<T> Graph<T>::scale(const Tensor<T>& x, double s) {
  Tensor<T> out(x.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<T>(x[i] * s);
  return finish("scale", out, needs_grad({&x}), [x, out, s]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += static_cast<T>(g[i] * s);
  });
}

template <class T>
Tensor<T> Graph<T>::relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto o = out.values();
  double margin = min_relu_margin_;
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = x[i] > T(0) ? x[i] : T(0);
    margin = std::min(margin, std::abs(static_cast<double>(x[i])));
  }
  min_relu_margin_ = margin;
  return finish("relu", out, needs_grad({&x}), [x, out]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > T(0)) gx[i] += g[i];
    }
  });
}

namespace {

// Softmax of `n` values with stride 1 over the positions where mask allows.
template <class T>
void softmax_span(const T* x, T* y, std::size_t n, std::span<const bool> mask) {
  double mx = -1e300;
  bool any = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask.empty() && !mask[j]) continue;
    mx = std::max(mx, static_cast<double>(x[j]));
    any = true;
  }
  if (!any) throw ContractError("softmax: every position is masked");
  double total = 0.0;
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask.empty() && !mask[j]) continue;
    e[j] = std::exp(static_cast<double>(x[j]) - mx);
    total += e[j];
  }
  for (std::size_t j = 0; j < n; ++j) y[j] = static_cast<T>(e[j] / total);
}

template <class T>
void softmax_span_backward(const T* y, const T* g, T* gx, std::size_t n) {
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(g[j]) * y[j];
  for (std::size_t j = 0; j < n; ++j) {
    gx[j] += static_cast<T>(static_cast<double>(y[j]) * (static_cast<double>(g[j]) - dot));
  }
}

}  // namespace

template <class T>
Tensor<T> Graph<T>::softmax(const Tensor<T>& v) {
  if (!v.defined() || v.size() == 0) throw DimensionError("softmax: empty input");
  Tensor<T> out(v.shape());
  softmax_span(v.values().data(), out.values().data(), v.size(), {});
  return finish("softmax", out, needs_grad({&v}), [v, out]() mutable {
    softmax_span_backward(out.values().data(), out.grad().data(), v.grad().data(), v.size());
  });
}

template <class T>
Tensor<T> Graph<T>::softmax_rows(const Tensor<T>& x, std::span<const bool> key_mask) {
  require_matrix(x, "softmax_rows");
  const std::size_t n = x.rows(), m = x.cols();
  if (m == 0) throw DimensionError("softmax_rows: empty rows");
  if (!key_mask.empty() && key_mask.size() != m) {
    throw DimensionError("softmax_rows: mask length " + std::to_string(key_mask.size()) +
                         " for " + std::to_string(m) + " columns");
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    softmax_span(x.values().data() + i * m, out.values().data() + i * m, m, key_mask);
  }
  return finish("softmax_rows", out, needs_grad({&x}), [x, out, n, m]() mutable {
    auto y = out.values();
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < n; ++i) {
      softmax_span_backward(y.data() + i * m, g.data() + i * m, gx.data() + i * m, m);
    }
  });
}

template <class T>
Tensor<T> Graph<T>::layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                               double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (d == 0) throw DimensionError("layer_norm: zero-width rows");
  if (gamma.size() != d || beta.size() != d) {
    shape_mismatch("layer_norm", x.shape(), gamma.shape());
  }
  Tensor<T> out(x.shape());
  std::vector<double> xhat(n * d), inv_std(n);
  auto o = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x[i * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x[i * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (x[i * d + j] - mean) * inv_std[i];
      o[i * d + j] = static_cast<T>(xhat[i * d + j] * gamma[j] + beta[j]);
    }
  }
  return finish("layer_norm", out, needs_grad({&x, &gamma, &beta}),
                [x, gamma, beta, out, n, d, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)]() mutable {
                  auto g = out.grad();
                  if (gamma.requires_grad() || beta.requires_grad()) {
                    for (std::size_t j = 0; j < d; ++j) {
                      double sg = 0.0, sb = 0.0;
                      for (std::size_t i = 0; i < n; ++i) {
                        sg += g[i * d + j] * xhat[i * d + j];
                        sb += g[i * d + j];
                      }
                      if (gamma.requires_grad()) gamma.grad()[j] += static_cast<T>(sg);
                      if (beta.requires_grad()) beta.grad()[j] += static_cast<T>(sb);
                    }
                  }
                  if (!x.requires_grad()) return;
                  auto gx = x.grad();
                  std::vector<double> dxhat(d);
                  for (std::size_t i = 0; i < n; ++i) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      dxhat[j] = static_cast<double>(g[i * d + j]) * gamma[j];
                      mean_d += dxhat[j];
                      mean_dx += dxhat[j] * xhat[i * d + j];
                    }
                    mean_d /= static_cast<double>(d);
                    mean_dx /= static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                      gx[i * d + j] += static_cast<T>(
                          inv_std[i] * (dxhat[j] - mean_d - xhat[i * d + j] * mean_dx));
                    }
                  }
                });
}

template <class T>
Tensor<T> Graph<T>::embedding(const Tensor<T>& table, std::span<const std::size_t> ids) {
  require_matrix(table, "embedding");
  const std::size_t v = table.rows(), d = table.cols();
  Tensor<T> out({ids.size(), d});
  auto o = out.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= v) {
      throw ContractError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                          std::to_string(v) + " rows");
    }
    std::copy_n(table.values().data() + ids[i] * d, d, o.data() + i * d);
  }
  std::vector<std::size_t> id_copy(ids.begin(), ids.end());
  return finish("embedding", out, needs_grad({&table}),
                [table, out, d, id_copy = std::move(id_copy)]() mutable {
                  auto g = out.grad();
                  auto gt = table.grad();
                  for (std::size_t i = 0; i < id_copy.size(); ++i) {
                    for (std::size_t j = 0; j < d; ++j) gt[id_copy[i] * d + j] += g[i * d + j];
                  }
                });
}

template <class T>
Tensor<T> Graph<T>::concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t d = parts.front().cols();
  std::size_t n = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.cols() != d) shape_mismatch("concat_rows", parts.front().shape(), p.shape());
    n += p.rows();
    track = track || (recording() && p.requires_grad());
  }
  Tensor<T> out({n, d});
  std::size_t row = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + row * d);
    row += p.rows();
  }
  std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
  return finish("concat_rows", out, track, [inputs, out, d]() mutable {
    auto g = out.grad();
    std::size_t offset = 0;
    for (auto& p : inputs) {
      if (p.requires_grad()) {
        auto gp = p.grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      }
      offset += p.size();
    }
  });
}

template <class T>
Tensor<T> Graph<T>::slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  if (begin >= end || end > x.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_string(x.shape()));
  }
  const std::size_t d = x.cols();
  Tensor<T> out({end - begin, d});
  std::copy_n(x.values().data() + begin * d, (end - begin) * d, out.values().data());
  return finish("slice_rows", out, needs_grad({&x}), [x, out, begin, d]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * d + i] += g[i];
  });
}

template <class T>
Tensor<T> Graph<T>::mean_rows(const Tensor<T>& x) {
  require_matrix(x, "mean_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) throw DimensionError("mean_rows: no rows");
  Tensor<T> out({1, d});
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i * d + j];
    out[j] = static_cast<T>(s / static_cast<double>(n));
  }
  return finish("mean_rows", out, needs_grad({&x}), [x, out, n, d]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += static_cast<T>(g[j] * inv);
    }
  });
}

template <class T>
Tensor<T> Graph<T>::l2_normalize_rows(const Tensor<T>& x) {
  require_matrix(x, "l2_normalize_rows");
  const std::size_t n = x.rows(), d = x.cols();
  Tensor<T> out(x.shape());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(x[i * d + j]) * x[i * d + j];
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0)) throw NumericError("l2_normalize_rows: zero-norm row");
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = static_cast<T>(x[i * d + j] / norms[i]);
  }
  return finish("l2_normalize_rows", out, needs_grad({&x}),
                [x, out, n, d, norms = std::move(norms)]() mutable {
                  auto g = out.grad();
                  auto y = out.values();
                  auto gx = x.grad();
                  for (std::size_t i = 0; i < n; ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      dot += static_cast<double>(g[i * d + j]) * y[i * d + j];
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                      gx[i * d + j] += static_cast<T>((g[i * d + j] - y[i * d + j] * dot) / norms[i]);
                    }
                  }
                });
}

template <class T>
Tensor<T> Graph<T>::sum(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.values()) s += v;
  Tensor<T> out({1}, {static_cast<T>(s)});
  return finish("sum", out, needs_grad({&x}), [x, out]() mutable {
    const T g = out.grad()[0];
    for (auto& v : x.grad()) v += g;
  });
}

template <class T>
Tensor<T> Graph<T>::cross_entropy_rows(const Tensor<T>& logits,
                                       std::span<const std::size_t> targets) {
  require_matrix(logits, "cross_entropy_rows");
  const std::size_t n = logits.rows(), m = logits.cols();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(n) + " rows");
  }
  std::vector<double> probs(n * m);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= m) throw ContractError("cross_entropy_rows: target out of range");
    const T* row = logits.values().data() + i * m;
    double mx = -1e300;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      probs[i * m + j] = std::exp(row[j] - mx);
      z += probs[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) probs[i * m + j] /= z;
    total += (mx + std::log(z)) - row[targets[i]];
  }
  Tensor<T> out({1}, {static_cast<T>(total / static_cast<double>(n))});
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return finish("cross_entropy_rows", out, needs_grad({&logits}),
                [logits, out, n, m, probs = std::move(probs), tgt = std::move(tgt)]() mutable {
                  const double g = out.grad()[0] / static_cast<double>(n);
                  auto gl = logits.grad();
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < m; ++j) {
                      const double onehot = (j == tgt[i]) ? 1.0 : 0.0;
                      gl[i * m + j] += static_cast<T>(g * (probs[i * m + j] - onehot));
                    }
                  }
                });
}

template <class T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  Tensor<T> seed = loss;
  seed.grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output.has_grad()) it->propagate();
  }
}

template <class T>
Tensor<T> Graph<T>::segment_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                      std::span<const std::size_t> offsets,
                                      std::span<const bool> key_mask, double scale) {
  require_matrix(q, "segment_attention");
  require_matrix(k, "segment_attention");
  require_matrix(v, "segment_attention");
  const std::size_t n = q.rows(), dk = q.cols(), dv = v.cols();
  if (k.rows() != n || v.rows() != n || k.cols() != dk) {
    shape_mismatch("segment_attention", q.shape(), k.shape());
  }
  std::vector<std::size_t> seg(offsets.begin(), offsets.end());
  if (seg.empty()) seg = {0, n};
  if (seg.front() != 0 || seg.back() != n || !std::is_sorted(seg.begin(), seg.end())) {
    throw DimensionError("segment_attention: offsets must rise from 0 to the row count");
  }
  if (!key_mask.empty() && key_mask.size() != n) {
    throw DimensionError("segment_attention: mask length does not match row count");
  }
  auto valid = [&](std::size_t j) { return key_mask.empty() || key_mask[j]; };

  // Row i's attention weights over its segment, stored contiguously.
  std::vector<std::size_t> prob_at(n);
  std::size_t total = 0;
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    const std::size_t len = seg[s + 1] - seg[s];
    bool any = false;
    for (std::size_t j = seg[s]; j < seg[s + 1]; ++j) any = any || valid(j);
    if (len > 0 && !any) {
      throw ContractError("segment_attention: segment " + std::to_string(s) + " has no valid key");
    }
    for (std::size_t i = seg[s]; i < seg[s + 1]; ++i) {
      prob_at[i] = total;
      total += len;
    }
  }
  std::vector<double> prob(total, 0.0);
  Tensor<T> out({n, dv});
  auto qv = q.values(), kv = k.values(), vv = v.values();
  auto o = out.values();
  std::vector<double> acc(dv);
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    const std::size_t b = seg[s], e = seg[s + 1];
    for (std::size_t i = b; i < e; ++i) {
      double* p = prob.data() + prob_at[i];
      double mx = -1e300;
      for (std::size_t j = b; j < e; ++j) {
        if (!valid(j)) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < dk; ++c) dot += static_cast<double>(qv[i * dk + c]) * kv[j * dk + c];
        p[j - b] = dot * scale;
        mx = std::max(mx, p[j - b]);
      }
      double z = 0.0;
      for (std::size_t j = b; j < e; ++j) {
        p[j - b] = valid(j) ? std::exp(p[j - b] - mx) : 0.0;
        z += p[j - b];
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = b; j < e; ++j) {
        p[j - b] /= z;
        if (p[j - b] == 0.0) continue;
        for (std::size_t c = 0; c < dv; ++c) acc[c] += p[j - b] * vv[j * dv + c];
      }
      for (std::size_t c = 0; c < dv; ++c) o[i * dv + c] = static_cast<T>(acc[c]);
    }
  }
  return finish(
      "segment_attention", out, needs_grad({&q, &k, &v}),
      [q, k, v, out, seg = std::move(seg), prob = std::move(prob),
       prob_at = std::move(prob_at), n, dk, dv, scale]() mutable {
        auto g = out.grad();
        auto qv = q.values(), kv = k.values(), vv = v.values();
        std::vector<double> gq(n * dk, 0.0), gk(n * dk, 0.0), gv(n * dv, 0.0);
        std::vector<double> dp;
        for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
          const std::size_t b = seg[s], e = seg[s + 1];
          dp.assign(e - b, 0.0);
          for (std::size_t i = b; i < e; ++i) {
            const double* p = prob.data() + prob_at[i];
            double weighted = 0.0;
            for (std::size_t j = b; j < e; ++j) {
              if (p[j - b] == 0.0) {
                dp[j - b] = 0.0;
                continue;
              }
              double dot = 0.0;
              for (std::size_t c = 0; c < dv; ++c) {
                const double gi = g[i * dv + c];
                dot += gi * vv[j * dv + c];
                gv[j * dv + c] += p[j - b] * gi;
              }
              dp[j - b] = dot;
              weighted += p[j - b] * dot;
            }
            for (std::size_t j = b; j < e; ++j) {
              if (p[j - b] == 0.0) continue;
              const double ds = p[j - b] * (dp[j - b] - weighted) * scale;
              for (std::size_t c = 0; c < dk; ++c) {
                gq[i * dk + c] += ds * kv[j * dk + c];
                gk[j * dk + c] += ds * qv[i * dk + c];
              }
            }
          }
        }
        auto add_into = [](const Tensor<T>& t, const std::vector<double>& src) {
          if (!t.requires_grad()) return;
          auto dst = t.grad();
          for (std::size_t i = 0; i < src.size(); ++i) dst[i] += static_cast<T>(src[i]);
        };
        add_into(q, gq);
        add_into(k, gk);
        add_into(v, gv);
      });
}

template <class T>
Tensor<T> Graph<T>::segment_mean_rows(const Tensor<T>& x, std::span<const std::size_t> offsets) {
  require_matrix(x, "segment_mean_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != n) {
    throw DimensionError("segment_mean_rows: offsets must run from 0 to the row count");
  }
  const std::size_t segs = offsets.size() - 1;
  for (std::size_t s = 0; s < segs; ++s) {
    if (offsets[s + 1] <= offsets[s]) {
      throw DimensionError("segment_mean_rows: segment " + std::to_string(s) + " is empty");
    }
  }
  Tensor<T> out({segs, d});
  auto xv = x.values();
  auto o = out.values();
  std::vector<T> column;
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t b = offsets[s], e = offsets[s + 1];
    for (std::size_t c = 0; c < d; ++c) {
      column.clear();
      for (std::size_t i = b; i < e; ++i) column.push_back(xv[i * d + c]);
      // Summing in sorted order makes the result independent of row order.
      std::sort(column.begin(), column.end());
      double acc = 0.0;
      for (T v : column) acc += static_cast<double>(v);
      o[s * d + c] = static_cast<T>(acc / static_cast<double>(e - b));
    }
  }
  std::vector<std::size_t> seg(offsets.begin(), offsets.end());
  return finish("segment_mean_rows", out, needs_grad({&x}),
                [x, out, d, seg = std::move(seg)]() mutable {
                  auto g = out.grad();
                  auto gx = x.grad();
                  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
                    const double inv = 1.0 / static_cast<double>(seg[s + 1] - seg[s]);
                    for (std::size_t i = seg[s]; i < seg[s + 1]; ++i) {
                      for (std::size_t c = 0; c < d; ++c) {
                        gx[i * d + c] += static_cast<T>(g[s * d + c] * inv);
                      }
                    }
                  }
                });
}

template class Graph<float>;
template class Graph<double>;

}  // namespace atlab::num
