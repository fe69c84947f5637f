// Copyright 2026 The ssb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ssb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ssb/error.hpp"

namespace ssb::ops {
namespace {

std::string shapes(const Shape& a, const Shape& b) {
  return shape_string(a) + " and " + shape_string(b);
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) +
                         ", got " + shape_string(s));
  }
}

// C[m x n] += A[m x k] . B[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] . B[n x k]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, k, n, a, bt.data(), c);
}

// C[k x n] += A[m x k]^T . B[m x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
Tensor<T> make_output(Tape<T>& tape, Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs) {
  return Tensor<T>::from_data(std::move(shape), std::move(data), tape.tracks(inputs));
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul shape mismatch: " + shapes(sa, sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<T> out(m * n, T(0));
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  Tensor<T> c = make_output(tape, {m, n}, std::move(out), {&a, &b});
  if (c.requires_grad()) {
    tape.record("matmul", {&a, &b}, c, [a, b, c, m, k, n]() {
      if (!c.has_grad()) return;
      const T* g = c.grad().data();
      if (a.requires_grad()) gemm_nt(m, n, k, g, b.data().data(), a.grad_buffer().data());
      if (b.requires_grad()) gemm_tn(m, k, n, a.data().data(), g, b.grad_buffer().data());
    });
  }
  return c;
}

template <typename T>
Tensor<T> bmm(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[1]) {
    throw DimensionError("bmm shape mismatch: " + shapes(sa, sb));
  }
  const std::size_t batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
  std::vector<T> out(batch * m * n, T(0));
  for (std::size_t i = 0; i < batch; ++i) {
    gemm_nn(m, k, n, a.data().data() + i * m * k, b.data().data() + i * k * n,
            out.data() + i * m * n);
  }
  Tensor<T> c = make_output(tape, {batch, m, n}, std::move(out), {&a, &b});
  if (c.requires_grad()) {
    tape.record("bmm", {&a, &b}, c, [a, b, c, batch, m, k, n]() {
      if (!c.has_grad()) return;
      const T* g = c.grad().data();
      T* ga = a.requires_grad() ? a.grad_buffer().data() : nullptr;
      T* gb = b.requires_grad() ? b.grad_buffer().data() : nullptr;
      for (std::size_t i = 0; i < batch; ++i) {
        const T* gi = g + i * m * n;
        if (ga) gemm_nt(m, n, k, gi, b.data().data() + i * k * n, ga + i * m * k);
        if (gb) gemm_tn(m, k, n, a.data().data() + i * m * k, gi, gb + i * k * n);
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shapes(a.shape(), b.shape()));
  }
  std::vector<T> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  Tensor<T> c = make_output(tape, a.shape(), std::move(out), {&a, &b});
  if (c.requires_grad()) {
    tape.record("add", {&a, &b}, c, [a, b, c]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = t->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  const Shape& sx = x.shape();
  if (sx.empty() || bias.rank() != 1 || bias.dim(0) != sx.back()) {
    throw DimensionError("add_bias shape mismatch: " + shapes(sx, bias.shape()));
  }
  const std::size_t n = sx.back();
  std::vector<T> out(x.data().begin(), x.data().end());
  auto db = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += db[i % n];
  Tensor<T> c = make_output(tape, sx, std::move(out), {&x, &bias});
  if (c.requires_grad()) {
    tape.record("add_bias", {&x, &bias}, c, [x, bias, c, n]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      if (x.requires_grad()) {
        auto gx = x.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul shape mismatch: " + shapes(a.shape(), b.shape()));
  }
  std::vector<T> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  Tensor<T> c = make_output(tape, a.shape(), std::move(out), {&a, &b});
  if (c.requires_grad()) {
    tape.record("mul", {&a, &b}, c, [a, b, c]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        auto db = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * db[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        auto da = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * da[i];
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, double factor) {
  const T f = static_cast<T>(factor);
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v *= f;
  Tensor<T> c = make_output(tape, x.shape(), std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("scale", {&x}, c, [x, c, f]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * f;
    });
  }
  return c;
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x) {
  const std::size_t r = x.rank();
  if (r < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_string(x.shape()));
  std::vector<std::size_t> axes(r);
  for (std::size_t i = 0; i < r; ++i) axes[i] = i;
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(tape, x, axes);
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape size mismatch: " + shapes(x.shape(), shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  Tensor<T> c = make_output(tape, std::move(shape), std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("reshape", {&x}, c, [x, c]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return c;
}

template <typename T>
Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  const Shape& in = x.shape();
  const std::size_t r = in.size();
  if (axes.size() != r) throw DimensionError("permute axes do not match rank of " + shape_string(in));
  std::vector<bool> seen(r, false);
  for (std::size_t a : axes) {
    if (a >= r || seen[a]) throw DimensionError("permute axes are not a permutation");
    seen[a] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
  Shape out_shape(r);
  std::vector<std::size_t> strides(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in[axes[i]];
    strides[i] = in_strides[axes[i]];
  }
  // index_map[o] = flat input index feeding output position o.
  const std::size_t n = x.numel();
  std::vector<std::size_t> index_map(n);
  std::vector<std::size_t> counter(r, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < n; ++o) {
    index_map[o] = src;
    for (std::size_t d = r; d-- > 0;) {
      ++counter[d];
      src += strides[d];
      if (counter[d] < out_shape[d]) break;
      src -= strides[d] * counter[d];
      counter[d] = 0;
    }
  }
  std::vector<T> out(n);
  auto dx = x.data();
  for (std::size_t o = 0; o < n; ++o) out[o] = dx[index_map[o]];
  Tensor<T> c = make_output(tape, out_shape, std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("permute", {&x}, c, [x, c, index_map = std::move(index_map)]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto gx = x.grad_buffer();
      for (std::size_t o = 0; o < g.size(); ++o) gx[index_map[o]] += g[o];
    });
  }
  return c;
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor<T>& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw DimensionError("concat shape mismatch: " + shapes(first, s));
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t out_row = out_shape[axis] * inner;
  std::vector<T> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (const Tensor<T>& p : parts) {
    const std::size_t chunk = p.dim(axis) * inner;
    auto dp = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(dp.begin() + o * chunk, chunk, out.begin() + o * out_row + offset);
    }
    offset += chunk;
  }
  bool tracked = false;
  for (const Tensor<T>& p : parts) tracked = tracked || tape.tracks({&p});
  Tensor<T> c = Tensor<T>::from_data(out_shape, std::move(out), tracked);
  if (tracked) {
    tape.record("concat", parts, c, [parts, c, axis, outer, inner, out_row]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      std::size_t offset = 0;
      for (const Tensor<T>& p : parts) {
        const std::size_t chunk = p.dim(axis) * inner;
        if (p.requires_grad()) {
          auto gp = p.grad_buffer();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += g[o * out_row + offset + i];
          }
        }
        offset += chunk;
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  Tensor<T> c = make_output(tape, {}, {acc}, {&x});
  if (c.requires_grad()) {
    tape.record("sum", {&x}, c, [x, c]() {
      if (!c.has_grad()) return;
      const T g = c.grad()[0];
      for (T& v : x.grad_buffer()) v += g;
    });
  }
  return c;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  if (x.numel() == 0) throw DegenerateInputError("mean of an empty tensor");
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.numel()));
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("softmax axis out of range for " + shape_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  auto dx = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, dx[base + j * inner]);
      T total = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        const T e = std::exp(dx[base + j * inner] - peak);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  Tensor<T> c = make_output(tape, s, std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("softmax", {&x}, c, [x, c, outer, inner, n]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto y = c.data();
      auto gx = x.grad_buffer();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          T dot = T(0);
          for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = base + j * inner;
            gx[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const std::size_t> targets) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " rows");
  }
  if (rows == 0) throw DegenerateInputError("softmax_cross_entropy over zero rows");
  auto dl = logits.data();
  std::vector<T> probs(rows * cols);
  double loss = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (targets[i] >= cols) throw IndexError("target class out of range");
    const T* row = dl.data() + i * cols;
    const T peak = *std::max_element(row, row + cols);
    T total = T(0);
    for (std::size_t j = 0; j < cols; ++j) {
      probs[i * cols + j] = std::exp(row[j] - peak);
      total += probs[i * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) probs[i * cols + j] /= total;
    loss += static_cast<double>(peak + std::log(total) - row[targets[i]]);
  }
  loss /= static_cast<double>(rows);
  Tensor<T> c = make_output(tape, {}, {static_cast<T>(loss)}, {&logits});
  if (c.requires_grad()) {
    std::vector<std::size_t> labels(targets.begin(), targets.end());
    tape.record("softmax_cross_entropy", {&logits}, c,
                [logits, c, probs = std::move(probs), labels = std::move(labels), rows,
                 cols]() {
                  if (!c.has_grad()) return;
                  const T g = c.grad()[0] / static_cast<T>(rows);
                  auto gl = logits.grad_buffer();
                  for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t j = 0; j < cols; ++j) {
                      const T onehot = j == labels[i] ? T(1) : T(0);
                      gl[i * cols + j] += g * (probs[i * cols + j] - onehot);
                    }
                  }
                });
  }
  return c;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps) {
  const Shape& s = x.shape();
  if (s.empty() || gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != s.back() ||
      beta.dim(0) != s.back()) {
    throw DimensionError("layer_norm shape mismatch: x " + shape_string(s) + ", gamma " +
                         shape_string(gamma.shape()) + ", beta " + shape_string(beta.shape()));
  }
  const std::size_t d = s.back();
  const std::size_t rows = x.numel() / d;
  auto dx = x.data();
  auto dg = gamma.data();
  auto db = beta.data();
  std::vector<T> normalized(x.numel());
  std::vector<T> inv_std(rows);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = dx.data() + r * d;
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = (row[j] - mu) * is;
      normalized[r * d + j] = xh;
      out[r * d + j] = xh * dg[j] + db[j];
    }
  }
  Tensor<T> c = make_output(tape, s, std::move(out), {&x, &gamma, &beta});
  if (c.requires_grad()) {
    tape.record("layer_norm", {&x, &gamma, &beta}, c,
                [x, gamma, beta, c, normalized = std::move(normalized),
                 inv_std = std::move(inv_std), rows, d]() {
                  if (!c.has_grad()) return;
                  auto g = c.grad();
                  auto dg = gamma.data();
                  if (gamma.requires_grad()) {
                    auto gg = gamma.grad_buffer();
                    for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * normalized[i];
                  }
                  if (beta.requires_grad()) {
                    auto gb = beta.grad_buffer();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
                  }
                  if (!x.requires_grad()) return;
                  auto gx = x.grad_buffer();
                  for (std::size_t r = 0; r < rows; ++r) {
                    T mean_dxh = T(0), mean_dxh_xh = T(0);
                    for (std::size_t j = 0; j < d; ++j) {
                      const T dxh = g[r * d + j] * dg[j];
                      mean_dxh += dxh;
                      mean_dxh_xh += dxh * normalized[r * d + j];
                    }
                    mean_dxh /= static_cast<T>(d);
                    mean_dxh_xh /= static_cast<T>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                      const T dxh = g[r * d + j] * dg[j];
                      gx[r * d + j] +=
                          inv_std[r] * (dxh - mean_dxh - normalized[r * d + j] * mean_dxh_xh);
                    }
                  }
                });
  }
  return c;
}

template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x) {
  auto dx = x.data();
  std::vector<T> out(x.numel());
  const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = T(0.5) * dx[i] * (T(1) + std::erf(dx[i] * inv_sqrt2));
  }
  Tensor<T> c = make_output(tape, x.shape(), std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("gelu", {&x}, c, [x, c, inv_sqrt2]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto dx = x.data();
      auto gx = x.grad_buffer();
      const T inv_sqrt_2pi = static_cast<T>(1.0 / std::sqrt(2.0 * std::numbers::pi));
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = dx[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
        gx[i] += g[i] * (cdf + v * pdf);
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> factor(x.numel());
  for (T& f : factor) f = rng.uniform() < p ? T(0) : keep_scale;
  auto dx = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] * factor[i];
  Tensor<T> c = make_output(tape, x.shape(), std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("dropout", {&x}, c, [x, c, factor = std::move(factor)]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor[i];
    });
  }
  return c;
}

template <typename T>
Tensor<T> embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const std::int32_t> ids) {
  require_rank(table.shape(), 2, "embedding");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  auto dt = table.data();
  std::vector<T> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(vocab) + " rows");
    }
    std::copy_n(dt.begin() + static_cast<std::size_t>(ids[i]) * d, d, out.begin() + i * d);
  }
  Tensor<T> c = make_output(tape, {ids.size(), d}, std::move(out), {&table});
  if (c.requires_grad()) {
    std::vector<std::int32_t> rows(ids.begin(), ids.end());
    tape.record("embedding", {&table}, c, [table, c, rows = std::move(rows), d]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto gt = table.grad_buffer();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        T* dst = gt.data() + static_cast<std::size_t>(rows[i]) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> mask_keys(Tape<T>& tape, const Tensor<T>& scores, std::span<const std::uint8_t> key_mask,
                    std::size_t batch, std::size_t heads) {
  require_rank(scores.shape(), 3, "mask_keys");
  const std::size_t len = scores.dim(2);
  if (scores.dim(0) != batch * heads || scores.dim(1) != len || key_mask.size() != batch * len) {
    throw DimensionError("mask_keys: scores " + shape_string(scores.shape()) + " vs mask of " +
                         std::to_string(key_mask.size()) + " entries");
  }
  std::vector<T> out(scores.data().begin(), scores.data().end());
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (std::size_t b = 0; b < batch * heads; ++b) {
    const std::uint8_t* m = key_mask.data() + (b / heads) * len;
    for (std::size_t q = 0; q < len; ++q) {
      T* row = out.data() + (b * len + q) * len;
      for (std::size_t k = 0; k < len; ++k) {
        if (!m[k]) row[k] = neg_inf;
      }
    }
  }
  Tensor<T> c = make_output(tape, scores.shape(), std::move(out), {&scores});
  if (c.requires_grad()) {
    std::vector<std::uint8_t> mask(key_mask.begin(), key_mask.end());
    tape.record("mask_keys", {&scores}, c,
                [scores, c, mask = std::move(mask), heads, len]() {
                  if (!c.has_grad()) return;
                  auto g = c.grad();
                  auto gs = scores.grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const std::size_t k = i % len;
                    const std::size_t b = i / (len * len);
                    if (mask[(b / heads) * len + k]) gs[i] += g[i];
                  }
                });
  }
  return c;
}

template <typename T>
Tensor<T> l2_normalize_rows(Tape<T>& tape, const Tensor<T>& x) {
  require_rank(x.shape(), 2, "l2_normalize_rows");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  auto dx = x.data();
  std::vector<T> norms(rows);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    T sq = T(0);
    for (std::size_t j = 0; j < d; ++j) sq += dx[r * d + j] * dx[r * d + j];
    const T norm = std::sqrt(sq);
    if (!(norm > T(0)) || !std::isfinite(norm)) {
      throw DegenerateInputError("row " + std::to_string(r) +
                                 " has zero or non-finite norm; cosine similarity is undefined");
    }
    norms[r] = norm;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = dx[r * d + j] / norm;
  }
  Tensor<T> c = make_output(tape, x.shape(), std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("l2_normalize_rows", {&x}, c, [x, c, norms = std::move(norms), rows, d]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto y = c.data();
      auto gx = x.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot = T(0);
        for (std::size_t j = 0; j < d; ++j) dot += y[r * d + j] * g[r * d + j];
        for (std::size_t j = 0; j < d; ++j) {
          gx[r * d + j] += (g[r * d + j] - y[r * d + j] * dot) / norms[r];
        }
      }
    });
  }
  return c;
}

template <typename T>
Tensor<T> cosine_matrix(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "cosine_matrix");
  require_rank(b.shape(), 2, "cosine_matrix");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("cosine_matrix dimension mismatch: " + shapes(a.shape(), b.shape()));
  }
  Tensor<T> na = l2_normalize_rows(tape, a);
  Tensor<T> nb = l2_normalize_rows(tape, b);
  return matmul(tape, na, transpose(tape, nb));
}

template <typename T>
Tensor<T> cosine_sim(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0)) {
    throw DimensionError("cosine_sim expects two vectors of equal length: " +
                         shapes(a.shape(), b.shape()));
  }
  const std::size_t d = a.dim(0);
  Tensor<T> m = cosine_matrix(tape, reshape(tape, a, {1, d}), reshape(tape, b, {1, d}));
  return reshape(tape, m, {});
}

namespace {

void check_pool_input(const Shape& s, std::size_t mask_size, const char* op) {
  if (s.size() != 3 || mask_size != s[0] * s[1]) {
    throw DimensionError(std::string(op) + ": hidden " + shape_string(s) + " vs mask of " +
                         std::to_string(mask_size) + " entries");
  }
}

}  // namespace

template <typename T>
Tensor<T> masked_mean(Tape<T>& tape, const Tensor<T>& x, std::span<const std::uint8_t> mask) {
  check_pool_input(x.shape(), mask.size(), "masked_mean");
  const std::size_t n = x.dim(0), len = x.dim(1), d = x.dim(2);
  auto dx = x.data();
  std::vector<T> counts(n, T(0));
  std::vector<T> out(n * d, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < len; ++p) {
      if (!mask[i * len + p]) continue;
      counts[i] += T(1);
      const T* src = dx.data() + (i * len + p) * d;
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += src[j];
    }
    if (counts[i] == T(0)) {
      throw DegenerateInputError("pooling row " + std::to_string(i) + " is fully masked");
    }
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] /= counts[i];
  }
  Tensor<T> c = make_output(tape, {n, d}, std::move(out), {&x});
  if (c.requires_grad()) {
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    tape.record("masked_mean", {&x}, c,
                [x, c, m = std::move(m), counts = std::move(counts), len, d]() {
                  if (!c.has_grad()) return;
                  auto g = c.grad();
                  auto gx = x.grad_buffer();
                  for (std::size_t i = 0; i < counts.size(); ++i) {
                    for (std::size_t p = 0; p < len; ++p) {
                      if (!m[i * len + p]) continue;
                      T* dst = gx.data() + (i * len + p) * d;
                      for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j] / counts[i];
                    }
                  }
                });
  }
  return c;
}

template <typename T>
Tensor<T> masked_max(Tape<T>& tape, const Tensor<T>& x, std::span<const std::uint8_t> mask) {
  check_pool_input(x.shape(), mask.size(), "masked_max");
  const std::size_t n = x.dim(0), len = x.dim(1), d = x.dim(2);
  auto dx = x.data();
  std::vector<std::size_t> argmax(n * d, 0);
  std::vector<T> out(n * d, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t p = 0; p < len; ++p) {
      if (!mask[i * len + p]) continue;
      const std::size_t flat = (i * len + p) * d;
      for (std::size_t j = 0; j < d; ++j) {
        if (!any || dx[flat + j] > out[i * d + j]) {
          out[i * d + j] = dx[flat + j];
          argmax[i * d + j] = flat + j;
        }
      }
      any = true;
    }
    if (!any) throw DegenerateInputError("pooling row " + std::to_string(i) + " is fully masked");
  }
  Tensor<T> c = make_output(tape, {n, d}, std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("masked_max", {&x}, c, [x, c, argmax = std::move(argmax)]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
    });
  }
  return c;
}

template <typename T>
Tensor<T> select_position(Tape<T>& tape, const Tensor<T>& x, std::size_t position) {
  require_rank(x.shape(), 3, "select_position");
  const std::size_t n = x.dim(0), len = x.dim(1), d = x.dim(2);
  if (position >= len) throw IndexError("select_position beyond sequence length");
  auto dx = x.data();
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(dx.begin() + (i * len + position) * d, d, out.begin() + i * d);
  }
  Tensor<T> c = make_output(tape, {n, d}, std::move(out), {&x});
  if (c.requires_grad()) {
    tape.record("select_position", {&x}, c, [x, c, position, len, d]() {
      if (!c.has_grad()) return;
      auto g = c.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size() / d; ++i) {
        for (std::size_t j = 0; j < d; ++j) gx[(i * len + position) * d + j] += g[i * d + j];
      }
    });
  }
  return c;
}

#define SSB_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> bmm(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> add_bias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, double);                                 \
  template Tensor<T> transpose(Tape<T>&, const Tensor<T>&);                                     \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                \
  template Tensor<T> permute(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&);      \
  template Tensor<T> concat(Tape<T>&, const std::vector<Tensor<T>>&, std::size_t);              \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&, std::size_t);                          \
  template Tensor<T> softmax_cross_entropy(Tape<T>&, const Tensor<T>&,                          \
                                           std::span<const std::size_t>);                       \
  template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                double);                                                        \
  template Tensor<T> gelu(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, bool, Rng&);                   \
  template Tensor<T> embedding(Tape<T>&, const Tensor<T>&, std::span<const std::int32_t>);      \
  template Tensor<T> mask_keys(Tape<T>&, const Tensor<T>&, std::span<const std::uint8_t>,       \
                               std::size_t, std::size_t);                                       \
  template Tensor<T> l2_normalize_rows(Tape<T>&, const Tensor<T>&);                             \
  template Tensor<T> cosine_matrix(Tape<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> cosine_sim(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> masked_mean(Tape<T>&, const Tensor<T>&, std::span<const std::uint8_t>);    \
  template Tensor<T> masked_max(Tape<T>&, const Tensor<T>&, std::span<const std::uint8_t>);     \
  template Tensor<T> select_position(Tape<T>&, const Tensor<T>&, std::size_t);

SSB_INSTANTIATE_OPS(float)
SSB_INSTANTIATE_OPS(double)

#undef SSB_INSTANTIATE_OPS

}  // namespace ssb::ops
