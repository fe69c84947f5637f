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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssb/rng.hpp"
#include "ssb/tensor.hpp"

// Differentiable tensor operations. Every op takes the tape first; when the
// tape is recording and any input requires grad, the op records its backward
// rule and the output requires grad.
namespace ssb::ops {

// [m x k] . [k x n] -> [m x n]
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Batched matmul: [B x m x k] . [B x k x n] -> [B x m x n]
template <typename T>
Tensor<T> bmm(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// x + bias, where bias has the size of the last dimension of x.
template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, double factor);

// Swaps the last two dimensions.
template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::size_t>& axes);

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis);

// Mean over rows of -log softmax(logits[i])[targets[i]]; logits is [N x C].
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const std::size_t> targets);

// Normalizes over the last dimension, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, double eps);

// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x);

// Inverted dropout. Identity when not training or p == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double p, bool training, Rng& rng);

// Rows of table[V x d] selected by ids -> [n x d].
template <typename T>
Tensor<T> embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const std::int32_t> ids);

// scores is [N*H x L x L] for N sequences of H heads; key_mask is [N x L]
// with 1 for real tokens. Masked keys get -inf.
template <typename T>
Tensor<T> mask_keys(Tape<T>& tape, const Tensor<T>& scores, std::span<const std::uint8_t> key_mask,
                    std::size_t batch, std::size_t heads);

// Each row divided by its L2 norm. A zero row is a DegenerateInputError.
template <typename T>
Tensor<T> l2_normalize_rows(Tape<T>& tape, const Tensor<T>& x);

// All-pairs cosine similarity of rows: [N x d], [M x d] -> [N x M].
template <typename T>
Tensor<T> cosine_matrix(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Cosine similarity of two vectors, as a scalar tensor.
template <typename T>
Tensor<T> cosine_sim(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Pooling over x[N x L x d] with mask [N x L] -> [N x d]. A row with no
// unmasked position is a DegenerateInputError.
template <typename T>
Tensor<T> masked_mean(Tape<T>& tape, const Tensor<T>& x, std::span<const std::uint8_t> mask);

template <typename T>
Tensor<T> masked_max(Tape<T>& tape, const Tensor<T>& x, std::span<const std::uint8_t> mask);

// x[:, position, :] of x[N x L x d] -> [N x d].
template <typename T>
Tensor<T> select_position(Tape<T>& tape, const Tensor<T>& x, std::size_t position);

}  // namespace ssb::ops
