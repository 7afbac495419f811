#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "astgin/nn/tape.hpp"

// Differentiable tensor operations. Every op validates shapes and throws
// ValidationError naming the op and the offending shapes.

namespace astgin::nn {

// Batched matrix product over the last two axes. Leading (batch) axes must
// match, or one operand must be a plain matrix that is broadcast over the
// other's batch. With transpose_b the last two axes of b are read as n x k.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_b = false);

// Elementwise; b may equal a's shape or be a suffix of it (broadcast over the
// leading axes).
template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
template <typename T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T>
Var<T> reshape(Var<T> a, Shape shape);
template <typename T>
Var<T> permute(Var<T> a, const std::vector<std::size_t>& perm);
// Swaps the last two axes.
template <typename T>
Var<T> transpose(Var<T> a);

template <typename T>
Var<T> relu(Var<T> a);
template <typename T>
Var<T> sigmoid(Var<T> a);
template <typename T>
Var<T> tanh(Var<T> a);
template <typename T>
Var<T> elu(Var<T> a);

// Max pooling over axis 1 of a [B, L, C] tensor with kernel 3, stride 2 and
// padding 1; output length is (L - 1) / 2 + 1.
template <typename T>
Var<T> max_pool1d(Var<T> a);

// Softmax along the last axis. With causal set, the last two axes are read
// as (query, key) and key j is excluded for query i when j > i.
template <typename T>
Var<T> softmax(Var<T> a, bool causal = false);

// Normalizes over the last axis, then applies gamma * x + beta.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps = 1e-5);

// Inverted dropout with a mask drawn from `seed`; rate 0 is the identity.
template <typename T>
Var<T> dropout(Var<T> a, double rate, std::uint64_t seed);

// Rows of `table` (V x d) picked by `indices`; result is indices.size() x d.
template <typename T>
Var<T> embedding_lookup(Var<T> table, const std::vector<std::size_t>& indices);

template <typename T>
Var<T> sum(Var<T> a);
template <typename T>
Var<T> mean(Var<T> a);
template <typename T>
Var<T> sum_squares(Var<T> a);
// Mean of squared differences; a and b must have identical shapes.
template <typename T>
Var<T> mse(Var<T> a, Var<T> b);

}  // namespace astgin::nn
