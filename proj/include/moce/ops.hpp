#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "moce/tensor.hpp"

// Differentiable ops. Every op takes an optional tape as its last argument;
// when the tape is live and an input is differentiable the op records its
// backward rule and returns a differentiable output. Without a tape the ops
// are plain numerics.
namespace moce::num {

// ---------------------------------------------------------------------------
// Linear algebra and structure
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose(const Tensor& a, Tape* tape = nullptr);
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
/// a[m x n] + bias[n] broadcast over rows (leading dimension only).
Tensor add_row(const Tensor& a, const Tensor& bias, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor scale(const Tensor& a, double factor, Tape* tape = nullptr);
/// Elementwise product with a constant (non-differentiable) mask.
Tensor mask(const Tensor& a, std::span<const double> mask_values, Tape* tape = nullptr);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end, Tape* tape = nullptr);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end, Tape* tape = nullptr);
Tensor concat_rows(std::span<const Tensor> parts, Tape* tape = nullptr);
Tensor concat_cols(std::span<const Tensor> parts, Tape* tape = nullptr);
/// Rows of `table` selected by `indices` (embedding lookup).
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices, Tape* tape = nullptr);
/// Column means: [m x n] -> [1 x n].
Tensor mean_rows(const Tensor& a, Tape* tape = nullptr);

Tensor sum(const Tensor& a, Tape* tape = nullptr);

/// sum_j weights[indices[j]] * items[j]; all items share one shape.
Tensor weighted_sum(std::span<const Tensor> items, const Tensor& weights,
                    std::span<const std::size_t> indices, Tape* tape = nullptr);

// ---------------------------------------------------------------------------
// Activations and normalisation
// ---------------------------------------------------------------------------

/// Softmax along `axis` (negative counts from the back) with max-subtraction.
Tensor softmax(const Tensor& logits, int axis = -1, Tape* tape = nullptr);
Tensor sigmoid(const Tensor& x, Tape* tape = nullptr);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x, Tape* tape = nullptr);
/// Row-wise layer norm with learnable gain and bias (each [n]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5,
                  Tape* tape = nullptr);
/// Each row divided by its sum. Rows must have positive sums.
Tensor normalize_rows(const Tensor& x, Tape* tape = nullptr);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean over rows of -log softmax(logits)[row, target], via log-sum-exp.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                     Tape* tape = nullptr);
/// sqrt(mean((pred - target)^2)); pred is [b] or [b x 1].
Tensor rmse(const Tensor& pred, std::span<const double> target, Tape* tape = nullptr);
/// Squared coefficient of variation var/mean^2 (population variance).
Tensor cv_squared(const Tensor& x, Tape* tape = nullptr);

}  // namespace moce::num
