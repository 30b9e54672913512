#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pvrnet/tensor.hpp"

namespace pvr {

// Differentiable tensor operations. All shape checks throw DimensionError;
// invalid indices or labels throw InputError.

/// (m x k) . (k x n) -> (m x n).
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise. Operands must share a shape or one of them must hold a single
// element, which is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Adds a length-n bias to every row of an (m x n) tensor.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// Multiplies row i of an (m x n) tensor by factors[i]; factors has m elements.
Tensor scale_rows(const Tensor& x, const Tensor& factors);

/// Sum of all elements, as a rank-0 tensor.
Tensor sum(const Tensor& x);
/// Maximum along `axis` (axis removed). Gradient goes to the first maximal
/// element of each slice.
Tensor max_over_axis(const Tensor& x, std::size_t axis);
Tensor mean_over_axis(const Tensor& x, std::size_t axis);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
/// Rows of a rank-2 tensor picked by index (repeats allowed); backward
/// scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> rows);

/// Row i of the result is the elementwise max of rows groups[i*k .. i*k+k) of
/// x. Same values as max_over_axis(reshape(gather_rows(x, groups))) without
/// materialising the gathered rows.
Tensor gather_max_rows(const Tensor& x, std::span<const std::uint32_t> groups, std::size_t k);

/// relu(x . w + bias) as one node; same values as the unfused chain.
Tensor linear_relu(const Tensor& x, const Tensor& w, const Tensor& bias);

/// EdgeConv hidden layer over a projected table `proj` = [C | E] (rows x 2h):
/// row i is relu(C_i + max over its k group rows of E + bias). Same values as
/// relu(add_bias(add(C, gather_max_rows(E, groups, k)), bias)).
Tensor edge_max_relu(const Tensor& proj, std::span<const std::uint32_t> groups, std::size_t k,
                     const Tensor& bias);

/// Mean negative log-softmax of the labelled class over a (B x C) batch.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels);

/// Row-wise softmax probabilities (no gradient).
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace pvr
