#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pvrnet/config.hpp"
#include "pvrnet/params.hpp"
#include "pvrnet/synth.hpp"
#include "pvrnet/tensor.hpp"

namespace pvr {

/// k nearest neighbours of every point by Euclidean distance, flattened N x k.
///
/// The point itself is never its own neighbour, and points sharing exactly the
/// same coordinates count as one candidate (the lowest index represents them),
/// so repeating rows of a cloud does not change any neighbourhood. Equal
/// distances are ordered by ascending index. If fewer than k distinct
/// candidates exist the row is padded by repeating its last neighbour (or the
/// point itself when it has none).
std::vector<std::uint32_t> knn_graph(const Matrix& points, std::size_t k);

/// Parameters `<prefix>.w_self`, `.w_edge`, `.b` (edge hidden layer) and
/// `<prefix>.out.{w,b}` (output layer).
void init_edge_conv(ParameterStore& store, const std::string& prefix, std::size_t in,
                    std::size_t hidden, std::size_t out, std::mt19937_64& rng);

/// EdgeConv over a static neighbour table. For point i the edge hidden layer
/// relu(W_self x_i + W_edge (x_j - x_i) + b) is max-pooled over its k
/// neighbours, then projected per point: relu(out(.)). The hidden layer is
/// affine in x_j, so the pool reduces to a max over neighbours of W_edge x_j.
///
/// `neighbors` holds k row indices into `features` for every row.
Tensor edge_conv(const ParameterStore& store, const std::string& prefix, const Tensor& features,
                 std::span<const std::uint32_t> neighbors, std::size_t k);

void init_point_encoder(ParameterStore& store, const ModelConfig& config, std::mt19937_64& rng);

/// Two EdgeConv layers (3 -> point_hidden -> point_dim) and a global max over
/// the points of each cloud. `points` stacks `batch` clouds of equal size
/// ((batch * N) x 3); `neighbors` uses row indices into that stack.
Tensor point_encode(const ParameterStore& store, const Tensor& points,
                    std::span<const std::uint32_t> neighbors, std::size_t batch, std::size_t k);

/// Single cloud convenience overload; returns 1 x point_dim.
Tensor point_encode(const ParameterStore& store, const Matrix& points, std::size_t k);

void init_view_encoder(ParameterStore& store, const ModelConfig& config,
                       std::size_t descriptor_size, std::mt19937_64& rng);

/// Shared MLP applied to every descriptor row independently: (rows x Dv) ->
/// (rows x view_dim). No pooling across views.
Tensor view_encode(const ParameterStore& store, const Tensor& descriptors);

Tensor matrix_tensor(const Matrix& m, bool requires_grad = false);

}  // namespace pvr
