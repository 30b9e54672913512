#include "pvrnet/encoders.hpp"

#include <cmath>
#include <limits>

#include "pvrnet/errors.hpp"
#include "pvrnet/ops.hpp"

namespace pvr {

std::vector<std::uint32_t> knn_graph(const Matrix& points, std::size_t k) {
  const std::size_t n = points.rows;
  if (points.cols != 3) throw InputError("knn_graph: points must be N x 3");
  if (k == 0 || k >= n) {
    throw InputError("knn_graph: k = " + std::to_string(k) + " needs 0 < k < N = " +
                     std::to_string(n));
  }
  std::vector<std::uint32_t> out(n * k);
  std::vector<double> best_d(k);
  std::vector<std::uint32_t> best_j(k);
  auto same_point = [&](std::size_t a, std::size_t b) {
    const double* pa = points.row(a);
    const double* pb = points.row(b);
    return pa[0] == pb[0] && pa[1] == pb[1] && pa[2] == pb[2];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double* pi = points.row(i);
    std::size_t filled = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* pj = points.row(j);
      const double dx = pj[0] - pi[0], dy = pj[1] - pi[1], dz = pj[2] - pi[2];
      const double d = dx * dx + dy * dy + dz * dz;
      if (filled == k && d >= best_d[k - 1]) continue;
      if (same_point(i, j)) continue;
      // Candidates are visited in ascending index, so an existing entry with
      // identical coordinates already represents this one.
      bool duplicate = false;
      for (std::size_t t = 0; t < filled && best_d[t] <= d; ++t) {
        if (best_d[t] == d && same_point(best_j[t], j)) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) continue;
      std::size_t pos = filled < k ? filled : k - 1;
      while (pos > 0 && best_d[pos - 1] > d) {
        best_d[pos] = best_d[pos - 1];
        best_j[pos] = best_j[pos - 1];
        --pos;
      }
      best_d[pos] = d;
      best_j[pos] = static_cast<std::uint32_t>(j);
      if (filled < k) ++filled;
    }
    const std::uint32_t pad = filled ? best_j[filled - 1] : static_cast<std::uint32_t>(i);
    for (std::size_t t = 0; t < k; ++t) out[i * k + t] = t < filled ? best_j[t] : pad;
  }
  return out;
}

void init_edge_conv(ParameterStore& store, const std::string& prefix, std::size_t in,
                    std::size_t hidden, std::size_t out, std::mt19937_64& rng) {
  // The edge layer sees concat(x_i, x_j - x_i): fan-in is 2 * in.
  const double bound = std::sqrt(6.0 / static_cast<double>(2 * in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (const char* name : {".w_self", ".w_edge"}) {
    std::vector<double> w(in * hidden);
    for (double& v : w) v = dist(rng);
    store.add(prefix + name, Tensor::from({in, hidden}, std::move(w)));
  }
  store.add(prefix + ".b", Tensor::zeros({hidden}));
  init_linear(store, prefix + ".out", hidden, out, InitKind::kRelu, rng);
}

Tensor edge_conv(const ParameterStore& store, const std::string& prefix, const Tensor& features,
                 std::span<const std::uint32_t> neighbors, std::size_t k) {
  if (features.rank() != 2) throw DimensionError("edge_conv: features must be rank 2");
  const std::size_t m = features.dim(0);
  if (k == 0 || neighbors.size() != m * k) {
    throw DimensionError("edge_conv: neighbour table has " + std::to_string(neighbors.size()) +
                         " entries for " + std::to_string(m) + " points and k = " +
                         std::to_string(k));
  }
  const Tensor& w_self = store.get(prefix + ".w_self");
  const Tensor& w_edge = store.get(prefix + ".w_edge");
  // W_self x_i + W_edge (x_j - x_i) = (W_self - W_edge) x_i + W_edge x_j; both
  // projections come from one product with the stacked weights.
  const Tensor projected = matmul(features, concat({sub(w_self, w_edge), w_edge}, 1));
  const Tensor h = edge_max_relu(projected, neighbors, k, store.get(prefix + ".b"));
  return linear_relu(store, prefix + ".out", h);
}

void init_point_encoder(ParameterStore& store, const ModelConfig& config, std::mt19937_64& rng) {
  init_edge_conv(store, "point.ec1", 3, config.edge_hidden1, config.point_hidden, rng);
  init_edge_conv(store, "point.ec2", config.point_hidden, config.edge_hidden2, config.point_dim, rng);
}

Tensor point_encode(const ParameterStore& store, const Tensor& points,
                    std::span<const std::uint32_t> neighbors, std::size_t batch, std::size_t k) {
  if (points.rank() != 2 || points.dim(1) != 3) {
    throw InputError("point_encode: points must be (batch * N) x 3, got " +
                     shape_str(points.shape()));
  }
  if (batch == 0 || points.dim(0) % batch != 0) {
    throw InputError("point_encode: " + std::to_string(points.dim(0)) +
                     " rows do not split into " + std::to_string(batch) + " clouds");
  }
  const std::size_t n = points.dim(0) / batch;
  if (n < k + 1) {
    throw InputError("point_encode: need at least k + 1 = " + std::to_string(k + 1) +
                     " points per cloud, got " + std::to_string(n));
  }
  const Tensor f1 = edge_conv(store, "point.ec1", points, neighbors, k);
  const Tensor f2 = edge_conv(store, "point.ec2", f1, neighbors, k);
  const std::size_t dp = f2.dim(1);
  return max_over_axis(reshape(f2, {batch, n, dp}), 1);
}

Tensor point_encode(const ParameterStore& store, const Matrix& points, std::size_t k) {
  if (points.rows < k + 1) {
    throw InputError("point_encode: need at least k + 1 = " + std::to_string(k + 1) + " points");
  }
  const auto nbr = knn_graph(points, k);
  return point_encode(store, matrix_tensor(points), nbr, 1, k);
}

void init_view_encoder(ParameterStore& store, const ModelConfig& config,
                       std::size_t descriptor_size, std::mt19937_64& rng) {
  init_linear(store, "view.fc1", descriptor_size, config.view_hidden, InitKind::kRelu, rng);
  init_linear(store, "view.fc2", config.view_hidden, config.view_dim, InitKind::kLinear, rng);
}

Tensor view_encode(const ParameterStore& store, const Tensor& descriptors) {
  const std::size_t dv = store.get("view.fc1.w").dim(0);
  if (descriptors.rank() != 2 || descriptors.dim(1) != dv) {
    throw InputError("view_encode: expected rows of " + std::to_string(dv) +
                     " descriptor values, got " + shape_str(descriptors.shape()));
  }
  return linear(store, "view.fc2", linear_relu(store, "view.fc1", descriptors));
}

Tensor matrix_tensor(const Matrix& m, bool requires_grad) {
  return Tensor::from({m.rows, m.cols}, m.data, requires_grad);
}

}  // namespace pvr
