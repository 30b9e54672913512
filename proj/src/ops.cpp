#include "pvrnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels.hpp"
#include "pvrnet/errors.hpp"

namespace pvr {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->leaf = false;
  node->op = op;
  node->id = detail::next_node_id();
  bool track = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) track = track || in->requires_grad;
  }
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast check_elementwise(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.numel() == 1) return Broadcast::kRightScalar;
  if (a.numel() == 1) return Broadcast::kLeftScalar;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()) + " do not match");
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Shared body for add/sub/mul with optional scalar broadcast. `sign_b` is
// +1 for add and -1 for sub; mul is handled separately.
Tensor add_like(const Tensor& a, const Tensor& b, double sign_b, const char* op) {
  const Broadcast mode = check_elementwise(a, b, op);
  const Shape shape = mode == Broadcast::kLeftScalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = mode == Broadcast::kLeftScalar ? av[0] : av[i];
    const double y = mode == Broadcast::kRightScalar ? bv[0] : bv[i];
    out[i] = sign_b > 0 ? x + y : x - y;
  }
  return make_result(shape, std::move(out), op, {a.node(), b.node()},
                     [mode, sign_b](Node& self) {
                       Node& na = *self.inputs[0];
                       Node& nb = *self.inputs[1];
                       const std::size_t n = self.grad.size();
                       if (na.requires_grad) {
                         if (mode == Broadcast::kLeftScalar) {
                           double s = 0.0;
                           for (std::size_t i = 0; i < n; ++i) s += self.grad[i];
                           na.grad[0] += s;
                         } else {
                           for (std::size_t i = 0; i < n; ++i) na.grad[i] += self.grad[i];
                         }
                       }
                       if (nb.requires_grad) {
                         if (mode == Broadcast::kRightScalar) {
                           double s = 0.0;
                           for (std::size_t i = 0; i < n; ++i) s += self.grad[i];
                           nb.grad[0] += sign_b * s;
                         } else {
                           for (std::size_t i = 0; i < n; ++i) nb.grad[i] += sign_b * self.grad[i];
                         }
                       }
                     });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  kernels::gemm(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result({m, n}, std::move(out), "matmul", {a.node(), b.node()},
                     [m, k, n](Node& self) {
                       Node& na = *self.inputs[0];
                       Node& nb = *self.inputs[1];
                       if (na.requires_grad) {
                         // dA = G . B^T
                         std::vector<double> bt(n * k);
                         kernels::transpose(nb.value.data(), bt.data(), k, n);
                         kernels::gemm_acc(self.grad.data(), bt.data(), na.grad.data(), m, n, k);
                       }
                       if (nb.requires_grad) {
                         // dB = A^T . G
                         std::vector<double> tmp(k * n, 0.0);
                         kernels::gemm_tn_acc(na.value.data(), self.grad.data(), tmp.data(), m, k,
                                              n);
                         for (std::size_t i = 0; i < tmp.size(); ++i) nb.grad[i] += tmp[i];
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) { return add_like(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_like(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_elementwise(a, b, "mul");
  const Shape shape = mode == Broadcast::kLeftScalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (mode == Broadcast::kLeftScalar ? av[0] : av[i]) *
             (mode == Broadcast::kRightScalar ? bv[0] : bv[i]);
  }
  return make_result(shape, std::move(out), "mul", {a.node(), b.node()}, [mode](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const std::size_t n = self.grad.size();
    auto aval = [&](std::size_t i) { return mode == Broadcast::kLeftScalar ? na.value[0] : na.value[i]; };
    auto bval = [&](std::size_t i) { return mode == Broadcast::kRightScalar ? nb.value[0] : nb.value[i]; };
    if (na.requires_grad) {
      if (mode == Broadcast::kLeftScalar) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += self.grad[i] * bval(i);
        na.grad[0] += s;
      } else {
        for (std::size_t i = 0; i < n; ++i) na.grad[i] += self.grad[i] * bval(i);
      }
    }
    if (nb.requires_grad) {
      if (mode == Broadcast::kRightScalar) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += self.grad[i] * aval(i);
        nb.grad[0] += s;
      } else {
        for (std::size_t i = 0; i < n; ++i) nb.grad[i] += self.grad[i] * aval(i);
      }
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= factor;
  return make_result(x.shape(), std::move(out), "scale", {x.node()}, [factor](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += factor * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& x, double offset) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v += offset;
  return make_result(x.shape(), std::move(out), "add_scalar", {x.node()}, [](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  // Branch-free loops: activation signs are close to random.
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return make_result(x.shape(), std::move(out), "relu", {x.node()}, [](Node& self) {
    Node& nx = *self.inputs[0];
    const double* v = nx.value.data();
    const double* g = self.grad.data();
    double* dx = nx.grad.data();
    for (std::size_t i = 0, n = self.grad.size(); i < n; ++i) dx[i] += v[i] > 0.0 ? g[i] : 0.0;
  });
}

Tensor sigmoid(const Tensor& x) {
  // Clamped so that the result never rounds onto 0 or 1.
  constexpr double kLow = std::numeric_limits<double>::min();
  constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    double s;
    if (v >= 0.0) {
      s = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      s = e / (1.0 + e);
    }
    out[i] = std::clamp(s, kLow, kHigh);
  }
  return make_result(x.shape(), std::move(out), "sigmoid", {x.node()}, [](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      nx.grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += bv[j];
  }
  return make_result({m, n}, std::move(out), "add_bias", {x.node(), bias.node()},
                     [m, n](Node& self) {
                       Node& nx = *self.inputs[0];
                       Node& nb = *self.inputs[1];
                       if (nx.requires_grad) {
                         for (std::size_t i = 0; i < m * n; ++i) nx.grad[i] += self.grad[i];
                       }
                       if (nb.requires_grad) {
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* g = self.grad.data() + i * n;
                           for (std::size_t j = 0; j < n; ++j) nb.grad[j] += g[j];
                         }
                       }
                     });
}

Tensor scale_rows(const Tensor& x, const Tensor& factors) {
  require_rank(x, 2, "scale_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (factors.numel() != m) {
    throw DimensionError("scale_rows: " + std::to_string(factors.numel()) + " factors for " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(m * n);
  const auto xv = x.values();
  const auto fv = factors.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * fv[i];
  }
  return make_result({m, n}, std::move(out), "scale_rows", {x.node(), factors.node()},
                     [m, n](Node& self) {
                       Node& nx = *self.inputs[0];
                       Node& nf = *self.inputs[1];
                       for (std::size_t i = 0; i < m; ++i) {
                         const double* g = self.grad.data() + i * n;
                         if (nx.requires_grad) {
                           for (std::size_t j = 0; j < n; ++j) nx.grad[i * n + j] += g[j] * nf.value[i];
                         }
                         if (nf.requires_grad) {
                           double s = 0.0;
                           for (std::size_t j = 0; j < n; ++j) s += g[j] * nx.value[i * n + j];
                           nf.grad[i] += s;
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({}, {s}, "sum", {x.node()}, [](Node& self) {
    Node& nx = *self.inputs[0];
    const double g = self.grad[0];
    for (double& v : nx.grad) v += g;
  });
}

Tensor max_over_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("max_over_axis: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  if (s.len == 0) throw DimensionError("max_over_axis: empty axis in " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::uint32_t> arg(s.outer * s.inner, 0);
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* base = xv.data() + o * s.len * s.inner;
    double* dst = out.data() + o * s.inner;
    std::uint32_t* adst = arg.data() + o * s.inner;
    std::copy(base, base + s.inner, dst);
    for (std::size_t l = 1; l < s.len; ++l) {
      const double* row = base + l * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) {
        if (row[i] > dst[i]) {
          dst[i] = row[i];
          adst[i] = static_cast<std::uint32_t>(l);
        }
      }
    }
  }
  return make_result(std::move(out_shape), std::move(out), "max_over_axis", {x.node()},
                     [s, arg = std::move(arg)](Node& self) {
                       Node& nx = *self.inputs[0];
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t i = 0; i < s.inner; ++i) {
                           const std::size_t k = o * s.inner + i;
                           nx.grad[(o * s.len + arg[k]) * s.inner + i] += self.grad[k];
                         }
                       }
                     });
}

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("mean_over_axis: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  if (s.len == 0) throw DimensionError("mean_over_axis: empty axis in " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner);
  const auto xv = x.values();
  // Running mean: exact when every element of the slice is equal.
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* base = xv.data() + o * s.len * s.inner;
    double* dst = out.data() + o * s.inner;
    std::copy(base, base + s.inner, dst);
    for (std::size_t l = 1; l < s.len; ++l) {
      const double* row = base + l * s.inner;
      const double w = 1.0 / static_cast<double>(l + 1);
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += (row[i] - dst[i]) * w;
    }
  }
  return make_result(std::move(out_shape), std::move(out), "mean_over_axis", {x.node()},
                     [s](Node& self) {
                       Node& nx = *self.inputs[0];
                       const double w = 1.0 / static_cast<double>(s.len);
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t l = 0; l < s.len; ++l) {
                           for (std::size_t i = 0; i < s.inner; ++i) {
                             nx.grad[(o * s.len + l) * s.inner + i] += self.grad[o * s.inner + i] * w;
                           }
                         }
                       }
                     });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const Tensor& p : parts) {
    const Shape& sh = p.shape();
    bool ok = sh.size() == first.size();
    for (std::size_t d = 0; ok && d < sh.size(); ++d) ok = d == axis || sh[d] == first[d];
    if (!ok) {
      throw DimensionError("concat: " + shape_str(sh) + " incompatible with " + shape_str(first) +
                           " along axis " + std::to_string(axis));
    }
    lens.push_back(sh[axis]);
    out_shape[axis] += sh[axis];
  }
  const AxisSplit s = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<NodePtr> inputs;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].values();
    const std::size_t chunk = lens[p] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy(pv.data() + o * chunk, pv.data() + (o + 1) * chunk,
                out.data() + o * s.len * s.inner + offset);
    }
    offset += chunk;
    inputs.push_back(parts[p].node());
  }
  return make_result(std::move(out_shape), std::move(out), "concat", std::move(inputs),
                     [s, lens = std::move(lens)](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < self.inputs.size(); ++p) {
                         Node& np = *self.inputs[p];
                         const std::size_t chunk = lens[p] * s.inner;
                         if (np.requires_grad) {
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             const double* g = self.grad.data() + o * s.len * s.inner + offset;
                             double* dst = np.grad.data() + o * chunk;
                             for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
                           }
                         }
                         offset += chunk;
                       }
                     });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(std::move(shape), std::move(out), "reshape", {x.node()}, [](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(rows.size() * c);
  const auto xv = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= r) {
      throw InputError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                       std::to_string(r) + " rows");
    }
    std::copy(xv.data() + rows[i] * c, xv.data() + (rows[i] + 1) * c, out.data() + i * c);
  }
  return make_result({rows.size(), c}, std::move(out), "gather_rows", {x.node()},
                     [c, idx = std::vector<std::uint32_t>(rows.begin(), rows.end())](Node& self) {
                       Node& nx = *self.inputs[0];
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         const double* g = self.grad.data() + i * c;
                         double* dst = nx.grad.data() + idx[i] * c;
                         for (std::size_t j = 0; j < c; ++j) dst[j] += g[j];
                       }
                     });
}

Tensor gather_max_rows(const Tensor& x, std::span<const std::uint32_t> groups, std::size_t k) {
  require_rank(x, 2, "gather_max_rows");
  if (k == 0 || groups.size() % k != 0) {
    throw DimensionError("gather_max_rows: " + std::to_string(groups.size()) +
                         " indices do not split into groups of " + std::to_string(k));
  }
  const std::size_t r = x.dim(0), c = x.dim(1), m = groups.size() / k;
  for (std::uint32_t g : groups) {
    if (g >= r) {
      throw InputError("gather_max_rows: index " + std::to_string(g) + " out of range for " +
                       std::to_string(r) + " rows");
    }
  }
  const auto xv = x.values();
  std::vector<double> out(m * c);
  std::vector<std::uint32_t> source(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * c;
    std::uint32_t* s = source.data() + i * c;
    const std::uint32_t first = groups[i * k];
    std::copy(xv.data() + first * c, xv.data() + (first + 1) * c, o);
    std::fill(s, s + c, first);
    for (std::size_t t = 1; t < k; ++t) {
      const std::uint32_t g = groups[i * k + t];
      const double* row = xv.data() + g * c;
      for (std::size_t j = 0; j < c; ++j) {
        const bool take = row[j] > o[j];
        o[j] = take ? row[j] : o[j];
        s[j] = take ? g : s[j];
      }
    }
  }
  return make_result({m, c}, std::move(out), "gather_max_rows", {x.node()},
                     [c, source = std::move(source)](Node& self) {
                       Node& nx = *self.inputs[0];
                       const std::size_t rows = source.size() / c;
                       for (std::size_t i = 0; i < rows; ++i) {
                         const std::uint32_t* s = source.data() + i * c;
                         const double* g = self.grad.data() + i * c;
                         for (std::size_t j = 0; j < c; ++j) nx.grad[s[j] * c + j] += g[j];
                       }
                     });
}

Tensor linear_relu(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
    throw DimensionError("linear_relu: cannot multiply " + shape_str(x.shape()) + " by " +
                         shape_str(w.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (bias.numel() != n) {
    throw DimensionError("linear_relu: bias " + shape_str(bias.shape()) + " for " +
                         std::to_string(n) + " outputs");
  }
  std::vector<double> out(m * n);
  kernels::gemm(x.values().data(), w.values().data(), out.data(), m, k, n);
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = row[j] + bv[j];
      row[j] = v > 0.0 ? v : 0.0;
    }
  }
  return make_result(
      {m, n}, std::move(out), "linear_relu", {x.node(), w.node(), bias.node()},
      [m, k, n](Node& self) {
        Node& nx = *self.inputs[0];
        Node& nw = *self.inputs[1];
        Node& nb = *self.inputs[2];
        // The output is positive exactly where the pre-activation was. The
        // incoming gradient is masked in place; nothing reads it afterwards.
        std::vector<double>& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] = self.value[i] > 0.0 ? g[i] : 0.0;
        }
        if (nb.requires_grad) {
          double* db = nb.grad.data();
          for (std::size_t i = 0; i < m; ++i) {
            const double* gr = g.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) db[j] += gr[j];
          }
        }
        if (nw.requires_grad) {
          std::vector<double> tmp(k * n, 0.0);
          kernels::gemm_tn_acc(nx.value.data(), g.data(), tmp.data(), m, k, n);
          for (std::size_t i = 0; i < tmp.size(); ++i) nw.grad[i] += tmp[i];
        }
        if (nx.requires_grad) {
          std::vector<double> wt(n * k);
          kernels::transpose(nw.value.data(), wt.data(), k, n);
          kernels::gemm_acc(g.data(), wt.data(), nx.grad.data(), m, n, k);
        }
      });
}

Tensor edge_max_relu(const Tensor& proj, std::span<const std::uint32_t> groups, std::size_t k,
                     const Tensor& bias) {
  require_rank(proj, 2, "edge_max_relu");
  const std::size_t r = proj.dim(0), h = bias.numel();
  if (proj.dim(1) != 2 * h) {
    throw DimensionError("edge_max_relu: " + shape_str(proj.shape()) + " is not rows x 2*" +
                         std::to_string(h));
  }
  if (k == 0 || groups.size() != r * k) {
    throw DimensionError("edge_max_relu: " + std::to_string(groups.size()) + " indices for " +
                         std::to_string(r) + " rows and k = " + std::to_string(k));
  }
  for (std::uint32_t g : groups) {
    if (g >= r) {
      throw InputError("edge_max_relu: index " + std::to_string(g) + " out of range for " +
                       std::to_string(r) + " rows");
    }
  }
  const std::size_t c = 2 * h;
  const double* pv = proj.values().data();
  const auto bv = bias.values();
  std::vector<double> out(r * h), pooled(h);
  std::vector<std::uint32_t> source(r * h);
  for (std::size_t i = 0; i < r; ++i) {
    std::uint32_t* s = source.data() + i * h;
    const std::uint32_t first = groups[i * k];
    std::copy(pv + first * c + h, pv + first * c + c, pooled.data());
    std::fill(s, s + h, first);
    for (std::size_t t = 1; t < k; ++t) {
      const std::uint32_t g = groups[i * k + t];
      const double* row = pv + g * c + h;
      for (std::size_t j = 0; j < h; ++j) {
        const bool take = row[j] > pooled[j];
        pooled[j] = take ? row[j] : pooled[j];
        s[j] = take ? g : s[j];
      }
    }
    const double* centre = pv + i * c;
    double* o = out.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double v = (centre[j] + pooled[j]) + bv[j];
      o[j] = v > 0.0 ? v : 0.0;
    }
  }
  return make_result({r, h}, std::move(out), "edge_max_relu", {proj.node(), bias.node()},
                     [r, h, source = std::move(source)](Node& self) {
                       Node& np = *self.inputs[0];
                       Node& nb = *self.inputs[1];
                       const std::size_t c = 2 * h;
                       std::vector<double> gi(h);
                       double* db = nb.requires_grad ? nb.grad.data() : nullptr;
                       double* dp = np.requires_grad ? np.grad.data() : nullptr;
                       for (std::size_t i = 0; i < r; ++i) {
                         const double* v = self.value.data() + i * h;
                         const double* go = self.grad.data() + i * h;
                         for (std::size_t j = 0; j < h; ++j) gi[j] = v[j] > 0.0 ? go[j] : 0.0;
                         if (db) {
                           for (std::size_t j = 0; j < h; ++j) db[j] += gi[j];
                         }
                         if (dp) {
                           const std::uint32_t* s = source.data() + i * h;
                           for (std::size_t j = 0; j < h; ++j) dp[i * c + j] += gi[j];
                           for (std::size_t j = 0; j < h; ++j) dp[s[j] * c + h + j] += gi[j];
                         }
                       }
                     });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  if (labels.size() != b) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_str(logits.shape()));
  }
  if (b == 0) throw DimensionError("softmax_cross_entropy: empty batch");
  std::vector<double> probs(b * c);
  double total = 0.0;
  const auto lv = logits.values();
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= c) {
      throw InputError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                       " outside [0, " + std::to_string(c) + ")");
    }
    const double* row = lv.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    total += std::log(z) - (row[labels[i]] - mx);
  }
  const double loss = total / static_cast<double>(b);
  return make_result({}, {loss}, "softmax_cross_entropy", {logits.node()},
                     [b, c, probs = std::move(probs),
                      lab = std::vector<std::uint32_t>(labels.begin(), labels.end())](Node& self) {
                       Node& nl = *self.inputs[0];
                       const double g = self.grad[0] / static_cast<double>(b);
                       for (std::size_t i = 0; i < b; ++i) {
                         for (std::size_t j = 0; j < c; ++j) {
                           const double onehot = j == lab[i] ? 1.0 : 0.0;
                           nl.grad[i * c + j] += g * (probs[i * c + j] - onehot);
                         }
                       }
                     });
}

std::vector<double> softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax_rows");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<double> out(b * c);
  const auto lv = logits.values();
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = lv.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return out;
}

}  // namespace pvr
