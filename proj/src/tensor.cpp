#include "pvrnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "pvrnet/errors.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pvr {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

namespace {

// Activations are large and short lived. Left to its defaults glibc returns
// them to the kernel on every free, and the page faults on reuse cost more
// than the arithmetic.
bool keep_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return true;
}

}  // namespace

std::uint64_t next_node_id() {
  [[maybe_unused]] static const bool tuned = keep_freed_memory();
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

namespace {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->leaf = true;
  node->id = next_node_id();
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return node;
}

}  // namespace
}  // namespace detail

namespace {
thread_local bool t_grad_enabled = true;
std::string g_sign_flip_op;
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace testing {
void inject_backward_sign_flip(std::string op_name) { g_sign_flip_op = std::move(op_name); }
const std::string& injected_sign_flip() { return g_sign_flip_op; }
}  // namespace testing

Tensor::Tensor() : node_(detail::make_leaf({}, {0.0}, false)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(detail::make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(detail::make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(detail::make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(detail::make_leaf({}, {value}, requires_grad));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at(row, col) needs a rank-2 tensor");
  return node_->value[row * node_->shape[1] + col];
}

void Tensor::set_requires_grad(bool flag) {
  if (!node_->leaf) throw UsageError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = flag;
  if (flag && node_->grad.size() != node_->value.size()) {
    node_->grad.assign(node_->value.size(), 0.0);
  } else if (!flag) {
    node_->grad.clear();
  }
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detach() const {
  return Tensor(detail::make_leaf(node_->shape, node_->value, false));
}

Tensor Tensor::clone() const {
  return Tensor(detail::make_leaf(node_->shape, node_->value, node_->requires_grad));
}

namespace {

void run_with_sign_flip(detail::Node& node) {
  std::vector<detail::Node*> targets;
  for (const auto& in : node.inputs) {
    if (in->requires_grad &&
        std::find(targets.begin(), targets.end(), in.get()) == targets.end()) {
      targets.push_back(in.get());
    }
  }
  std::vector<std::vector<double>> before;
  before.reserve(targets.size());
  for (auto* t : targets) before.push_back(t->grad);
  node.backward(node);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto& g = targets[t]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * before[t][i] - g[i];
  }
}

}  // namespace

void Tensor::backward() const {
  if (numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  // Inputs are always created before their consumers, so descending id is a
  // valid reverse topological order.
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });

  // Intermediate gradients are allocated when their first consumer runs and
  // dropped once their own rule has run, so the buffers stay warm and few.
  if (node_->leaf) {
    node_->grad[0] += 1.0;
  } else {
    node_->grad.assign(1, 1.0);
  }

  const std::string& flip = testing::injected_sign_flip();
  for (auto* n : order) {
    if (n->leaf || !n->backward) continue;
    for (const auto& in : n->inputs) {
      if (in->requires_grad && !in->leaf && in->grad.empty()) {
        in->grad.assign(in->value.size(), 0.0);
      }
    }
    if (!flip.empty() && flip == n->op) {
      run_with_sign_flip(*n);
    } else {
      n->backward(*n);
    }
    if (n != node_.get()) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }

  // Nodes in `order` may be owned only by the input lists being cleared here.
  std::vector<std::shared_ptr<detail::Node>> released;
  for (auto* n : order) {
    if (n->leaf) continue;
    n->grad.clear();
    n->grad.shrink_to_fit();
    for (auto& in : n->inputs) released.push_back(std::move(in));
    n->inputs.clear();
    n->backward = nullptr;
    n->requires_grad = false;
  }
}

}  // namespace pvr
