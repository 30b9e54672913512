#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pvr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One node of the gradient tape. Leaves hold parameters or inputs; interior
// nodes remember their inputs and a closure that pushes `grad` into them.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};

std::uint64_t next_node_id();

}  // namespace detail

/// Dense row-major array of doubles with an attached reverse-mode tape node.
///
/// Tensors are handles: copying a Tensor shares the underlying storage and
/// tape node. Use clone() or detach() for an independent value.
class Tensor {
 public:
  /// A scalar zero.
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  /// Direct write access for initialisation and optimiser updates. Writing to
  /// a tensor that already feeds a live tape invalidates that tape.
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double operator[](std::size_t flat_index) const { return node_->value[flat_index]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  /// Only leaves may toggle gradient tracking.
  void set_requires_grad(bool flag);
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad();

  std::uint64_t tape_id() const { return node_->id; }
  const char* op_name() const { return node_->op; }

  /// Reverse sweep from this scalar. Gradients accumulate into every leaf that
  /// requires them; interior tape nodes are released afterwards.
  void backward() const;

  /// New leaf sharing no state with this tensor and not tracking gradients.
  Tensor detach() const;
  /// New leaf with a copy of the values and the same requires_grad flag.
  Tensor clone() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Gradient recording switch, per thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace testing {

/// Negates the backward contribution of the named op (e.g. "sigmoid") until
/// cleared with an empty name. Used to check that gradient checking detects
/// broken rules.
void inject_backward_sign_flip(std::string op_name);
const std::string& injected_sign_flip();

}  // namespace testing

}  // namespace pvr
