#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pvrnet/tensor.hpp"

namespace pvr {

enum class OptimizerMode { kSgd, kAdam };

OptimizerMode parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerMode mode);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t steps = 0;
};

/// Named trainable tensors plus optimiser state. Paths are dot separated
/// ("point.ec1.w_edge") and iterate in lexicographic order.
class ParameterStore {
 public:
  /// Registers a new leaf parameter (gradient tracking is switched on).
  Tensor& add(const std::string& path, Tensor value);

  bool contains(const std::string& path) const { return params_.count(path) != 0; }
  const Tensor& get(const std::string& path) const;
  Tensor& get(const std::string& path);

  std::vector<std::string> paths() const;
  std::size_t size() const { return params_.size(); }
  /// Total scalar count of parameters whose path starts with `prefix`.
  std::size_t parameter_count(std::string_view prefix = {}) const;

  const std::map<std::string, Tensor>& entries() const { return params_; }

  void zero_grad();
  std::uint64_t step_count() const { return steps_; }

  /// Deep copy of values (fresh tensors, fresh optimiser state).
  ParameterStore clone() const;

  /// Overwrites the values of every parameter under `prefix` with those of
  /// `source`. Missing paths or differing shapes raise FormatError.
  void load_values(const ParameterStore& source, std::string_view prefix);

 private:
  friend struct OptimizerAccess;
  std::map<std::string, Tensor> params_;
  std::map<std::string, AdamState> state_;
  std::uint64_t steps_ = 0;
};

struct StepOptions {
  OptimizerMode mode = OptimizerMode::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Parameters whose path starts with any of these are left untouched.
  std::vector<std::string> frozen_prefixes;
};

/// One in-place update of every non-frozen parameter, then all gradients are
/// zeroed. Throws UsageError if a parameter to update has no gradient buffer.
void optimizer_step(ParameterStore& store, const StepOptions& options);

enum class InitKind {
  kRelu,    ///< He-style fan-in uniform
  kLinear,  ///< Xavier-style uniform (sigmoid / linear outputs)
};

/// Adds `<prefix>.w` (in x out) and `<prefix>.b` (out, zero) to the store.
void init_linear(ParameterStore& store, const std::string& prefix, std::size_t in,
                 std::size_t out, InitKind kind, std::mt19937_64& rng);

/// x . W + b using `<prefix>.w` / `<prefix>.b`.
Tensor linear(const ParameterStore& store, const std::string& prefix, const Tensor& x);
/// relu(linear(...)) fused into one node.
Tensor linear_relu(const ParameterStore& store, const std::string& prefix, const Tensor& x);

}  // namespace pvr
