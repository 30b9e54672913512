#include "pvrnet/params.hpp"

#include <cmath>

#include "pvrnet/errors.hpp"
#include "pvrnet/ops.hpp"

namespace pvr {

OptimizerMode parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerMode::kSgd;
  if (name == "adam") return OptimizerMode::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::string_view optimizer_name(OptimizerMode mode) {
  return mode == OptimizerMode::kSgd ? "sgd" : "adam";
}

Tensor& ParameterStore::add(const std::string& path, Tensor value) {
  if (params_.count(path)) throw UsageError("duplicate parameter path '" + path + "'");
  if (!value.is_leaf()) value = value.detach();
  value.set_requires_grad(true);
  return params_.emplace(path, std::move(value)).first->second;
}

const Tensor& ParameterStore::get(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw UsageError("unknown parameter '" + path + "'");
  return it->second;
}

Tensor& ParameterStore::get(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw UsageError("unknown parameter '" + path + "'");
  return it->second;
}

std::vector<std::string> ParameterStore::paths() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [path, _] : params_) out.push_back(path);
  return out;
}

std::size_t ParameterStore::parameter_count(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& [path, t] : params_) {
    if (std::string_view(path).substr(0, prefix.size()) == prefix) n += t.numel();
  }
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& [path, t] : params_) out.add(path, t.clone());
  return out;
}

void ParameterStore::load_values(const ParameterStore& source, std::string_view prefix) {
  for (auto& [path, t] : params_) {
    if (std::string_view(path).substr(0, prefix.size()) != prefix) continue;
    if (!source.contains(path)) {
      throw FormatError("checkpoint is missing parameter '" + path + "'");
    }
    const Tensor& src = source.get(path);
    if (src.shape() != t.shape()) {
      throw FormatError("parameter '" + path + "' has shape " + shape_str(src.shape()) +
                        " in checkpoint but " + shape_str(t.shape()) + " in the model");
    }
    auto dst = t.mutable_values();
    std::copy(src.values().begin(), src.values().end(), dst.begin());
  }
}

struct OptimizerAccess {
  static void step(ParameterStore& store, const StepOptions& opt) {
    auto frozen = [&](const std::string& path) {
      for (const auto& p : opt.frozen_prefixes) {
        if (path.compare(0, p.size(), p) == 0) return true;
      }
      return false;
    };
    for (auto& [path, t] : store.params_) {
      if (!frozen(path) && !t.has_grad()) {
        throw UsageError("optimizer_step: parameter '" + path + "' has no gradient");
      }
    }
    for (auto& [path, t] : store.params_) {
      if (frozen(path)) continue;
      auto w = t.mutable_values();
      auto g = t.grad();
      if (opt.mode == OptimizerMode::kSgd) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= opt.lr * g[i];
        continue;
      }
      AdamState& st = store.state_[path];
      if (st.first_moment.size() != w.size()) {
        st.first_moment.assign(w.size(), 0.0);
        st.second_moment.assign(w.size(), 0.0);
        st.steps = 0;
      }
      ++st.steps;
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(st.steps));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(st.steps));
      for (std::size_t i = 0; i < w.size(); ++i) {
        double& m = st.first_moment[i];
        double& v = st.second_moment[i];
        m = opt.beta1 * m + (1.0 - opt.beta1) * g[i];
        v = opt.beta2 * v + (1.0 - opt.beta2) * g[i] * g[i];
        const double mhat = m / c1;
        const double vhat = v / c2;
        w[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.epsilon);
      }
    }
    ++store.steps_;
    store.zero_grad();
  }
};

void optimizer_step(ParameterStore& store, const StepOptions& options) {
  OptimizerAccess::step(store, options);
}

void init_linear(ParameterStore& store, const std::string& prefix, std::size_t in,
                 std::size_t out, InitKind kind, std::mt19937_64& rng) {
  const double bound = kind == InitKind::kRelu
                           ? std::sqrt(6.0 / static_cast<double>(in))
                           : std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (double& v : w) v = dist(rng);
  store.add(prefix + ".w", Tensor::from({in, out}, std::move(w)));
  store.add(prefix + ".b", Tensor::zeros({out}));
}

Tensor linear(const ParameterStore& store, const std::string& prefix, const Tensor& x) {
  return add_bias(matmul(x, store.get(prefix + ".w")), store.get(prefix + ".b"));
}

Tensor linear_relu(const ParameterStore& store, const std::string& prefix, const Tensor& x) {
  return pvr::linear_relu(x, store.get(prefix + ".w"), store.get(prefix + ".b"));
}

}  // namespace pvr
