#include "pvrnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "pvrnet/errors.hpp"

namespace pvr {

GradCheckResult grad_check_detailed(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                                    double h) {
  for (Tensor& t : inputs) {
    if (!t.is_leaf()) throw UsageError("grad_check: inputs must be leaf tensors");
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const Tensor out = f();
  if (out.numel() != 1) {
    throw UsageError("grad_check: function must be scalar-valued, got shape " +
                     shape_str(out.shape()));
  }
  out.backward();

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const std::vector<double> analytic(inputs[t].grad().begin(), inputs[t].grad().end());
    auto values = inputs[t].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = saved + h;
        plus = f().item();
        values[i] = saved - h;
        minus = f().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[i];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result = {std::isfinite(err) ? err : INFINITY, t, i, a, numeric};
      }
    }
    inputs[t].zero_grad();
  }
  return result;
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double h) {
  return grad_check_detailed(f, inputs, h).max_rel_error;
}

}  // namespace pvr
