#pragma once

#include <functional>
#include <span>

#include "pvrnet/tensor.hpp"

namespace pvr {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares backward() against central differences for every coordinate of
/// every input. `f` must rebuild its graph from the current input values on
/// each call and return a scalar. The relative error of a coordinate is
/// |a - n| / max(1e-8, |a| + |n|).
GradCheckResult grad_check_detailed(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                                    double h = 1e-5);

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double h = 1e-5);

}  // namespace pvr
