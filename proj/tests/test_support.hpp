#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pvrnet/ops.hpp"
#include "pvrnet/params.hpp"
#include "pvrnet/synth.hpp"
#include "pvrnet/tensor.hpp"

namespace pvr::test {

inline Tensor randn(Shape shape, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = n(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.data) x = n(rng);
  return m;
}

// Central differences written out independently of grad_check(): returns the
// largest |analytic - numeric| / max(|numeric|, 1e-3) over all coordinates.
inline double fd_error(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                       double h = 1e-5) {
  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  f().backward();
  double worst = 0.0;
  for (Tensor& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto vals = t.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double x0 = vals[i];
      vals[i] = x0 + h;
      const double up = f().item();
      vals[i] = x0 - h;
      const double down = f().item();
      vals[i] = x0;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(std::abs(numeric), 1e-3));
    }
    t.zero_grad();
  }
  return worst;
}

inline std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pvrf_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace pvr::test
