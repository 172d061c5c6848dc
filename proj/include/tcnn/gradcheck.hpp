#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

#include "tcnn/tensor.hpp"

namespace tcnn {

/// Central-difference gradient of a scalar function of a tensor.
template <typename T, typename F>
BasicTensor4<T> finite_diff_grad_scalar(F&& f, const BasicTensor4<T>& input, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be > 0");
  BasicTensor4<T> x = input;
  BasicTensor4<T> g(input.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = static_cast<T>(saved + eps);
    const double up = f(x);
    x[i] = static_cast<T>(saved - eps);
    const double down = f(x);
    x[i] = saved;
    g[i] = static_cast<T>((up - down) / (2.0 * eps));
  }
  return g;
}

/// Gradient of sum_j weights[j] * op(x)[j] with respect to x. `op` maps a
/// tensor to a tensor; `weights` must match the op's output size.
template <typename T, typename Op>
BasicTensor4<T> finite_diff_grad(Op&& op, const BasicTensor4<T>& input,
                                 std::span<const T> weights, double eps) {
  auto reduce = [&](const BasicTensor4<T>& x) {
    const auto y = op(x);
    if (y.size() != weights.size())
      throw std::invalid_argument("finite_diff_grad: reduction weights do not match op output");
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += static_cast<double>(weights[j]) * y[j];
    return s;
  };
  return finite_diff_grad_scalar(reduce, input, eps);
}

/// ||a - b|| / max(||a||, ||b||); 0 when both are zero.
template <typename A, typename B>
double relative_error(const A& a, const B& b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_error: size mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace tcnn
