#include <cmath>

#include "tcnn/kernels.hpp"

namespace tcnn {

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size())
    throw ShapeError("dot: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

template <typename T>
std::vector<T> fully_connected(std::span<const T> x, const BasicDense<T>& layer) {
  if (static_cast<int>(x.size()) != layer.in)
    throw ShapeError("fully_connected: input length " + std::to_string(x.size()) +
                     " does not match weight rows of length " + std::to_string(layer.in));
  std::vector<T> y(static_cast<std::size_t>(layer.out));
#pragma omp parallel for schedule(static)
  for (int o = 0; o < layer.out; ++o) {
    const std::span<const T> row(layer.weights.data() + static_cast<std::size_t>(o) * layer.in,
                                 static_cast<std::size_t>(layer.in));
    y[o] = static_cast<T>(layer.bias[o] + dot(row, x));
  }
  return y;
}

template <typename T>
DenseGrads<T> fully_connected_backward(std::span<const T> x, const BasicDense<T>& layer,
                                       std::span<const T> g) {
  if (static_cast<int>(x.size()) != layer.in || static_cast<int>(g.size()) != layer.out)
    throw ShapeError("fully_connected_backward: got input " + std::to_string(x.size()) +
                     " / grad " + std::to_string(g.size()) + " for a " +
                     std::to_string(layer.out) + "x" + std::to_string(layer.in) + " layer");
  DenseGrads<T> r{std::vector<T>(x.size()), BasicDense<T>(layer.out, layer.in)};
  std::vector<double> gx(x.size(), 0.0);
  for (int o = 0; o < layer.out; ++o) {
    const double go = g[o];
    if (go == 0.0) continue;
    const T* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
    for (int i = 0; i < layer.in; ++i) gx[i] += go * row[i];
  }
  std::copy(gx.begin(), gx.end(), r.input.begin());
#pragma omp parallel for schedule(static)
  for (int o = 0; o < layer.out; ++o) {
    T* row = r.layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
    for (int i = 0; i < layer.in; ++i) row[i] = static_cast<T>(g[o] * x[i]);
    r.layer.bias[o] = g[o];
  }
  return r;
}

template <typename T>
void relu_inplace(std::span<T> x) {
  for (auto& v : x) v = v > T{} ? v : T{};
}

template <typename T>
void relu_backward_inplace(std::span<T> grad, std::span<const T> activation) {
  if (grad.size() != activation.size())
    throw ShapeError("relu_backward: gradient and activation lengths differ");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(activation[i] > T{})) grad[i] = T{};
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  double m = -INFINITY;
  for (const T v : logits) m = std::max<double>(m, v);
  double z = 0.0;
  for (const T v : logits) z += std::exp(static_cast<double>(v) - m);
  std::vector<T> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    p[i] = static_cast<T>(std::exp(static_cast<double>(logits[i]) - m) / z);
  return p;
}

template <typename T>
LossGrad<T> softmax_xent(std::span<const T> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::invalid_argument("softmax_xent: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(logits.size()) + ")");
  double m = -INFINITY;
  for (const T v : logits) m = std::max<double>(m, v);
  double z = 0.0;
  for (const T v : logits) z += std::exp(static_cast<double>(v) - m);
  const double log_z = m + std::log(z);
  LossGrad<T> r;
  r.loss = log_z - static_cast<double>(logits[label]);
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = std::exp(static_cast<double>(logits[i]) - log_z);
    r.grad[i] = static_cast<T>(p - (static_cast<int>(i) == label ? 1.0 : 0.0));
  }
  return r;
}

double sigmoid_bce(double logit, double target, double* grad) {
  // log(1 + e^-|x|) form avoids overflow for large |x|.
  const double p = 1.0 / (1.0 + std::exp(-logit));
  const double loss = std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
  if (grad) *grad = p - target;
  return loss;
}

template <typename T>
LossGrad<T> smooth_l1(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) throw ShapeError("smooth_l1: length mismatch");
  LossGrad<T> r;
  r.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    if (std::abs(d) < 1.0) {
      r.loss += 0.5 * d * d;
      r.grad[i] = static_cast<T>(d);
    } else {
      r.loss += std::abs(d) - 0.5;
      r.grad[i] = static_cast<T>(d > 0 ? 1.0 : -1.0);
    }
  }
  return r;
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr) {
  if (params.size() != grads.size())
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " params but " +
                     std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i] = static_cast<T>(params[i] - lr * grads[i]);
}

void init_uniform(std::span<float> values, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : values) v = static_cast<float>(u(rng));
}

void init_kernels(KernelSet& k, std::mt19937_64& rng) {
  const int taps = static_cast<int>(k.taps());
  init_uniform(k.weights, k.in_channels * taps, k.out_channels * taps, rng);
  std::fill(k.bias.begin(), k.bias.end(), 0.0f);
}

void init_dense(Dense& d, std::mt19937_64& rng) {
  init_uniform(d.weights, d.in, d.out, rng);
  std::fill(d.bias.begin(), d.bias.end(), 0.0f);
}

template double dot(std::span<const float>, std::span<const float>);
template double dot(std::span<const double>, std::span<const double>);
template std::vector<float> fully_connected(std::span<const float>, const BasicDense<float>&);
template std::vector<double> fully_connected(std::span<const double>, const BasicDense<double>&);
template DenseGrads<float> fully_connected_backward(std::span<const float>,
                                                    const BasicDense<float>&,
                                                    std::span<const float>);
template DenseGrads<double> fully_connected_backward(std::span<const double>,
                                                     const BasicDense<double>&,
                                                     std::span<const double>);
template void relu_inplace(std::span<float>);
template void relu_inplace(std::span<double>);
template void relu_backward_inplace(std::span<float>, std::span<const float>);
template void relu_backward_inplace(std::span<double>, std::span<const double>);
template std::vector<float> softmax(std::span<const float>);
template std::vector<double> softmax(std::span<const double>);
template LossGrad<float> softmax_xent(std::span<const float>, int);
template LossGrad<double> softmax_xent(std::span<const double>, int);
template LossGrad<float> smooth_l1(std::span<const float>, std::span<const float>);
template LossGrad<double> smooth_l1(std::span<const double>, std::span<const double>);
template void sgd_step(std::span<float>, std::span<const float>, double);
template void sgd_step(std::span<double>, std::span<const double>, double);

}  // namespace tcnn
