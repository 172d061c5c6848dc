#pragma once

// Dense 3D building blocks. Each layer ships its own backward pass; the
// OpenMP kernels here split work over output channels only, so a result does
// not depend on the thread count. Naive serial versions of the heavy kernels
// live in tcnn/reference.hpp and are what the tests compare against.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tcnn/tensor.hpp"

namespace tcnn {

/// Bank of 3D kernels, weights laid out out x in x kd x kh x kw.
template <typename T>
struct BasicKernelSet {
  int out_channels = 0;
  int in_channels = 0;
  Extent3 size{3, 3, 3};
  std::vector<T> weights;
  std::vector<T> bias;

  BasicKernelSet() = default;
  BasicKernelSet(int out, int in, Extent3 k)
      : out_channels(out),
        in_channels(in),
        size(k),
        weights(static_cast<std::size_t>(out) * in * k.d * k.h * k.w, T{}),
        bias(static_cast<std::size_t>(out), T{}) {}

  std::size_t taps() const { return static_cast<std::size_t>(size.d) * size.h * size.w; }
  std::size_t weight_index(int o, int i, int kd, int kh, int kw) const {
    return (((static_cast<std::size_t>(o) * in_channels + i) * size.d + kd) * size.h + kh) *
               size.w +
           kw;
  }
  T& weight(int o, int i, int kd, int kh, int kw) { return weights[weight_index(o, i, kd, kh, kw)]; }
  T weight(int o, int i, int kd, int kh, int kw) const {
    return weights[weight_index(o, i, kd, kh, kw)];
  }
  bool consistent() const {
    return weights.size() == static_cast<std::size_t>(out_channels) * in_channels * taps() &&
           bias.size() == static_cast<std::size_t>(out_channels);
  }

  template <typename U>
  BasicKernelSet<U> cast() const {
    BasicKernelSet<U> k;
    k.out_channels = out_channels;
    k.in_channels = in_channels;
    k.size = size;
    k.weights.assign(weights.begin(), weights.end());
    k.bias.assign(bias.begin(), bias.end());
    return k;
  }
};

using KernelSet = BasicKernelSet<float>;

/// For every output element, the flat index of the source element that
/// produced it (max pooling, ToI pooling).
struct ArgmaxMap {
  Shape4 source;
  Shape4 output;
  std::vector<std::int64_t> index;
};

struct ConvGeometry {
  Extent3 stride{1, 1, 1};
  Extent3 pad{1, 1, 1};
};

/// Output extent of a convolution; throws ShapeError when it is < 1.
Shape4 conv3d_output_shape(const Shape4& input, int out_channels, Extent3 kernel,
                           ConvGeometry geom);

template <typename T>
BasicTensor4<T> conv3d(const BasicTensor4<T>& input, const BasicKernelSet<T>& kernels,
                       ConvGeometry geom = {});

template <typename T>
struct ConvGrads {
  BasicTensor4<T> input;          // empty when not requested
  BasicKernelSet<T> kernels;      // weight and bias gradients
};

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor4<T>& input, const BasicKernelSet<T>& kernels,
                             const BasicTensor4<T>& grad_output, ConvGeometry geom = {},
                             bool want_input_grad = true);

/// Output extent of a max pool. Trailing partial windows are kept, so
/// out = ceil((in - k) / s) + 1.
Shape4 maxpool3d_output_shape(const Shape4& input, Extent3 kernel, Extent3 stride);

template <typename T>
struct PoolResult {
  BasicTensor4<T> output;
  ArgmaxMap argmax;
};

/// Max pooling; ties resolve to the lowest flat source index.
template <typename T>
PoolResult<T> maxpool3d(const BasicTensor4<T>& input, Extent3 kernel, Extent3 stride);

/// Routes each upstream gradient to the source element recorded in `map`,
/// summing when one source feeds several outputs.
template <typename T>
BasicTensor4<T> route_gradient(const BasicTensor4<T>& grad_output, const ArgmaxMap& map);

/// Affine map y = W x + b with W stored row-major (out x in).
template <typename T>
struct BasicDense {
  int out = 0;
  int in = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  BasicDense() = default;
  BasicDense(int out_dim, int in_dim)
      : out(out_dim),
        in(in_dim),
        weights(static_cast<std::size_t>(out_dim) * in_dim, T{}),
        bias(static_cast<std::size_t>(out_dim), T{}) {}
};

using Dense = BasicDense<float>;

template <typename T>
std::vector<T> fully_connected(std::span<const T> x, const BasicDense<T>& layer);

template <typename T>
struct DenseGrads {
  std::vector<T> input;
  BasicDense<T> layer;
};

template <typename T>
DenseGrads<T> fully_connected_backward(std::span<const T> x, const BasicDense<T>& layer,
                                       std::span<const T> grad_output);

template <typename T>
void relu_inplace(std::span<T> x);

/// Zeroes gradient entries whose forward activation was not positive.
template <typename T>
void relu_backward_inplace(std::span<T> grad, std::span<const T> activation);

template <typename T>
struct LossGrad {
  double loss = 0.0;
  std::vector<T> grad;
};

/// Softmax cross-entropy of one sample, computed with log-sum-exp.
template <typename T>
LossGrad<T> softmax_xent(std::span<const T> logits, int label);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

/// Logistic loss for a single logit against a 0/1 target.
double sigmoid_bce(double logit, double target, double* grad);

/// Smooth-L1 (Huber with unit transition) summed over components.
template <typename T>
LossGrad<T> smooth_l1(std::span<const T> prediction, std::span<const T> target);

/// params <- params - lr * grads
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void init_uniform(std::span<float> values, int fan_in, int fan_out, std::mt19937_64& rng);
void init_kernels(KernelSet& k, std::mt19937_64& rng);
void init_dense(Dense& d, std::mt19937_64& rng);

/// Dot product accumulated in double, in index order.
template <typename T>
double dot(std::span<const T> a, std::span<const T> b);

}  // namespace tcnn
