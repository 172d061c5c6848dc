#pragma once

// Serial, loop-per-definition versions of the heavy kernels. They are slow
// and exist to check the optimized kernels and to anchor the benchmark.

#include "tcnn/kernels.hpp"

namespace tcnn::reference {

template <typename T>
BasicTensor4<T> conv3d(const BasicTensor4<T>& input, const BasicKernelSet<T>& kernels,
                       ConvGeometry geom = {});

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor4<T>& input, const BasicKernelSet<T>& kernels,
                             const BasicTensor4<T>& grad_output, ConvGeometry geom = {},
                             bool want_input_grad = true);

template <typename T>
PoolResult<T> maxpool3d(const BasicTensor4<T>& input, Extent3 kernel, Extent3 stride);

}  // namespace tcnn::reference
