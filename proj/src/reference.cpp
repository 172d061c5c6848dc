#include "tcnn/reference.hpp"

#include <limits>

namespace tcnn::reference {

namespace {

void check_conv_inputs(const Shape4& in, const auto& k) {
  if (!k.consistent()) throw ShapeError("conv3d: kernel set has inconsistent weight count");
  if (k.in_channels != in.c)
    throw ShapeError("conv3d: input " + in.str() + " has " + std::to_string(in.c) +
                     " channels but kernels expect " + std::to_string(k.in_channels));
}

}  // namespace

template <typename T>
BasicTensor4<T> conv3d(const BasicTensor4<T>& input, const BasicKernelSet<T>& k,
                       ConvGeometry g) {
  const Shape4 in = input.shape();
  check_conv_inputs(in, k);
  const Shape4 os = conv3d_output_shape(in, k.out_channels, k.size, g);
  BasicTensor4<T> out(os);
  for (int o = 0; o < os.c; ++o)
    for (int z = 0; z < os.d; ++z)
      for (int y = 0; y < os.h; ++y)
        for (int x = 0; x < os.w; ++x) {
          double acc = k.bias[o];
          for (int i = 0; i < in.c; ++i)
            for (int a = 0; a < k.size.d; ++a) {
              const int zz = z * g.stride.d - g.pad.d + a;
              if (zz < 0 || zz >= in.d) continue;
              for (int b = 0; b < k.size.h; ++b) {
                const int yy = y * g.stride.h - g.pad.h + b;
                if (yy < 0 || yy >= in.h) continue;
                for (int c = 0; c < k.size.w; ++c) {
                  const int xx = x * g.stride.w - g.pad.w + c;
                  if (xx < 0 || xx >= in.w) continue;
                  acc += static_cast<double>(k.weight(o, i, a, b, c)) * input(i, zz, yy, xx);
                }
              }
            }
          out(o, z, y, x) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor4<T>& input, const BasicKernelSet<T>& k,
                             const BasicTensor4<T>& grad_out, ConvGeometry g,
                             bool want_input_grad) {
  const Shape4 in = input.shape();
  check_conv_inputs(in, k);
  const Shape4 os = conv3d_output_shape(in, k.out_channels, k.size, g);
  require_same_shape(os, grad_out.shape(), "conv3d_backward grad_output");

  std::vector<double> gin(want_input_grad ? in.size() : 0, 0.0);
  std::vector<double> gw(k.weights.size(), 0.0);
  std::vector<double> gb(k.bias.size(), 0.0);
  for (int o = 0; o < os.c; ++o)
    for (int z = 0; z < os.d; ++z)
      for (int y = 0; y < os.h; ++y)
        for (int x = 0; x < os.w; ++x) {
          const double go = grad_out(o, z, y, x);
          gb[o] += go;
          for (int i = 0; i < in.c; ++i)
            for (int a = 0; a < k.size.d; ++a) {
              const int zz = z * g.stride.d - g.pad.d + a;
              if (zz < 0 || zz >= in.d) continue;
              for (int b = 0; b < k.size.h; ++b) {
                const int yy = y * g.stride.h - g.pad.h + b;
                if (yy < 0 || yy >= in.h) continue;
                for (int c = 0; c < k.size.w; ++c) {
                  const int xx = x * g.stride.w - g.pad.w + c;
                  if (xx < 0 || xx >= in.w) continue;
                  gw[k.weight_index(o, i, a, b, c)] += go * input(i, zz, yy, xx);
                  if (want_input_grad)
                    gin[input.index(i, zz, yy, xx)] += go * k.weight(o, i, a, b, c);
                }
              }
            }
        }

  ConvGrads<T> r;
  if (want_input_grad) r.input = BasicTensor4<T>(in, std::vector<T>(gin.begin(), gin.end()));
  r.kernels = BasicKernelSet<T>(k.out_channels, k.in_channels, k.size);
  std::copy(gw.begin(), gw.end(), r.kernels.weights.begin());
  std::copy(gb.begin(), gb.end(), r.kernels.bias.begin());
  return r;
}

template <typename T>
PoolResult<T> maxpool3d(const BasicTensor4<T>& input, Extent3 kernel, Extent3 stride) {
  const Shape4 in = input.shape();
  const Shape4 os = maxpool3d_output_shape(in, kernel, stride);
  PoolResult<T> r{BasicTensor4<T>(os), ArgmaxMap{in, os, std::vector<std::int64_t>(os.size())}};
  for (int c = 0; c < os.c; ++c)
    for (int z = 0; z < os.d; ++z)
      for (int y = 0; y < os.h; ++y)
        for (int x = 0; x < os.w; ++x) {
          T best = -std::numeric_limits<T>::infinity();
          std::int64_t arg = -1;
          for (int a = 0; a < kernel.d; ++a)
            for (int b = 0; b < kernel.h; ++b)
              for (int e = 0; e < kernel.w; ++e) {
                const int zz = z * stride.d + a, yy = y * stride.h + b, xx = x * stride.w + e;
                if (zz >= in.d || yy >= in.h || xx >= in.w) continue;
                const auto idx = static_cast<std::int64_t>(input.index(c, zz, yy, xx));
                const T v = input[static_cast<std::size_t>(idx)];
                if (arg < 0 || v > best || (v == best && idx < arg)) {
                  best = v;
                  arg = idx;
                }
              }
          const std::size_t o = r.output.index(c, z, y, x);
          r.output[o] = best;
          r.argmax.index[o] = arg;
        }
  return r;
}

template BasicTensor4<float> conv3d(const BasicTensor4<float>&, const BasicKernelSet<float>&,
                                    ConvGeometry);
template BasicTensor4<double> conv3d(const BasicTensor4<double>&, const BasicKernelSet<double>&,
                                     ConvGeometry);
template ConvGrads<float> conv3d_backward(const BasicTensor4<float>&, const BasicKernelSet<float>&,
                                          const BasicTensor4<float>&, ConvGeometry, bool);
template ConvGrads<double> conv3d_backward(const BasicTensor4<double>&,
                                           const BasicKernelSet<double>&,
                                           const BasicTensor4<double>&, ConvGeometry, bool);
template PoolResult<float> maxpool3d(const BasicTensor4<float>&, Extent3, Extent3);
template PoolResult<double> maxpool3d(const BasicTensor4<double>&, Extent3, Extent3);

}  // namespace tcnn::reference
