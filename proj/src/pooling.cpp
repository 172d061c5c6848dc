#include <limits>

#include "tcnn/kernels.hpp"

namespace tcnn {

namespace {

int pooled_extent(int in, int k, int s) { return (in - k + s - 1) / s + 1; }

}  // namespace

Shape4 maxpool3d_output_shape(const Shape4& in, Extent3 k, Extent3 s) {
  if (k.d < 1 || k.h < 1 || k.w < 1 || s.d < 1 || s.h < 1 || s.w < 1)
    throw ShapeError("maxpool3d: kernel and stride extents must be >= 1");
  if (k.d > in.d || k.h > in.h || k.w > in.w)
    throw ShapeError("maxpool3d: kernel " + std::to_string(k.d) + "x" + std::to_string(k.h) +
                     "x" + std::to_string(k.w) + " larger than input " + in.str());
  return Shape4{in.c, pooled_extent(in.d, k.d, s.d), pooled_extent(in.h, k.h, s.h),
                pooled_extent(in.w, k.w, s.w)};
}

template <typename T>
PoolResult<T> maxpool3d(const BasicTensor4<T>& input, Extent3 k, Extent3 s) {
  const Shape4 in = input.shape();
  const Shape4 os = maxpool3d_output_shape(in, k, s);
  PoolResult<T> r{BasicTensor4<T>(os), ArgmaxMap{in, os, std::vector<std::int64_t>(os.size())}};
  T* out = r.output.data();
  std::int64_t* arg = r.argmax.index.data();
  const T* x = input.data();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < os.c; ++c)
    for (int z = 0; z < os.d; ++z) {
      const int z0 = z * s.d, z1 = std::min(z0 + k.d, in.d);
      for (int y = 0; y < os.h; ++y) {
        const int y0 = y * s.h, y1 = std::min(y0 + k.h, in.h);
        for (int xo = 0; xo < os.w; ++xo) {
          const int x0 = xo * s.w, x1 = std::min(x0 + k.w, in.w);
          // Scan in increasing flat index; strict > keeps the lowest index on ties.
          std::size_t best_i = input.index(c, z0, y0, x0);
          T best = x[best_i];
          for (int zz = z0; zz < z1; ++zz)
            for (int yy = y0; yy < y1; ++yy) {
              const std::size_t row = input.index(c, zz, yy, 0);
              for (int xx = x0; xx < x1; ++xx) {
                const T v = x[row + xx];
                if (v > best) {
                  best = v;
                  best_i = row + xx;
                }
              }
            }
          const std::size_t o = r.output.index(c, z, y, xo);
          out[o] = best;
          arg[o] = static_cast<std::int64_t>(best_i);
        }
      }
    }
  return r;
}

template <typename T>
BasicTensor4<T> route_gradient(const BasicTensor4<T>& grad_output, const ArgmaxMap& map) {
  require_same_shape(map.output, grad_output.shape(), "route_gradient grad_output");
  if (map.index.size() != map.output.size())
    throw ShapeError("route_gradient: argmax map holds " + std::to_string(map.index.size()) +
                     " entries for output " + map.output.str());
  BasicTensor4<T> grad(map.source);
  const std::size_t n = grad.size();
  // Sequential scatter keeps the summation order fixed.
  for (std::size_t j = 0; j < map.index.size(); ++j) {
    const auto i = map.index[j];
    if (i < 0 || static_cast<std::size_t>(i) >= n)
      throw ShapeError("route_gradient: argmax index " + std::to_string(i) + " outside source " +
                       map.source.str());
    grad[static_cast<std::size_t>(i)] += grad_output[j];
  }
  return grad;
}

template PoolResult<float> maxpool3d(const BasicTensor4<float>&, Extent3, Extent3);
template PoolResult<double> maxpool3d(const BasicTensor4<double>&, Extent3, Extent3);
template BasicTensor4<float> route_gradient(const BasicTensor4<float>&, const ArgmaxMap&);
template BasicTensor4<double> route_gradient(const BasicTensor4<double>&, const ArgmaxMap&);

}  // namespace tcnn
