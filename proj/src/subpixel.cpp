#include "tcnn/subpixel.hpp"

#include <stdexcept>

namespace tcnn {

UpscaleFactors::UpscaleFactors(int pd, int ph, int pw) : d(pd), h(ph), w(pw) {
  if (pd < 1 || ph < 1 || pw < 1)
    throw std::invalid_argument("UpscaleFactors: factors must be >= 1, got (" +
                                std::to_string(pd) + "," + std::to_string(ph) + "," +
                                std::to_string(pw) + ")");
}

Index4 subpixel_source(const Index4& hr, const UpscaleFactors& p) {
  return Index4{hr.c * p.product() + hr.d % p.d + p.d * (hr.h % p.h) + p.d * p.h * (hr.w % p.w),
                hr.d / p.d, hr.h / p.h, hr.w / p.w};
}

Shape4 spacedepth_output_shape(const Shape4& e, const UpscaleFactors& p) {
  if (e.c % p.product() != 0)
    throw ShapeError("channel_to_spacedepth: " + std::to_string(e.c) +
                     " channels not divisible by p_d*p_h*p_w = " + std::to_string(p.product()));
  return Shape4{e.c / p.product(), e.d * p.d, e.h * p.h, e.w * p.w};
}

namespace {

// Visits every HR element with its flat source index in the expanded cube.
template <typename F>
void for_each_mapping(const Shape4& hr, const Shape4& expanded, const UpscaleFactors& p, F&& f) {
  std::size_t o = 0;
  for (int c = 0; c < hr.c; ++c)
    for (int i = 0; i < hr.d; ++i)
      for (int j = 0; j < hr.h; ++j)
        for (int k = 0; k < hr.w; ++k, ++o) {
          const Index4 s = subpixel_source(Index4{c, i, j, k}, p);
          const std::size_t src =
              ((static_cast<std::size_t>(s.c) * expanded.d + s.d) * expanded.h + s.h) *
                  expanded.w +
              s.w;
          f(o, src);
        }
}

}  // namespace

template <typename T>
BasicTensor4<T> channel_to_spacedepth(const BasicTensor4<T>& expanded, const UpscaleFactors& p) {
  const Shape4 hr = spacedepth_output_shape(expanded.shape(), p);
  BasicTensor4<T> out(hr);
  for_each_mapping(hr, expanded.shape(), p,
                   [&](std::size_t o, std::size_t src) { out[o] = expanded[src]; });
  return out;
}

template <typename T>
BasicTensor4<T> channel_to_spacedepth_backward(const BasicTensor4<T>& grad_hr,
                                               const UpscaleFactors& p) {
  const Shape4 hr = grad_hr.shape();
  if (hr.d % p.d || hr.h % p.h || hr.w % p.w)
    throw ShapeError("channel_to_spacedepth_backward: gradient " + hr.str() +
                     " is not a multiple of the upscale factors");
  const Shape4 expanded{hr.c * p.product(), hr.d / p.d, hr.h / p.h, hr.w / p.w};
  BasicTensor4<T> out(expanded);
  for_each_mapping(hr, expanded, p, [&](std::size_t o, std::size_t src) { out[src] += grad_hr[o]; });
  return out;
}

ConvGeometry same_padding(Extent3 k) {
  return ConvGeometry{{1, 1, 1}, {k.d / 2, k.h / 2, k.w / 2}};
}

template <typename T>
BasicTensor4<T> subpixel_upsample3d(const BasicTensor4<T>& lr, const BasicKernelSet<T>& kernels,
                                    const UpscaleFactors& p) {
  if (kernels.out_channels % p.product() != 0)
    throw ShapeError("subpixel_upsample3d: " + std::to_string(kernels.out_channels) +
                     " expansion channels not divisible by " + std::to_string(p.product()));
  return channel_to_spacedepth(conv3d(lr, kernels, same_padding(kernels.size)), p);
}

template <typename T>
ConvGrads<T> subpixel_upsample3d_backward(const BasicTensor4<T>& lr,
                                          const BasicKernelSet<T>& kernels,
                                          const BasicTensor4<T>& grad_hr,
                                          const UpscaleFactors& p) {
  const BasicTensor4<T> g = channel_to_spacedepth_backward(grad_hr, p);
  return conv3d_backward(lr, kernels, g, same_padding(kernels.size));
}

namespace {

Shape4 unpool_target(const Shape4& lr, const ArgmaxMap& map, const UpscaleFactors& p) {
  if (map.index.size() != map.output.size())
    throw ShapeError("unpool: placement map is inconsistent");
  if (map.output.d != lr.d || map.output.h != lr.h || map.output.w != lr.w)
    throw ShapeError("unpool: placement map grid " + map.output.str() +
                     " does not match low-resolution cube " + lr.str());
  return Shape4{lr.c, lr.d * p.d, lr.h * p.h, lr.w * p.w};
}

// HR flat index for LR element (c, rest) given the map entry.
template <typename F>
void for_each_placement(const Shape4& lr, const ArgmaxMap& map, const Shape4& hr, F&& f) {
  const Shape4 src = map.source;
  const std::size_t lr_vol = lr.volume();
  const std::size_t src_vol = src.volume();
  for (int c = 0; c < lr.c; ++c) {
    const int m = c % map.output.c;
    for (std::size_t v = 0; v < lr_vol; ++v) {
      const std::int64_t flat = map.index[static_cast<std::size_t>(m) * lr_vol + v];
      const std::size_t within = static_cast<std::size_t>(flat) - static_cast<std::size_t>(m) * src_vol;
      if (flat < 0 || within >= src_vol)
        throw ShapeError("unpool: placement index " + std::to_string(flat) +
                         " outside its source channel");
      const int z = static_cast<int>(within / src.plane());
      const int y = static_cast<int>((within / src.w) % src.h);
      const int x = static_cast<int>(within % src.w);
      if (z >= hr.d || y >= hr.h || x >= hr.w)
        throw ShapeError("unpool: placement (" + std::to_string(z) + "," + std::to_string(y) +
                         "," + std::to_string(x) + ") outside high-resolution grid " + hr.str());
      const std::size_t o = ((static_cast<std::size_t>(c) * hr.d + z) * hr.h + y) * hr.w + x;
      f(static_cast<std::size_t>(c) * lr_vol + v, o);
    }
  }
}

}  // namespace

template <typename T>
BasicTensor4<T> unpool_scatter(const BasicTensor4<T>& lr, const ArgmaxMap& map,
                               const UpscaleFactors& p) {
  const Shape4 hr = unpool_target(lr.shape(), map, p);
  BasicTensor4<T> out(hr);
  for_each_placement(lr.shape(), map, hr, [&](std::size_t i, std::size_t o) { out[o] += lr[i]; });
  return out;
}

template <typename T>
BasicTensor4<T> unpool_scatter_backward(const BasicTensor4<T>& grad_hr, const ArgmaxMap& map,
                                        const Shape4& lr_shape, const UpscaleFactors& p) {
  const Shape4 hr = unpool_target(lr_shape, map, p);
  require_same_shape(hr, grad_hr.shape(), "unpool_scatter_backward gradient");
  BasicTensor4<T> out(lr_shape);
  for_each_placement(lr_shape, map, hr, [&](std::size_t i, std::size_t o) { out[i] = grad_hr[o]; });
  return out;
}

template <typename T>
BasicTensor4<T> unpool_conv3d_reference(const BasicTensor4<T>& lr, const ArgmaxMap& map,
                                        const BasicKernelSet<T>& kernels,
                                        const UpscaleFactors& p) {
  return conv3d(unpool_scatter(lr, map, p), kernels, same_padding(kernels.size));
}

template <typename T>
ConvGrads<T> unpool_conv3d_backward(const BasicTensor4<T>& lr, const ArgmaxMap& map,
                                    const BasicKernelSet<T>& kernels,
                                    const BasicTensor4<T>& grad_hr, const UpscaleFactors& p) {
  const BasicTensor4<T> hr = unpool_scatter(lr, map, p);
  ConvGrads<T> g = conv3d_backward(hr, kernels, grad_hr, same_padding(kernels.size));
  g.input = unpool_scatter_backward(g.input, map, lr.shape(), p);
  return g;
}

ArgmaxMap random_placement_map(const Shape4& lr, const UpscaleFactors& p, std::mt19937_64& rng) {
  const Shape4 hr{lr.c, lr.d * p.d, lr.h * p.h, lr.w * p.w};
  ArgmaxMap map{hr, lr, std::vector<std::int64_t>(lr.size())};
  std::size_t o = 0;
  for (int c = 0; c < lr.c; ++c)
    for (int i = 0; i < lr.d; ++i)
      for (int j = 0; j < lr.h; ++j)
        for (int k = 0; k < lr.w; ++k, ++o) {
          const int z = i * p.d + static_cast<int>(rng() % static_cast<unsigned>(p.d));
          const int y = j * p.h + static_cast<int>(rng() % static_cast<unsigned>(p.h));
          const int x = k * p.w + static_cast<int>(rng() % static_cast<unsigned>(p.w));
          map.index[o] = static_cast<std::int64_t>(
              ((static_cast<std::size_t>(c) * hr.d + z) * hr.h + y) * hr.w + x);
        }
  return map;
}

#define TCNN_INSTANTIATE(T)                                                                      \
  template BasicTensor4<T> channel_to_spacedepth(const BasicTensor4<T>&, const UpscaleFactors&); \
  template BasicTensor4<T> channel_to_spacedepth_backward(const BasicTensor4<T>&,                \
                                                          const UpscaleFactors&);                \
  template BasicTensor4<T> subpixel_upsample3d(const BasicTensor4<T>&, const BasicKernelSet<T>&, \
                                               const UpscaleFactors&);                           \
  template ConvGrads<T> subpixel_upsample3d_backward(                                            \
      const BasicTensor4<T>&, const BasicKernelSet<T>&, const BasicTensor4<T>&,                  \
      const UpscaleFactors&);                                                                    \
  template BasicTensor4<T> unpool_scatter(const BasicTensor4<T>&, const ArgmaxMap&,              \
                                          const UpscaleFactors&);                                \
  template BasicTensor4<T> unpool_scatter_backward(const BasicTensor4<T>&, const ArgmaxMap&,     \
                                                   const Shape4&, const UpscaleFactors&);        \
  template BasicTensor4<T> unpool_conv3d_reference(const BasicTensor4<T>&, const ArgmaxMap&,     \
                                                   const BasicKernelSet<T>&,                     \
                                                   const UpscaleFactors&);                       \
  template ConvGrads<T> unpool_conv3d_backward(const BasicTensor4<T>&, const ArgmaxMap&,         \
                                               const BasicKernelSet<T>&, const BasicTensor4<T>&, \
                                               const UpscaleFactors&);

TCNN_INSTANTIATE(float)
TCNN_INSTANTIATE(double)
#undef TCNN_INSTANTIATE

}  // namespace tcnn
