#include <algorithm>
#include <cstring>

#include "tcnn/kernels.hpp"
#include "tcnn/reference.hpp"

namespace tcnn {

namespace {

#if defined(__AVX512F__)
constexpr int kVecBytes = 64;
#elif defined(__AVX__)
constexpr int kVecBytes = 32;
#else
constexpr int kVecBytes = 16;
#endif

template <typename T>
struct Vec;
template <>
struct Vec<float> {
  typedef float type __attribute__((vector_size(kVecBytes)));
  static constexpr int lanes = kVecBytes / 4;
};
template <>
struct Vec<double> {
  typedef double type __attribute__((vector_size(kVecBytes)));
  static constexpr int lanes = kVecBytes / 8;
};

template <typename T>
inline typename Vec<T>::type load(const T* p) {
  typename Vec<T>::type v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

// Output channels computed together by one forward micro-kernel call, and
// vectors per position tile.
constexpr int kOutBlock = 8;
constexpr int kTileVecs = 2;

template <typename T>
struct Padded {
  std::vector<T> buf;
  int pd = 0, ph = 0, pw = 0;
  std::size_t plane = 0;
  std::size_t chan = 0;
};

// Zero-padded copy with trailing slack so vector loads may run past the
// last plane.
template <typename T>
Padded<T> pad_input(const BasicTensor4<T>& x, Extent3 pad, std::size_t slack) {
  const Shape4 s = x.shape();
  Padded<T> p;
  p.pd = s.d + 2 * pad.d;
  p.ph = s.h + 2 * pad.h;
  p.pw = s.w + 2 * pad.w;
  p.plane = static_cast<std::size_t>(p.ph) * p.pw;
  p.chan = p.plane * p.pd;
  p.buf.assign(p.chan * s.c + slack, T{});
  for (int c = 0; c < s.c; ++c)
    for (int z = 0; z < s.d; ++z)
      for (int y = 0; y < s.h; ++y) {
        const T* src = x.data() + x.index(c, z, y, 0);
        T* dst = p.buf.data() + c * p.chan + (z + pad.d) * p.plane +
                 static_cast<std::size_t>(y + pad.h) * p.pw + pad.w;
        std::copy(src, src + s.w, dst);
      }
  return p;
}

// packed[block][ic][tap][b] = w[block * kOutBlock + b][ic][tap]
template <typename T>
std::vector<T> pack_weights(const BasicKernelSet<T>& k) {
  const int blocks = (k.out_channels + kOutBlock - 1) / kOutBlock;
  const std::size_t taps = k.taps();
  std::vector<T> packed(static_cast<std::size_t>(blocks) * k.in_channels * taps * kOutBlock, T{});
  for (int o = 0; o < k.out_channels; ++o) {
    const int blk = o / kOutBlock, b = o % kOutBlock;
    for (int i = 0; i < k.in_channels; ++i)
      for (std::size_t t = 0; t < taps; ++t)
        packed[((static_cast<std::size_t>(blk) * k.in_channels + i) * taps + t) * kOutBlock + b] =
            k.weights[(static_cast<std::size_t>(o) * k.in_channels + i) * taps + t];
  }
  return packed;
}

// One output depth slice for one block of output channels. Positions are
// enumerated over the padded plane (row pitch = padded width); columns past
// the valid output width are computed and discarded.
template <typename T>
void forward_slice(const Padded<T>& in, int in_channels, Extent3 ks, const T* packed_block,
                   const T* bias, int block_count, int od, const Shape4& os, T* out_base) {
  using V = typename Vec<T>::type;
  constexpr int L = Vec<T>::lanes;
  constexpr int tile = L * kTileVecs;
  const int pw = in.pw;
  const std::size_t limit = static_cast<std::size_t>(os.h - 1) * pw + os.w;
  const std::size_t taps = static_cast<std::size_t>(ks.d) * ks.h * ks.w;
  const std::size_t out_plane = os.plane();
  const std::size_t out_chan = os.volume();
  alignas(64) T scratch[kOutBlock][tile];

  for (std::size_t p0 = 0; p0 < limit; p0 += tile) {
    V acc[kOutBlock][kTileVecs];
    for (int b = 0; b < kOutBlock; ++b)
      for (int u = 0; u < kTileVecs; ++u) {
        V v;
        for (int l = 0; l < L; ++l) v[l] = bias[b];
        acc[b][u] = v;
      }
    for (int ic = 0; ic < in_channels; ++ic) {
      const T* wic = packed_block + static_cast<std::size_t>(ic) * taps * kOutBlock;
      for (int a = 0; a < ks.d; ++a) {
        const T* base = in.buf.data() + ic * in.chan + (od + a) * in.plane + p0;
        const T* wa = wic + static_cast<std::size_t>(a) * ks.h * ks.w * kOutBlock;
        for (int r = 0; r < ks.h; ++r)
          for (int c = 0; c < ks.w; ++c) {
            const T* src = base + static_cast<std::size_t>(r) * pw + c;
            const T* wt = wa + (static_cast<std::size_t>(r) * ks.w + c) * kOutBlock;
            V x[kTileVecs];
            for (int u = 0; u < kTileVecs; ++u) x[u] = load(src + u * L);
            for (int b = 0; b < kOutBlock; ++b) {
              const T w = wt[b];
              for (int u = 0; u < kTileVecs; ++u) acc[b][u] += x[u] * w;
            }
          }
      }
    }
    for (int b = 0; b < block_count; ++b)
      for (int u = 0; u < kTileVecs; ++u) std::memcpy(&scratch[b][u * L], &acc[b][u], sizeof(V));

    std::size_t row = p0 / pw;
    std::size_t col = p0 - row * pw;
    const std::size_t n = std::min<std::size_t>(tile, limit - p0);
    for (std::size_t t = 0; t < n; ++t) {
      if (col < static_cast<std::size_t>(os.w)) {
        const std::size_t o = static_cast<std::size_t>(od) * out_plane + row * os.w + col;
        for (int b = 0; b < block_count; ++b) out_base[b * out_chan + o] = scratch[b][t];
      }
      if (++col == static_cast<std::size_t>(pw)) {
        col = 0;
        ++row;
      }
    }
  }
}

template <typename T>
BasicTensor4<T> conv3d_stride1(const BasicTensor4<T>& input, const BasicKernelSet<T>& k,
                               Extent3 pad) {
  const Shape4 in = input.shape();
  const Shape4 os =
      conv3d_output_shape(in, k.out_channels, k.size, ConvGeometry{{1, 1, 1}, pad});
  constexpr int tile = Vec<T>::lanes * kTileVecs;
  const Padded<T> p = pad_input(input, pad, static_cast<std::size_t>(tile) + 2 * (in.w + 2 * pad.w));
  const std::vector<T> packed = pack_weights(k);
  const int blocks = (k.out_channels + kOutBlock - 1) / kOutBlock;
  const std::size_t block_stride = static_cast<std::size_t>(k.in_channels) * k.taps() * kOutBlock;

  BasicTensor4<T> out(os);
  T* out_data = out.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (int blk = 0; blk < blocks; ++blk)
    for (int od = 0; od < os.d; ++od) {
      T bias[kOutBlock] = {};
      const int count = std::min(kOutBlock, k.out_channels - blk * kOutBlock);
      for (int b = 0; b < count; ++b) bias[b] = k.bias[blk * kOutBlock + b];
      forward_slice(p, k.in_channels, k.size, packed.data() + blk * block_stride, bias, count, od,
                    os, out_data + static_cast<std::size_t>(blk) * kOutBlock * os.volume());
    }
  return out;
}

// Weight gradient for stride 1: grad_out is re-laid on the padded row pitch
// (zeros in the discarded columns) so every tap is a shifted dot product.
template <typename T, int Taps>
void weight_grad_block(const Padded<T>& in, const std::vector<T>& gp, std::size_t gplane,
                       int od_count, int o, int ic, Extent3 ks, std::vector<double>& out) {
  using V = typename Vec<T>::type;
  constexpr int L = Vec<T>::lanes;
  const std::size_t taps2 = static_cast<std::size_t>(ks.h) * ks.w;
  std::size_t off[Taps] = {};
  for (int r = 0, t = 0; r < ks.h; ++r)
    for (int c = 0; c < ks.w; ++c, ++t) off[t] = static_cast<std::size_t>(r) * in.pw + c;

  for (int a = 0; a < ks.d; ++a) {
    double total[Taps] = {};
    for (int od = 0; od < od_count; ++od) {
      V acc[Taps];
      for (int t = 0; t < Taps; ++t) acc[t] = V{};
      const T* g = gp.data() + (static_cast<std::size_t>(o) * od_count + od) * gplane;
      const T* x = in.buf.data() + ic * in.chan + (od + a) * in.plane;
      for (std::size_t pos = 0; pos < gplane; pos += L) {
        const V gv = load(g + pos);
        for (int t = 0; t < Taps; ++t) acc[t] += gv * load(x + pos + off[t]);
      }
      for (int t = 0; t < Taps; ++t) {
        double s = 0.0;
        for (int l = 0; l < L; ++l) s += acc[t][l];
        total[t] += s;
      }
    }
    for (std::size_t t = 0; t < taps2; ++t) out[a * taps2 + t] = total[t];
  }
}

template <typename T>
void weight_grad_generic(const Padded<T>& in, const std::vector<T>& gp, std::size_t gplane,
                         int od_count, int o, int ic, Extent3 ks, std::vector<double>& out) {
  using V = typename Vec<T>::type;
  constexpr int L = Vec<T>::lanes;
  for (int a = 0; a < ks.d; ++a)
    for (int r = 0; r < ks.h; ++r)
      for (int c = 0; c < ks.w; ++c) {
        double total = 0.0;
        const std::size_t off = static_cast<std::size_t>(r) * in.pw + c;
        for (int od = 0; od < od_count; ++od) {
          V acc = V{};
          const T* g = gp.data() + (static_cast<std::size_t>(o) * od_count + od) * gplane;
          const T* x = in.buf.data() + ic * in.chan + (od + a) * in.plane + off;
          for (std::size_t pos = 0; pos < gplane; pos += L) acc += load(g + pos) * load(x + pos);
          double s = 0.0;
          for (int l = 0; l < L; ++l) s += acc[l];
          total += s;
        }
        out[(static_cast<std::size_t>(a) * ks.h + r) * ks.w + c] = total;
      }
}

template <typename T>
ConvGrads<T> conv3d_backward_stride1(const BasicTensor4<T>& input, const BasicKernelSet<T>& k,
                                     const BasicTensor4<T>& grad_out, Extent3 pad,
                                     bool want_input_grad) {
  constexpr int L = Vec<T>::lanes;
  const Shape4 in = input.shape();
  const Shape4 os = grad_out.shape();
  ConvGrads<T> r;

  if (want_input_grad) {
    // Full correlation with flipped, transposed kernels.
    BasicKernelSet<T> flipped(k.in_channels, k.out_channels, k.size);
    for (int o = 0; o < k.out_channels; ++o)
      for (int i = 0; i < k.in_channels; ++i)
        for (int a = 0; a < k.size.d; ++a)
          for (int b = 0; b < k.size.h; ++b)
            for (int c = 0; c < k.size.w; ++c)
              flipped.weight(i, o, k.size.d - 1 - a, k.size.h - 1 - b, k.size.w - 1 - c) =
                  k.weight(o, i, a, b, c);
    const Extent3 full{k.size.d - 1 - pad.d, k.size.h - 1 - pad.h, k.size.w - 1 - pad.w};
    r.input = conv3d_stride1(grad_out, flipped, full);
  }

  const std::size_t gplane_raw = static_cast<std::size_t>(os.h) * (in.w + 2 * pad.w);
  const std::size_t gplane = (gplane_raw + L - 1) / L * L;
  const int pw = in.w + 2 * pad.w;
  std::vector<T> gp(static_cast<std::size_t>(os.c) * os.d * gplane, T{});
  for (int o = 0; o < os.c; ++o)
    for (int z = 0; z < os.d; ++z)
      for (int y = 0; y < os.h; ++y) {
        const T* src = grad_out.data() + grad_out.index(o, z, y, 0);
        std::copy(src, src + os.w,
                  gp.data() + (static_cast<std::size_t>(o) * os.d + z) * gplane +
                      static_cast<std::size_t>(y) * pw);
      }
  const Padded<T> p = pad_input(input, pad, gplane + 2 * static_cast<std::size_t>(pw) + L);

  r.kernels = BasicKernelSet<T>(k.out_channels, k.in_channels, k.size);
  const std::size_t taps = k.taps();
  const int taps2 = k.size.h * k.size.w;
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < k.out_channels; ++o)
    for (int i = 0; i < k.in_channels; ++i) {
      std::vector<double> acc(taps, 0.0);
      if (taps2 == 9)
        weight_grad_block<T, 9>(p, gp, gplane, os.d, o, i, k.size, acc);
      else if (taps2 == 1)
        weight_grad_block<T, 1>(p, gp, gplane, os.d, o, i, k.size, acc);
      else
        weight_grad_generic(p, gp, gplane, os.d, o, i, k.size, acc);
      T* dst = r.kernels.weights.data() + (static_cast<std::size_t>(o) * k.in_channels + i) * taps;
      for (std::size_t t = 0; t < taps; ++t) dst[t] = static_cast<T>(acc[t]);
    }
#pragma omp parallel for schedule(static)
  for (int o = 0; o < k.out_channels; ++o) {
    double s = 0.0;
    for (const T v : grad_out.channel(o)) s += v;
    r.kernels.bias[o] = static_cast<T>(s);
  }
  return r;
}

void check_conv(const Shape4& in, int in_channels, bool consistent) {
  if (!consistent) throw ShapeError("conv3d: kernel set has inconsistent weight count");
  if (in.c != in_channels)
    throw ShapeError("conv3d: input " + in.str() + " has " + std::to_string(in.c) +
                     " channels but kernels expect " + std::to_string(in_channels));
}

bool fast_path(const BasicKernelSet<float>& k, ConvGeometry g) {
  return g.stride == Extent3{1, 1, 1} && g.pad.d < k.size.d && g.pad.h < k.size.h &&
         g.pad.w < k.size.w;
}
bool fast_path(const BasicKernelSet<double>& k, ConvGeometry g) {
  return g.stride == Extent3{1, 1, 1} && g.pad.d < k.size.d && g.pad.h < k.size.h &&
         g.pad.w < k.size.w;
}

}  // namespace

Shape4 conv3d_output_shape(const Shape4& in, int out_channels, Extent3 k, ConvGeometry g) {
  if (g.stride.d < 1 || g.stride.h < 1 || g.stride.w < 1)
    throw ShapeError("conv3d: strides must be >= 1");
  if (g.pad.d < 0 || g.pad.h < 0 || g.pad.w < 0) throw ShapeError("conv3d: negative padding");
  const int d = (in.d + 2 * g.pad.d - k.d) / g.stride.d + 1;
  const int h = (in.h + 2 * g.pad.h - k.h) / g.stride.h + 1;
  const int w = (in.w + 2 * g.pad.w - k.w) / g.stride.w + 1;
  if (in.d + 2 * g.pad.d < k.d || in.h + 2 * g.pad.h < k.h || in.w + 2 * g.pad.w < k.w ||
      d < 1 || h < 1 || w < 1)
    throw ShapeError("conv3d: kernel " + std::to_string(k.d) + "x" + std::to_string(k.h) + "x" +
                     std::to_string(k.w) + " does not fit input " + in.str());
  return Shape4{out_channels, d, h, w};
}

template <typename T>
BasicTensor4<T> conv3d(const BasicTensor4<T>& input, const BasicKernelSet<T>& kernels,
                       ConvGeometry geom) {
  check_conv(input.shape(), kernels.in_channels, kernels.consistent());
  if (!fast_path(kernels, geom)) return reference::conv3d(input, kernels, geom);
  return conv3d_stride1(input, kernels, geom.pad);
}

template <typename T>
ConvGrads<T> conv3d_backward(const BasicTensor4<T>& input, const BasicKernelSet<T>& kernels,
                             const BasicTensor4<T>& grad_output, ConvGeometry geom,
                             bool want_input_grad) {
  check_conv(input.shape(), kernels.in_channels, kernels.consistent());
  const Shape4 os = conv3d_output_shape(input.shape(), kernels.out_channels, kernels.size, geom);
  require_same_shape(os, grad_output.shape(), "conv3d_backward grad_output");
  if (!fast_path(kernels, geom))
    return reference::conv3d_backward(input, kernels, grad_output, geom, want_input_grad);
  return conv3d_backward_stride1(input, kernels, grad_output, geom.pad, want_input_grad);
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

}  // namespace tcnn
