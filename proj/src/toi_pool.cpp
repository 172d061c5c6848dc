#include "tcnn/toi_pool.hpp"

#include <stdexcept>

namespace tcnn {

std::vector<Bin> bin_edges(int extent, int bins) {
  if (extent < 1 || bins < 1)
    throw std::invalid_argument("bin_edges: extent and bins must be >= 1 (got " +
                                std::to_string(extent) + ", " + std::to_string(bins) + ")");
  std::vector<Bin> out(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    int start = static_cast<int>(static_cast<long long>(k) * extent / bins);
    int end = static_cast<int>(static_cast<long long>(k + 1) * extent / bins);
    start = std::min(start, extent - 1);
    end = std::max(end, start + 1);
    out[k] = Bin{start, end};
  }
  return out;
}

Tube full_frame_tube(int depth, int h, int w) {
  return Tube(static_cast<std::size_t>(depth), CellBox{0, 0, w - 1, h - 1});
}

template <typename T>
PoolResult<T> toi_pool_forward(const BasicTensor4<T>& features, const Tube& tube,
                               Extent3 out) {
  const Shape4 in = features.shape();
  if (static_cast<int>(tube.size()) != in.d)
    throw ShapeError("toi_pool: tube has " + std::to_string(tube.size()) +
                     " boxes but the feature cube " + in.str() + " has depth " +
                     std::to_string(in.d));
  if (out.d < 1 || out.h < 1 || out.w < 1) throw ShapeError("toi_pool: output extents must be >= 1");
  if (out.d > in.d)
    throw ShapeError("toi_pool: output depth " + std::to_string(out.d) +
                     " exceeds tube length " + std::to_string(in.d));
  for (std::size_t f = 0; f < tube.size(); ++f) {
    const CellBox& b = tube[f];
    if (b.empty()) throw std::invalid_argument("toi_pool: empty box " + b.str() + " in frame " + std::to_string(f));
    if (!b.inside(in.h, in.w))
      throw std::invalid_argument("toi_pool: box " + b.str() + " in frame " + std::to_string(f) +
                                  " outside the " + std::to_string(in.h) + "x" +
                                  std::to_string(in.w) + " feature map");
  }

  // Per-frame spatial bins.
  std::vector<std::vector<Bin>> ybins(tube.size()), xbins(tube.size());
  for (std::size_t f = 0; f < tube.size(); ++f) {
    ybins[f] = bin_edges(tube[f].height(), out.h);
    xbins[f] = bin_edges(tube[f].width(), out.w);
  }
  const std::vector<Bin> tbins = bin_edges(in.d, out.d);

  const Shape4 os{in.c, out.d, out.h, out.w};
  PoolResult<T> r{BasicTensor4<T>(os), ArgmaxMap{in, os, std::vector<std::int64_t>(os.size())}};
  const T* x = features.data();

#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.c; ++c) {
    // Stage 1: spatial max per frame.
    std::vector<T> stage(static_cast<std::size_t>(in.d) * out.h * out.w);
    std::vector<std::int64_t> stage_arg(stage.size());
    for (int f = 0; f < in.d; ++f) {
      const CellBox& b = tube[f];
      for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) {
          const int y0 = b.y1 + ybins[f][i].start, y1 = b.y1 + ybins[f][i].end;
          const int x0 = b.x1 + xbins[f][j].start, x1 = b.x1 + xbins[f][j].end;
          std::size_t best_i = features.index(c, f, y0, x0);
          T best = x[best_i];
          for (int y = y0; y < y1; ++y) {
            const std::size_t row = features.index(c, f, y, 0);
            for (int xx = x0; xx < x1; ++xx)
              if (x[row + xx] > best) {
                best = x[row + xx];
                best_i = row + xx;
              }
          }
          const std::size_t s = (static_cast<std::size_t>(f) * out.h + i) * out.w + j;
          stage[s] = best;
          stage_arg[s] = static_cast<std::int64_t>(best_i);
        }
    }
    // Stage 2: temporal max over groups of frames; the earliest frame wins ties.
    for (int k = 0; k < out.d; ++k)
      for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) {
          std::size_t s = (static_cast<std::size_t>(tbins[k].start) * out.h + i) * out.w + j;
          T best = stage[s];
          std::int64_t arg = stage_arg[s];
          for (int f = tbins[k].start + 1; f < tbins[k].end; ++f) {
            s = (static_cast<std::size_t>(f) * out.h + i) * out.w + j;
            if (stage[s] > best) {
              best = stage[s];
              arg = stage_arg[s];
            }
          }
          const std::size_t o = r.output.index(c, k, i, j);
          r.output[o] = best;
          r.argmax.index[o] = arg;
        }
  }
  return r;
}

template <typename T>
BasicTensor4<T> toi_pool_backward(const BasicTensor4<T>& grad_output, const ArgmaxMap& map,
                                  const Shape4& input_shape) {
  require_same_shape(map.source, input_shape, "toi_pool_backward input");
  return route_gradient(grad_output, map);
}

template PoolResult<float> toi_pool_forward(const BasicTensor4<float>&, const Tube&, Extent3);
template PoolResult<double> toi_pool_forward(const BasicTensor4<double>&, const Tube&, Extent3);
template BasicTensor4<float> toi_pool_backward(const BasicTensor4<float>&, const ArgmaxMap&,
                                               const Shape4&);
template BasicTensor4<double> toi_pool_backward(const BasicTensor4<double>&, const ArgmaxMap&,
                                                const Shape4&);

}  // namespace tcnn
