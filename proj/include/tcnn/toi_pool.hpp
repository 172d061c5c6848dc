#pragma once

// Tube-of-Interest pooling: each frame's box is max-pooled into an H x W
// grid, then groups of adjacent frames are max-pooled into D bins. The
// recorded argmax refers straight back to the input cube, so the backward
// pass is a single gradient scatter.

#include <vector>

#include "tcnn/geometry.hpp"
#include "tcnn/kernels.hpp"

namespace tcnn {

/// Half-open [start, end) range of one pooling bin.
struct Bin {
  int start = 0;
  int end = 0;
  friend bool operator==(const Bin&, const Bin&) = default;
};

/// Splits [0, extent) into `bins` contiguous ranges with start_k =
/// floor(k * extent / bins). When extent < bins the empty ranges are widened
/// to one element, clamped into the extent, so neighbouring bins may share
/// an element.
std::vector<Bin> bin_edges(int extent, int bins);

/// Pools `features` (C x d x h x w) over `tube` (d boxes) to C x D x H x W.
template <typename T>
PoolResult<T> toi_pool_forward(const BasicTensor4<T>& features, const Tube& tube,
                               Extent3 out_shape);

/// dL/dx_i = sum of dL/dy_j over the outputs j whose argmax is i.
template <typename T>
BasicTensor4<T> toi_pool_backward(const BasicTensor4<T>& grad_output, const ArgmaxMap& map,
                                  const Shape4& input_shape);

/// Tube whose every box covers the full h x w frame.
Tube full_frame_tube(int depth, int h, int w);

}  // namespace tcnn
