#pragma once

// 3D sub-pixel upsampling. A convolution at low resolution expands C^L
// channels to p_d*p_h*p_w*C^L; a fixed channel-to-space&depth permutation
// then moves each group of channels into a p_d x p_h x p_w block of the high
// resolution cube. The un-pool + convolution path is kept as the baseline.

#include <random>

#include "tcnn/kernels.hpp"

namespace tcnn {

struct UpscaleFactors {
  int d = 2;
  int h = 2;
  int w = 2;

  UpscaleFactors() = default;
  UpscaleFactors(int pd, int ph, int pw);

  int product() const { return d * h * w; }
  friend bool operator==(const UpscaleFactors&, const UpscaleFactors&) = default;
};

/// Position in a C x D x H x W cube.
struct Index4 {
  int c = 0, d = 0, h = 0, w = 0;
  friend bool operator==(const Index4&, const Index4&) = default;
};

/// Where high-resolution element (c, i, j, k) is read from in the
/// channel-expanded low-resolution cube:
///   c' = c*p_d*p_h*p_w + mod(i, p_d) + p_d*mod(j, p_h) + p_d*p_h*mod(k, p_w)
///   i' = floor(i / p_d), j' = floor(j / p_h), k' = floor(k / p_w)
/// With p_d == p_w this is exactly the mixed-radix layout of the original
/// 3D sub-pixel formulation; weighting the height digit by p_d (rather than
/// p_w) keeps the map a bijection for every factor combination.
Index4 subpixel_source(const Index4& hr, const UpscaleFactors& p);

Shape4 spacedepth_output_shape(const Shape4& expanded, const UpscaleFactors& p);

template <typename T>
BasicTensor4<T> channel_to_spacedepth(const BasicTensor4<T>& expanded, const UpscaleFactors& p);

/// Adjoint (and inverse) of channel_to_spacedepth.
template <typename T>
BasicTensor4<T> channel_to_spacedepth_backward(const BasicTensor4<T>& grad_hr,
                                               const UpscaleFactors& p);

/// Convolution with "same" padding (floor(k/2) per axis) followed by the
/// channel-to-space&depth permutation.
template <typename T>
BasicTensor4<T> subpixel_upsample3d(const BasicTensor4<T>& lr, const BasicKernelSet<T>& kernels,
                                    const UpscaleFactors& p);

template <typename T>
ConvGrads<T> subpixel_upsample3d_backward(const BasicTensor4<T>& lr,
                                          const BasicKernelSet<T>& kernels,
                                          const BasicTensor4<T>& grad_hr,
                                          const UpscaleFactors& p);

ConvGeometry same_padding(Extent3 kernel);

/// Scatters each low-resolution value to the high-resolution position the
/// map records for it; every other position is zero. `map` comes from a max
/// pool whose output grid equals the low-resolution grid. When the map has
/// fewer channels than `lr`, channel c uses the map's channel c mod C_map.
template <typename T>
BasicTensor4<T> unpool_scatter(const BasicTensor4<T>& lr, const ArgmaxMap& map,
                               const UpscaleFactors& p);

/// Gathers the high-resolution gradient back to the low-resolution cube.
template <typename T>
BasicTensor4<T> unpool_scatter_backward(const BasicTensor4<T>& grad_hr, const ArgmaxMap& map,
                                        const Shape4& lr_shape, const UpscaleFactors& p);

/// Un-pooling followed by a same-padded convolution.
template <typename T>
BasicTensor4<T> unpool_conv3d_reference(const BasicTensor4<T>& lr, const ArgmaxMap& map,
                                        const BasicKernelSet<T>& kernels,
                                        const UpscaleFactors& p);

template <typename T>
ConvGrads<T> unpool_conv3d_backward(const BasicTensor4<T>& lr, const ArgmaxMap& map,
                                    const BasicKernelSet<T>& kernels,
                                    const BasicTensor4<T>& grad_hr, const UpscaleFactors& p);

/// Placement map choosing one random position inside each p_d x p_h x p_w
/// block, for exercising the un-pool path without an encoder.
ArgmaxMap random_placement_map(const Shape4& lr_shape, const UpscaleFactors& p,
                               std::mt19937_64& rng);

}  // namespace tcnn
