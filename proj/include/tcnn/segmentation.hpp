#pragma once

// Bottom-up detection pieces: per-pixel foreground loss, masks to boxes,
// hard-negative selection and the clip augmentations.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tcnn/geometry.hpp"
#include "tcnn/mask.hpp"
#include "tcnn/proposals.hpp"
#include "tcnn/tensor.hpp"

namespace tcnn {

/// Frames are 3 x D x H x W RGB with values in [0, 1].
struct ClipSample {
  Tensor4 frames;
  std::vector<SegMask> masks;             // empty or one per frame
  std::vector<std::optional<Box>> boxes;  // empty or one per frame
  int label = -1;
};

/// Throws when masks or boxes do not line up with the frames.
void validate_clip(const ClipSample& clip);

/// Tightest box around the foreground; nullopt for an empty mask.
std::optional<Box> mask_to_box(const SegMask& mask);

template <typename T>
struct SegLoss {
  double loss = 0.0;
  BasicTensor4<T> grad;
};

/// Mean two-class cross-entropy over all pixels of `logits` (2 x D x H x W,
/// channel 1 = foreground). `fg_weight` scales the foreground pixels' terms.
template <typename T>
SegLoss<T> segmentation_loss(const BasicTensor4<T>& logits, std::span<const SegMask> gt,
                             double fg_weight = 1.0);

/// Foreground probability per pixel from two-class logits.
Tensor4 foreground_probability(const Tensor4& logits);

/// Pixels with foreground probability above `threshold`.
std::vector<SegMask> logits_to_masks(const Tensor4& logits, double threshold = 0.5);

/// The `pool_size` highest-actionness boxes, input order on ties.
std::vector<Box> hard_negative_mine(std::span<const LabeledBox> negatives, int pool_size);

struct Hsv {
  double h = 0, s = 0, v = 0;
};
Hsv rgb_to_hsv(double r, double g, double b);
void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b);

/// Scales V by `a` in HSV space, clamping V to [0, 1].
ClipSample augment_illumination(const ClipSample& clip, double a);
/// As above with a ~ U[0.9, 1.1] drawn once from `seed`.
ClipSample augment_illumination(const ClipSample& clip, std::uint64_t seed);

enum class Side { top, bottom, left, right };

/// Replaces the chosen half of each frame's foreground (split at the middle
/// of the foreground box) with the nearest background pixel and clears it
/// from the mask. Requires masks and some background in every frame that
/// has foreground.
ClipSample augment_background_replace(const ClipSample& clip, Side side);

/// Optional horizontal mirror, then a translation by (dx, dy) in
/// {-1, 0, 1}; vacated rows/columns repeat the edge. Frames, masks and boxes
/// move together; boxes are recomputed from the masks when masks exist.
ClipSample augment_flip_shift(const ClipSample& clip, bool flip, int dx, int dy);

}  // namespace tcnn
