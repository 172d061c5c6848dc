#pragma once

// Tube proposal machinery: anchors learned by k-means over training boxes,
// actionness labels, box regression targets, the conv5 -> conv2 temporal skip
// mapping and the paired tube/box descriptor.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tcnn/geometry.hpp"
#include "tcnn/kernels.hpp"

namespace tcnn {

/// Box template without a position.
struct Anchor {
  double w = 1.0;
  double h = 1.0;
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

enum class AnchorDistance { iou, euclidean };

/// 1 - IoU of two boxes sharing a center.
double anchor_iou_distance(const Anchor& a, const Anchor& b);

struct KMeansOptions {
  AnchorDistance distance = AnchorDistance::iou;
  int max_iters = 100;
};

struct KMeansResult {
  std::vector<Anchor> centers;
  std::vector<int> assignment;
  /// Total distortion after the seeding step and after every iteration.
  std::vector<double> distortion;
};

/// k-means++ seeding followed by Lloyd iterations. A cluster's center moves
/// to the member mean only when that does not raise the cluster's
/// distortion, so the total never increases.
KMeansResult kmeans_anchors(std::span<const Anchor> boxes, int k, std::uint64_t seed,
                            const KMeansOptions& opts = {});

void save_anchors(const std::filesystem::path& path, std::span<const Anchor> anchors);
std::vector<Anchor> load_anchors(const std::filesystem::path& path);

/// Box of the anchor's size centred on (cx, cy).
Box anchor_box(const Anchor& a, double cx, double cy);

enum class BoxLabel { positive, negative, ignore };

struct LabeledBox {
  Box box;
  double actionness = 0.0;
  BoxLabel label = BoxLabel::negative;
};

/// A candidate is positive when its IoU with some gt box exceeds `pos_iou`
/// or when it is the best-overlapping candidate of some gt box (lowest index
/// on ties). Remaining candidates whose best IoU reaches `neg_iou` are
/// marked ignore; with neg_iou >= pos_iou every remaining one is negative.
/// Positives carry actionness 1, the rest 0.
std::vector<LabeledBox> assign_actionness_labels(std::span<const Box> candidates,
                                                 std::span<const Box> gt, double pos_iou = 0.7,
                                                 double neg_iou = 1.0);

struct RegressionTarget {
  double d_cx = 0, d_cy = 0, d_w = 0, d_h = 0;
  friend bool operator==(const RegressionTarget&, const RegressionTarget&) = default;
};

enum class RegressionParam {
  raw,  // plain differences of center, width and height
  log,  // center offsets over anchor size, log size ratios
};

RegressionTarget encode_regression(const Box& anchor, const Box& gt,
                                   RegressionParam param = RegressionParam::raw);
Box decode_regression(const Box& anchor, const RegressionTarget& t,
                      RegressionParam param = RegressionParam::raw);

/// Maps a conv5 cell box onto every slice of the conv2 cube with outward
/// rounding; the same box is repeated `depth` times.
Tube temporal_skip_map(const CellBox& box5, int conv5_h, int conv5_w, int conv2_h, int conv2_w,
                       int depth = 8);

struct PairDims {
  Extent3 tube{8, 8, 8};
  Extent3 box{1, 4, 4};
};

/// Paired tube/box descriptor arranged per frame. Channel layout of
/// `paired` (depth D, 1 x 1 spatial): the C2*H*W tube slice of frame d
/// followed by the C5*h*w conv5 box, the box repeated for every frame. Each
/// half is scaled to unit L2 norm over all frames; an all-zero half stays
/// zero.
struct PairedFeatures {
  Tensor4 paired;
  PoolResult<float> tube_pool;
  PoolResult<float> box_pool;
  double tube_norm = 0.0;
  double box_norm = 0.0;  // norm of the duplicated box tube
};

PairedFeatures pair_tube_features(const Tensor4& conv2_cube, const Tube& tube,
                                  const Tensor4& conv5_cube, const CellBox& box5,
                                  const PairDims& dims = {});

struct PairedGrads {
  Tensor4 conv2;
  Tensor4 conv5;
};

PairedGrads pair_tube_features_backward(const PairedFeatures& f, const Tensor4& grad_paired,
                                        const Shape4& conv2_shape, const Shape4& conv5_shape);

/// Boxes with actionness below `threshold` are dropped; when that would
/// leave nothing, the single best box is kept.
std::vector<std::size_t> keep_by_actionness(std::span<const double> actionness,
                                            double threshold = 0.5);

}  // namespace tcnn
