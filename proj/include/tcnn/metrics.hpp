#pragma once

// Detection and segmentation measures: box/mask IoU, average precision,
// frame- and video-level mAP, ROC/AUC and the region (J), contour (F) and
// temporal stability (T) measures.

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tcnn/geometry.hpp"
#include "tcnn/mask.hpp"

namespace tcnn {

inline double iou_box(const Box& a, const Box& b) { return iou(a, b); }

/// |a & b| / |a | b|; two empty masks score 1.
double iou_mask(const SegMask& a, const SegMask& b);

/// Frame-level detection or ground truth box.
struct FrameBox {
  int video = 0;
  int frame = 0;
  int cls = 0;
  Box box;
  double confidence = 1.0;  // ignored for ground truth
};

/// Video-level detection or ground truth tube: frame -> box.
struct VideoTube {
  int video = 0;
  int cls = 0;
  std::map<int, Box> boxes;
  double confidence = 1.0;
};

/// Mean per-frame box IoU over the union of the two temporal extents;
/// frames covered by only one tube count 0.
double spatiotemporal_iou(const VideoTube& a, const VideoTube& b);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Detections are visited by descending confidence (input order on ties).
/// Each one is matched to the unmatched gt of highest IoU among those with
/// IoU >= alpha; `overlap(i, j)` is the IoU of detection i and gt j, and
/// must be 0 for pairs that cannot match. Returns the hit flag per visited
/// detection.
std::vector<bool> greedy_match(const std::vector<double>& confidence, std::size_t num_gt,
                               const std::function<double(std::size_t, std::size_t)>& overlap,
                               double alpha, std::vector<std::size_t>* visit_order = nullptr);

/// Area under the exact precision/recall staircase with the precision
/// envelope (all-points interpolation). 0 when there are no gts.
double average_precision(const std::vector<bool>& hits_in_order, std::size_t num_gt,
                         std::vector<PrPoint>* curve = nullptr);

/// AP for one class over frame-level boxes.
double frame_ap(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts, int cls,
                double alpha);

/// Mean of per-class AP over every class present in the ground truth.
double frame_map(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts,
                 double alpha, std::map<int, double>* per_class = nullptr);

double video_ap(const std::vector<VideoTube>& dets, const std::vector<VideoTube>& gts, int cls,
                double alpha);
double video_map(const std::vector<VideoTube>& dets, const std::vector<VideoTube>& gts,
                 double alpha, std::map<int, double>* per_class = nullptr);

struct RocPoint {
  double fppf = 0.0;  // false positives per frame
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> curve;
  double auc = 0.0;
};

/// Sweeps the confidence threshold over all detections (classes pooled).
/// A detection is a true positive when it matches an unmatched gt of the
/// same class in the same frame with IoU >= alpha. The x axis is false
/// positives per frame, clipped at 1; the curve is held flat out to x = 1
/// and integrated with the trapezoid rule.
RocResult roc_auc(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts,
                  double alpha, int num_frames);

/// Boundary F-measure. Contour pixels of each mask count as matched when a
/// contour pixel of the other mask lies within `tolerance` (Euclidean).
/// Both contours empty: 1; exactly one empty: 0.
double contour_f(const SegMask& pred, const SegMask& gt, double tolerance);

/// ceil(0.008 * image diagonal).
double default_f_tolerance(int height, int width);

/// Mean over consecutive frame pairs of the symmetric mean contour
/// distance, divided by the image diagonal. A pair where only one contour
/// is empty counts 1; two empty contours count 0.
double temporal_stability(const std::vector<SegMask>& masks);

struct MeanRecallDecay {
  double mean = 0.0;
  double recall = 0.0;
  double decay = 0.0;
};

/// Scores in temporal order. Recall counts scores > 0.5; decay is the mean
/// of the first of four equal temporal bins minus the mean of the last.
MeanRecallDecay mean_recall_decay(const std::vector<double>& scores);

struct EvalRow {
  std::string name;
  std::map<std::string, double> values;
};

/// One header line with the union of keys in first-seen order, then one
/// row per entry. Values print with 6 decimals.
void write_report_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);

/// Plain polyline plot of (x, y) points on [0,1] x [0,1].
void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::pair<double, double>>& points,
                     const std::string& x_label, const std::string& y_label);

}  // namespace tcnn
