#pragma once

// Evaluation of detections and segmentations against the dataset ground
// truth, and wall-clock timing of the inference stages.

#include <filesystem>
#include <string>
#include <vector>

#include "tcnn/metrics.hpp"
#include "tcnn/stcnn_model.hpp"
#include "tcnn/tcnn_model.hpp"

namespace tcnn {

struct GroundTruth {
  std::vector<FrameBox> frames;
  std::vector<VideoTube> tubes;
  std::vector<std::vector<SegMask>> masks;  // per video, in `ids` order
  std::vector<int> ids;
  int num_frames = 0;
};

GroundTruth load_ground_truth(const Dataset& data, const std::vector<int>& ids);

/// Ground truth dressed up as predictions with confidence 1.
std::vector<Detection> gt_as_detections(const Dataset& data, const std::vector<int>& ids);
std::vector<VideoSegmentation> gt_as_segmentations(const Dataset& data, const std::vector<int>& ids);

std::vector<FrameBox> to_frame_boxes(const std::vector<Detection>& dets);
std::vector<VideoTube> to_tubes(const std::vector<Detection>& dets);

struct DetectionReport {
  double frame_map = 0, video_map = 0, auc = 0;
  std::map<int, double> frame_ap, video_ap;
  RocResult roc;
};

DetectionReport evaluate_detections(const std::vector<Detection>& dets, const GroundTruth& gt,
                                    double alpha);

struct SegmentationReport {
  double j_mean = 0, j_recall = 0, j_decay = 0;
  double f_mean = 0, f_recall = 0, f_decay = 0;
  double t_mean = 0;
  std::vector<double> j_by_frame;  // mean over videos
  DetectionReport detection;       // boxes from the masks
};

SegmentationReport evaluate_segmentations(const std::vector<VideoSegmentation>& segs,
                                          const GroundTruth& gt, double alpha);

/// Throws listing every prediction video absent from the ground truth and
/// every ground-truth video without predictions (the latter only when
/// `require_all`).
void check_ids(const std::vector<int>& predicted, const GroundTruth& gt, bool require_all);

/// report.csv plus roc.svg (detections) or j_by_frame.svg (segmentations).
void write_detection_report(const std::filesystem::path& dir, const DetectionReport& r);
void write_segmentation_report(const std::filesystem::path& dir, const SegmentationReport& r);

/// Reads masks/NNN/frame_KKKK.sm and segments.csv written by
/// write_segmentations for the listed videos.
std::vector<VideoSegmentation> read_segmentations(const std::filesystem::path& dir,
                                                  const std::vector<int>& ids, int frames);

struct StageTiming {
  std::string pipeline;
  std::string stage;
  std::vector<double> seconds;
};

/// Median wall-clock seconds per stage over `runs` passes on one video.
std::vector<StageTiming> bench_tcnn(const TcnnModel& m, const Video& v, const RunConfig& cfg,
                                    int runs);
std::vector<StageTiming> bench_stcnn(const StcnnModel& m, const Video& v, int runs);
/// pipeline,stage,runs,median_s,min_s,max_s
std::string timing_csv(const std::vector<StageTiming>& rows);

}  // namespace tcnn
