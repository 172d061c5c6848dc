#pragma once

// Desk-scale ST-CNN: the segmentation trunk plus a recognition head that
// ToI-pools concat1 over the foreground tube.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tcnn/architectures.hpp"
#include "tcnn/harness.hpp"

namespace tcnn {

struct LossRow {
  int step = 0;
  double lr = 0;
  std::vector<double> terms;  // named by the curve header
};

/// "step,lr,<names...>" then one row per logged step.
std::string loss_curve_csv(const std::vector<std::string>& names, const std::vector<LossRow>& rows);

class StcnnModel {
 public:
  StcnnModel() = default;
  StcnnModel(const RunConfig& cfg, int height, int width, int num_classes);

  const StcnnSpec& spec() const { return spec_; }
  const Network& net() const { return net_; }
  const Mlp& recognizer() const { return rec_; }
  int num_classes() const { return spec_.num_classes; }

  void init(std::uint64_t seed);

  struct ClipOutput {
    Tensor4 logits;  // 2 x 8 x H x W
    std::vector<SegMask> masks;
    std::vector<std::optional<Box>> boxes;
    std::vector<double> class_prob;
  };
  /// Masks from the segmentation head; the recognition tube follows the
  /// predicted boxes (frames without foreground borrow the enclosing box of
  /// the clip, or the full frame).
  ClipOutput run_clip(const Tensor4& frames) const;

  /// The two stages of run_clip: the trunk with the segmentation head, then
  /// recognition of the foreground tube on concat1.
  Network::Activations segment_stage(const Tensor4& frames, ClipOutput& o) const;
  std::vector<double> recognize_stage(const Network::Activations& acts,
                                      const std::vector<std::optional<Box>>& boxes) const;

  struct StepLoss {
    double seg = 0, rec = 0;
  };
  /// One forward/backward on a labelled clip; gradients are added to `g`
  /// and `rg`.
  StepLoss accumulate(const ClipSample& clip, Network::Grads& g, Mlp::Grads& rg,
                      double rec_weight, double fg_weight) const;

  std::vector<std::span<float>> parameters();

  void save(const std::filesystem::path& dir, const RunConfig& cfg) const;
  /// Rebuilds the architecture from the stored configuration; throws when
  /// blobs are missing or do not fit.
  static StcnnModel load(const std::filesystem::path& dir, RunConfig* stored = nullptr);

 private:
  Tube recognition_tube(const std::vector<std::optional<Box>>& boxes) const;

  StcnnSpec spec_;
  Network net_;
  Mlp rec_;
  int concat1_ = -1;
  int conv7_ = -1;
};

StcnnSpec desk_stcnn_spec(const RunConfig& cfg, int height, int width, int num_classes);

struct TrainReport {
  std::vector<std::string> names;
  std::vector<LossRow> curve;
  double first_loss = 0;  // mean over the first logged window
  double last_loss = 0;   // mean over the last logged window
};

/// Trains on the dataset's training split and writes the model plus
/// loss_curve.csv into cfg.model.
using ProgressFn = std::function<void(const LossRow&)>;

TrainReport train_stcnn(const RunConfig& cfg, const Dataset& data, const ProgressFn& progress = {});

struct VideoSegmentation {
  int video = 0;
  std::vector<SegMask> masks;
  std::vector<std::optional<Box>> boxes;
  int label = 0;
  double confidence = 0;
};

/// Non-overlapping clips; class probabilities are averaged over clips.
VideoSegmentation segment_video(const StcnnModel& m, const Video& v);

/// Writes masks/NNN/frame_KKKK.sm and segments.csv
/// (video,frame,x1,y1,x2,y2,class,confidence; empty frames are skipped).
void write_segmentations(const std::filesystem::path& dir,
                         const std::vector<VideoSegmentation>& segs);

}  // namespace tcnn
