#pragma once

// Desk-scale T-CNN: tube proposal network (actionness per anchor on conv5b,
// per-frame box regression from paired conv2 tube / conv5 box features),
// linking, and ToI-pooled recognition on conv2.

#include <filesystem>
#include <random>
#include <vector>

#include "tcnn/architectures.hpp"
#include "tcnn/harness.hpp"
#include "tcnn/linking.hpp"
#include "tcnn/stcnn_model.hpp"

namespace tcnn {

TcnnSpec desk_tcnn_spec(const RunConfig& cfg, int height, int width, int num_classes);

/// Clip-level ground truth: the box enclosing every real frame's box.
std::optional<Box> clip_gt_box(const ClipSample& clip);

class TcnnModel {
 public:
  TcnnModel() = default;
  TcnnModel(const RunConfig& cfg, int height, int width, int num_classes,
            std::vector<Anchor> anchors);

  const TcnnSpec& spec() const { return spec_; }
  const Network& net() const { return net_; }
  const std::vector<Anchor>& anchors() const { return anchors_; }
  int num_classes() const { return spec_.num_classes; }
  /// Recognition output index of the background class.
  int background() const { return spec_.num_classes; }

  void init(std::uint64_t seed);

  /// Anchor boxes (clipped to the frame) in actionness-channel order:
  /// index = (a * h5 + y) * w5 + x.
  const std::vector<Box>& candidates() const { return candidates_; }

  struct Grads {
    Network::Grads net;
    Mlp::Grads proj;
    Mlp::Grads reg;
    Mlp::Grads rec;
  };
  Grads zero_grads() const;

  enum class Part { trunk, actionness, regression, recognition };
  /// Parameter and gradient blocks of the listed parts, in matching order.
  std::vector<std::span<float>> parameters(const std::vector<Part>& parts);
  static std::vector<std::span<float>> blocks(Grads& g, const TcnnModel& m,
                                              const std::vector<Part>& parts);

  struct TpnLoss {
    double actionness = 0, regression = 0;
  };
  /// Actionness on a sampled anchor batch and regression on its positives.
  TpnLoss tpn_step(const ClipSample& clip, const RunConfig& cfg, std::mt19937_64& rng,
                   Grads& g) const;
  /// Recognition on the gt tube, a jittered gt tube and a background tube.
  double recognition_step(const ClipSample& clip, const RunConfig& cfg, std::mt19937_64& rng,
                          Grads& g, bool train_trunk) const;

  struct ClipProposals {
    std::vector<TubeProposal> proposals;
    Tensor4 conv2;
  };
  /// Top `cfg.proposals` anchors by actionness, thresholded, regressed into
  /// per-frame boxes.
  ClipProposals propose(const Tensor4& frames, int clip_index, const RunConfig& cfg) const;

  /// Class probabilities (background last) of a tube over a conv2 cube.
  std::vector<double> recognize(const Tensor4& conv2, const std::vector<Box>& boxes) const;

  void save(const std::filesystem::path& dir, const RunConfig& cfg) const;
  static TcnnModel load(const std::filesystem::path& dir, RunConfig* stored = nullptr);

 private:
  struct RegCache;
  std::vector<Box> regress(const Network::Activations& acts, std::size_t cand,
                           RegCache* cache) const;
  Tube conv2_tube(const std::vector<Box>& boxes, int depth) const;
  std::vector<double> actionness_probs(const Tensor4& logits) const;

  TcnnSpec spec_;
  Network net_;
  Mlp proj_;  // per-frame 1x1x1 projection, ReLU applied by the caller
  Mlp reg_;
  Mlp rec_;
  std::vector<Anchor> anchors_;
  std::vector<Box> candidates_;
  std::vector<CellBox> candidate_cells_;  // conv5 cells of each candidate
  int conv2_ = -1, conv5_ = -1, act_ = -1;
};

/// k-means anchors over the clip-level gt boxes of every training clip.
std::vector<Anchor> fit_anchors(const std::vector<Video>& videos, int k, std::uint64_t seed);

/// Trains in four equal phases: proposal network, recognition, proposal
/// heads on the frozen trunk, recognition head on the frozen trunk.
TrainReport train_tcnn(const RunConfig& cfg, const Dataset& data, const ProgressFn& progress = {});

struct Detection {
  int video = 0;
  int rank = 0;  // order after suppression
  std::vector<Box> boxes;  // one per real frame
  int cls = 0;
  double confidence = 0;
  double score = 0;  // linking score
};

/// Proposals per non-overlapping clip, top-K linking, sequence NMS; the
/// class of a sequence averages per-clip recognition weighted by real
/// frames; confidence = p(class) * score / 2.
std::vector<Detection> detect_video(const TcnnModel& m, const Video& v, const RunConfig& cfg);

/// detections.csv: video,rank,frame,x1,y1,x2,y2,class,confidence.
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::filesystem::path& path);

}  // namespace tcnn
