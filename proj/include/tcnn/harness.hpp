#pragma once

// Run configuration and clip plumbing shared by both pipelines.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcnn/config.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/segmentation.hpp"

namespace tcnn {

constexpr int kClipLength = 8;

struct RunConfig {
  std::string mode = "stcnn";  // tcnn | stcnn | segment-only
  std::filesystem::path data = "data";
  std::filesystem::path model = "model";
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;

  int steps = 2500;
  int batch = 1;  // clips per step
  double lr = 1e-3;
  int lr_drop_step = 2000;
  double lr_drop_factor = 0.1;
  std::string optimizer = "adam";  // adam | sgd
  double momentum = 0.9;
  double weight_decay = 0.0;
  bool augment = true;
  int log_every = 50;

  // Trunk widths (desk scale).
  std::vector<int> encoder{8, 16, 32, 32, 32};
  std::vector<int> decoder{8, 24, 8, 24, 8, 16, 8, 8};  // up4 c4c up3 c3c up2 c2c up1 c1c
  int seg_hidden = 32;
  std::string upsampling = "subpixel";  // subpixel | unpool
  double rec_weight = 1.0;
  double fg_weight = 5.0;
  std::vector<int> rec_hidden{64};

  // T-CNN.
  int anchors = 12;
  int projection = 32;
  std::vector<int> reg_hidden{64};
  double pos_iou = 0.7;
  double neg_iou = 0.3;
  int box_batch = 32;  // sampled anchors per clip
  double actionness_threshold = 0.5;
  int proposals = 40;
  int link_k = 40;
  double nms = 0.3;
  double alpha = 0.5;

  int bench_runs = 5;

  static std::vector<std::string> keys();
  static Config defaults();
  /// Defaults with the per-mode schedule: T-CNN trains 16000 steps with the
  /// rate dropping at 12000, ST-CNN 2500 dropping at 2000.
  static Config defaults(const std::string& mode);
  /// Parses and validates; throws on unknown keys or bad values.
  static RunConfig from(const Config& c);
  Config to_config() const;
  void validate() const;

  double lr_at(int step) const;
};

/// Builds the effective configuration: defaults, optional file, TCNN_*
/// environment, then `key=value` overrides.
RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::string>& overrides,
                          const std::string& mode = "stcnn");

/// Training clips start at every frame (stride 1); test clips tile the
/// video without overlap and the last one may run past the end.
std::vector<int> train_clip_starts(int frames);
std::vector<int> test_clip_starts(int frames);

/// Frames [start, start + 8) of the video; frames past the end are zero,
/// with empty masks and no boxes.
ClipSample make_clip(const Video& v, int start);
/// Number of real frames in the clip starting at `start`.
int clip_valid_frames(const Video& v, int start);

/// Random flip/shift then illumination, drawn from `rng`.
ClipSample augment_clip(const ClipSample& clip, std::uint64_t draw);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Median of a non-empty list.
double median(std::vector<double> v);

}  // namespace tcnn
