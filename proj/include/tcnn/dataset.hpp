#pragma once

// Synthetic action videos: a textured rectangle moving over a noisy
// background, one motion pattern per class.
//
// Layout on disk:
//   dataset.cfg                     generator parameters and the split
//   annotations.csv                 video,frame,x1,y1,x2,y2,class
//   videos/NNN/frame_KKKK.t4        3 x 1 x H x W frame
//   masks/NNN/frame_KKKK.sm         foreground mask

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tcnn/config.hpp"
#include "tcnn/geometry.hpp"
#include "tcnn/mask.hpp"
#include "tcnn/tensor.hpp"

namespace tcnn {

enum class Motion { horizontal = 0, vertical = 1, diagonal = 2, oscillating = 3 };

const char* motion_name(Motion m);

struct SyntheticSpec {
  int num_videos = 80;
  int frames = 16;
  int height = 80;
  int width = 112;
  int num_classes = 4;
  int actor_min = 16;
  int actor_max = 28;
  double noise = 0.05;
  double train_fraction = 0.8;
  std::uint64_t seed = 7;

  void validate() const;
  static SyntheticSpec from_config(const Config& c);
  void to_config(Config& c) const;
};

struct Video {
  int id = 0;
  int label = 0;  // 0-based class; the motion pattern
  Tensor4 frames;  // 3 x F x H x W
  std::vector<SegMask> masks;
  std::vector<Box> boxes;
};

/// Deterministic in (spec, id).
Video synthesize_video(const SyntheticSpec& spec, int id);

/// Per class, the first train_fraction of its videos (by id) train, the
/// rest test.
void split_ids(const SyntheticSpec& spec, std::vector<int>& train, std::vector<int>& test);

void gen_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir);

class Dataset {
 public:
  explicit Dataset(const std::filesystem::path& dir);

  const SyntheticSpec& spec() const { return spec_; }
  const std::vector<int>& train_ids() const { return train_; }
  const std::vector<int>& test_ids() const { return test_; }
  const std::filesystem::path& root() const { return root_; }

  Video load(int id) const;
  /// Masks, boxes and label only; `frames` stays empty.
  Video load_annotations(int id) const;
  std::vector<Video> load(const std::vector<int>& ids) const;

 private:
  std::filesystem::path root_;
  SyntheticSpec spec_;
  std::vector<int> train_, test_;
};

std::filesystem::path frame_path(const std::filesystem::path& root, int video, int frame);
std::filesystem::path mask_path(const std::filesystem::path& root, int video, int frame);

}  // namespace tcnn
