#pragma once

// Links per-clip tube proposals into video-length sequences scored by mean
// actionness plus mean overlap between consecutive clips.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "tcnn/geometry.hpp"

namespace tcnn {

struct TubeProposal {
  int clip_index = 0;
  std::vector<Box> boxes;  // pixel space, one per frame of the clip
  double actionness = 0.0;
};

struct LinkedSequence {
  std::vector<TubeProposal> proposals;
  std::vector<int> choice;  // proposal index picked in each clip
  double score = 0.0;
};

/// IoU of a's last box and b's first box; b must be the clip after a.
double overlap(const TubeProposal& a, const TubeProposal& b);

/// S = mean actionness + mean overlap of consecutive proposals; the overlap
/// term is 0 for a single clip.
double score_sequence(const std::vector<TubeProposal>& seq);

/// The k best sequences, highest score first; equal scores are ordered by
/// the lexicographically smaller index vector.
std::vector<LinkedSequence> link_top_k(const std::vector<std::vector<TubeProposal>>& per_clip,
                                       int k);

/// Exhaustive enumeration with the same scoring and ordering.
std::vector<LinkedSequence> brute_force_link(
    const std::vector<std::vector<TubeProposal>>& per_clip, int k);

/// Mean per-frame IoU over the frames both sequences cover.
double sequence_iou(const LinkedSequence& a, const LinkedSequence& b);

/// Greedy suppression in descending score order.
std::vector<LinkedSequence> nms_sequences(std::vector<LinkedSequence> seqs, double iou_thresh);

/// One line per frame: clip frame x1 y1 x2 y2 actionness.
void write_sequence(std::ostream& out, const LinkedSequence& s);

}  // namespace tcnn
