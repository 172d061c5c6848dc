#pragma once

// Brute-force reference evaluators shared by the unit and acceptance tests.
// Boxes are integer pixel boxes; IoU is counted pixel by pixel and every
// confidence cutoff is re-matched from scratch.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "tcnn/metrics.hpp"

namespace tcnn::oracle {

inline double pixel_iou(const Box& a, const Box& b) {
  const int x0 = static_cast<int>(std::min(a.x1, b.x1)), x1 = static_cast<int>(std::max(a.x2, b.x2));
  const int y0 = static_cast<int>(std::min(a.y1, b.y1)), y1 = static_cast<int>(std::max(a.y2, b.y2));
  long inter = 0, uni = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const bool ia = x >= a.x1 && x <= a.x2 && y >= a.y1 && y <= a.y2;
      const bool ib = x >= b.x1 && x <= b.x2 && y >= b.y1 && y <= b.y2;
      inter += ia && ib;
      uni += ia || ib;
    }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

inline double tube_iou(const VideoTube& a, const VideoTube& b) {
  std::set<int> frames;
  for (const auto& [f, _] : a.boxes) frames.insert(f);
  for (const auto& [f, _] : b.boxes) frames.insert(f);
  if (frames.empty()) return 0.0;
  double s = 0;
  for (int f : frames) {
    auto ia = a.boxes.find(f), ib = b.boxes.find(f);
    if (ia != a.boxes.end() && ib != b.boxes.end()) s += pixel_iou(ia->second, ib->second);
  }
  return s / static_cast<double>(frames.size());
}

/// Stable descending-confidence order.
template <typename D>
std::vector<std::size_t> by_confidence(const std::vector<D>& dets) {
  std::vector<std::size_t> o(dets.size());
  std::iota(o.begin(), o.end(), 0);
  std::stable_sort(o.begin(), o.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  return o;
}

/// True positives among the first n detections of `order`, matched from
/// scratch: each takes the unmatched gt of highest overlap >= alpha.
template <typename D, typename G, typename Ov>
int true_positives(const std::vector<D>& dets, const std::vector<G>& gts,
                   const std::vector<std::size_t>& order, std::size_t n, double alpha, Ov&& ov) {
  std::vector<bool> used(gts.size(), false);
  int tp = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const D& d = dets[order[r]];
    int best = -1;
    double best_iou = -1;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (used[j]) continue;
      const double v = ov(d, gts[j]);
      if (v >= alpha && v > best_iou) best = static_cast<int>(j), best_iou = v;
    }
    if (best >= 0) used[static_cast<std::size_t>(best)] = true, ++tp;
  }
  return tp;
}

/// All-points AP from the precision/recall at every cutoff.
template <typename D, typename G, typename Ov>
double ap(const std::vector<D>& dets, const std::vector<G>& gts, double alpha, Ov&& ov) {
  if (gts.empty()) return 0.0;
  const auto order = by_confidence(dets);
  std::vector<double> prec, rec;
  for (std::size_t n = 1; n <= dets.size(); ++n) {
    const int tp = true_positives(dets, gts, order, n, alpha, ov);
    prec.push_back(static_cast<double>(tp) / n);
    rec.push_back(static_cast<double>(tp) / gts.size());
  }
  double area = 0, prev_r = 0;
  for (std::size_t n = 0; n < prec.size(); ++n) {
    const double envelope = *std::max_element(prec.begin() + static_cast<long>(n), prec.end());
    area += (rec[n] - prev_r) * envelope;
    prev_r = rec[n];
  }
  return area;
}

template <typename D, typename G, typename Ov>
double mean_ap(const std::vector<D>& dets, const std::vector<G>& gts, double alpha, Ov&& ov) {
  std::set<int> classes;
  for (const G& g : gts) classes.insert(g.cls);
  if (classes.empty()) return 0.0;
  double s = 0;
  for (int c : classes) {
    std::vector<D> d;
    std::vector<G> g;
    for (const D& x : dets)
      if (x.cls == c) d.push_back(x);
    for (const G& x : gts)
      if (x.cls == c) g.push_back(x);
    s += ap(d, g, alpha, ov);
  }
  return s / static_cast<double>(classes.size());
}

inline double frame_map(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts,
                        double alpha) {
  return mean_ap(dets, gts, alpha, [](const FrameBox& d, const FrameBox& g) {
    return d.video == g.video && d.frame == g.frame ? pixel_iou(d.box, g.box) : 0.0;
  });
}

inline double video_map(const std::vector<VideoTube>& dets, const std::vector<VideoTube>& gts,
                        double alpha) {
  return mean_ap(dets, gts, alpha, [](const VideoTube& d, const VideoTube& g) {
    return d.video == g.video ? tube_iou(d, g) : 0.0;
  });
}

/// ROC over every distinct confidence threshold, false positives per frame
/// clipped at 1 by interpolation, held flat to 1, trapezoid area.
inline double roc_auc(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts,
                      double alpha, int num_frames) {
  auto ov = [](const FrameBox& d, const FrameBox& g) {
    return d.video == g.video && d.frame == g.frame && d.cls == g.cls ? pixel_iou(d.box, g.box) : 0.0;
  };
  const auto order = by_confidence(dets);
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  for (std::size_t n = 1; n <= order.size(); ++n) {
    if (n < order.size() && dets[order[n]].confidence == dets[order[n - 1]].confidence) continue;
    const int tp = true_positives(dets, gts, order, n, alpha, ov);
    const double x = static_cast<double>(static_cast<int>(n) - tp) / num_frames;
    const double y = gts.empty() ? 0.0 : static_cast<double>(tp) / gts.size();
    if (x > 1.0) {
      const auto [qx, qy] = pts.back();
      pts.emplace_back(1.0, qy + (1.0 - qx) / (x - qx) * (y - qy));
      break;
    }
    pts.emplace_back(x, y);
  }
  if (pts.back().first < 1.0) pts.emplace_back(1.0, pts.back().second);
  double a = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    a += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  return a;
}

/// Random toy set: up to `max_dets` detections on a few small frames, two
/// classes, integer boxes, coarse confidences so ties occur.
struct ToyFrames {
  std::vector<FrameBox> dets, gts;
  int num_frames = 0;
};

inline Box random_box(std::mt19937_64& rng, int extent) {
  const int x = static_cast<int>(rng() % static_cast<unsigned>(extent));
  const int y = static_cast<int>(rng() % static_cast<unsigned>(extent));
  return {double(x), double(y), double(x + 2 + static_cast<int>(rng() % 8)),
          double(y + 2 + static_cast<int>(rng() % 8))};
}

inline Box jitter(const Box& b, std::mt19937_64& rng) {
  auto j = [&] { return static_cast<double>(static_cast<int>(rng() % 5) - 2); };
  Box o{b.x1 + j(), b.y1 + j(), b.x2 + j(), b.y2 + j()};
  if (o.x2 < o.x1) std::swap(o.x1, o.x2);
  if (o.y2 < o.y1) std::swap(o.y1, o.y2);
  return o;
}

inline ToyFrames toy_frames(std::uint64_t seed, int max_dets = 10) {
  std::mt19937_64 rng(seed);
  ToyFrames t;
  t.num_frames = 2 + static_cast<int>(rng() % 3);
  const int ngt = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < ngt; ++i)
    t.gts.push_back({static_cast<int>(rng() % 2), static_cast<int>(rng() % static_cast<unsigned>(t.num_frames)),
                     static_cast<int>(rng() % 2), random_box(rng, 12), 1.0});
  const int nd = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_dets));
  for (int i = 0; i < nd; ++i) {
    FrameBox d;
    if (rng() % 3 != 0) {
      d = t.gts[rng() % t.gts.size()];
      d.box = jitter(d.box, rng);
      if (rng() % 4 == 0) d.cls = 1 - d.cls;
    } else {
      d = {static_cast<int>(rng() % 2), static_cast<int>(rng() % static_cast<unsigned>(t.num_frames)),
           static_cast<int>(rng() % 2), random_box(rng, 12), 0};
    }
    d.confidence = static_cast<double>(rng() % 6) / 5.0;
    t.dets.push_back(d);
  }
  return t;
}

struct ToyTubes {
  std::vector<VideoTube> dets, gts;
};

inline ToyTubes toy_tubes(std::uint64_t seed, int max_dets = 10) {
  std::mt19937_64 rng(seed);
  ToyTubes t;
  const int ngt = 1 + static_cast<int>(rng() % 4);
  for (int i = 0; i < ngt; ++i) {
    VideoTube g;
    g.video = static_cast<int>(rng() % 3);
    g.cls = static_cast<int>(rng() % 2);
    const int f0 = static_cast<int>(rng() % 3), len = 2 + static_cast<int>(rng() % 4);
    for (int f = f0; f < f0 + len; ++f) g.boxes[f] = random_box(rng, 10);
    t.gts.push_back(g);
  }
  const int nd = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_dets));
  for (int i = 0; i < nd; ++i) {
    VideoTube d = t.gts[rng() % t.gts.size()];
    for (auto& [f, b] : d.boxes) b = jitter(b, rng);
    if (rng() % 3 == 0) d.boxes.erase(d.boxes.begin());
    if (rng() % 5 == 0) d.cls = 1 - d.cls;
    if (rng() % 5 == 0) d.video = (d.video + 1) % 3;
    d.confidence = static_cast<double>(rng() % 6) / 5.0;
    t.dets.push_back(d);
  }
  return t;
}

}  // namespace tcnn::oracle
