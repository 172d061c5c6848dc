#include "tcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tcnn/toi_pool.hpp"

namespace tcnn {

double iou_mask(const SegMask& a, const SegMask& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("iou_mask: mask dims differ (" + std::to_string(a.height()) +
                                "x" + std::to_string(a.width()) + " vs " +
                                std::to_string(b.height()) + "x" + std::to_string(b.width()) +
                                ")");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double spatiotemporal_iou(const VideoTube& a, const VideoTube& b) {
  std::set<int> frames;
  for (const auto& [f, _] : a.boxes) frames.insert(f);
  for (const auto& [f, _] : b.boxes) frames.insert(f);
  if (frames.empty()) return 0.0;
  double sum = 0.0;
  for (int f : frames) {
    const auto ia = a.boxes.find(f), ib = b.boxes.find(f);
    if (ia != a.boxes.end() && ib != b.boxes.end()) sum += iou(ia->second, ib->second);
  }
  return sum / static_cast<double>(frames.size());
}

std::vector<bool> greedy_match(const std::vector<double>& confidence, std::size_t num_gt,
                               const std::function<double(std::size_t, std::size_t)>& overlap,
                               double alpha, std::vector<std::size_t>* visit_order) {
  std::vector<std::size_t> order(confidence.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return confidence[a] > confidence[b];
  });
  std::vector<bool> taken(num_gt, false), hits;
  hits.reserve(order.size());
  for (std::size_t d : order) {
    double best = -1.0;
    std::size_t arg = num_gt;
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (taken[g]) continue;
      const double v = overlap(d, g);
      if (v >= alpha && v > best) {
        best = v;
        arg = g;
      }
    }
    if (arg < num_gt) taken[arg] = true;
    hits.push_back(arg < num_gt);
  }
  if (visit_order) *visit_order = std::move(order);
  return hits;
}

double average_precision(const std::vector<bool>& hits, std::size_t num_gt,
                         std::vector<PrPoint>* curve) {
  std::vector<PrPoint> pr;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    tp += hits[i];
    pr.push_back({num_gt ? static_cast<double>(tp) / num_gt : 0.0,
                  static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  if (curve) *curve = pr;
  if (num_gt == 0) return 0.0;
  // Envelope from the right, then sum over recall steps.
  for (std::size_t i = pr.size(); i-- > 1;)
    pr[i - 1].precision = std::max(pr[i - 1].precision, pr[i].precision);
  double ap = 0.0, prev_r = 0.0;
  for (const PrPoint& p : pr) {
    if (p.recall > prev_r) {
      ap += (p.recall - prev_r) * p.precision;
      prev_r = p.recall;
    }
  }
  return ap;
}

double frame_ap(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts, int cls,
                double alpha) {
  std::vector<const FrameBox*> d, g;
  for (const FrameBox& x : dets)
    if (x.cls == cls) d.push_back(&x);
  for (const FrameBox& x : gts)
    if (x.cls == cls) g.push_back(&x);
  std::vector<double> conf;
  for (const FrameBox* x : d) conf.push_back(x->confidence);
  const auto hits = greedy_match(
      conf, g.size(),
      [&](std::size_t i, std::size_t j) {
        if (d[i]->video != g[j]->video || d[i]->frame != g[j]->frame) return 0.0;
        return iou(d[i]->box, g[j]->box);
      },
      alpha);
  return average_precision(hits, g.size());
}

namespace {

template <typename T, typename F>
double mean_over_classes(const std::vector<T>& gts, std::map<int, double>* per_class, F&& ap) {
  std::set<int> classes;
  for (const T& g : gts) classes.insert(g.cls);
  if (per_class) per_class->clear();
  if (classes.empty()) return 0.0;
  double sum = 0.0;
  for (int c : classes) {
    const double v = ap(c);
    if (per_class) (*per_class)[c] = v;
    sum += v;
  }
  return sum / static_cast<double>(classes.size());
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("IoU threshold must lie in (0,1)");
}

}  // namespace

double frame_map(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts,
                 double alpha, std::map<int, double>* per_class) {
  check_alpha(alpha);
  return mean_over_classes(gts, per_class, [&](int c) { return frame_ap(dets, gts, c, alpha); });
}

double video_ap(const std::vector<VideoTube>& dets, const std::vector<VideoTube>& gts, int cls,
                double alpha) {
  std::vector<const VideoTube*> d, g;
  for (const VideoTube& x : dets)
    if (x.cls == cls) d.push_back(&x);
  for (const VideoTube& x : gts)
    if (x.cls == cls) g.push_back(&x);
  std::vector<double> conf;
  for (const VideoTube* x : d) conf.push_back(x->confidence);
  const auto hits = greedy_match(
      conf, g.size(),
      [&](std::size_t i, std::size_t j) {
        if (d[i]->video != g[j]->video) return 0.0;
        return spatiotemporal_iou(*d[i], *g[j]);
      },
      alpha);
  return average_precision(hits, g.size());
}

double video_map(const std::vector<VideoTube>& dets, const std::vector<VideoTube>& gts,
                 double alpha, std::map<int, double>* per_class) {
  check_alpha(alpha);
  return mean_over_classes(gts, per_class, [&](int c) { return video_ap(dets, gts, c, alpha); });
}

RocResult roc_auc(const std::vector<FrameBox>& dets, const std::vector<FrameBox>& gts,
                  double alpha, int num_frames) {
  check_alpha(alpha);
  if (num_frames < 1) throw std::invalid_argument("roc_auc: num_frames must be >= 1");
  std::vector<double> conf;
  for (const FrameBox& d : dets) conf.push_back(d.confidence);
  std::vector<std::size_t> order;
  const auto hits = greedy_match(
      conf, gts.size(),
      [&](std::size_t i, std::size_t j) {
        const FrameBox &a = dets[i], &b = gts[j];
        if (a.video != b.video || a.frame != b.frame || a.cls != b.cls) return 0.0;
        return iou(a.box, b.box);
      },
      alpha, &order);

  RocResult r;
  r.curve.push_back({0.0, 0.0});
  const double ngt = static_cast<double>(gts.size());
  std::size_t tp = 0, fp = 0;
  bool clipped = false;
  for (std::size_t i = 0; i < order.size() && !clipped; ++i) {
    hits[i] ? ++tp : ++fp;
    const bool group_end = i + 1 == order.size() || conf[order[i + 1]] != conf[order[i]];
    if (!group_end) continue;
    const RocPoint p{static_cast<double>(fp) / num_frames, ngt > 0 ? tp / ngt : 0.0};
    const RocPoint q = r.curve.back();
    if (p.fppf > 1.0) {
      const double t = (1.0 - q.fppf) / (p.fppf - q.fppf);
      r.curve.push_back({1.0, q.tpr + t * (p.tpr - q.tpr)});
      clipped = true;
    } else {
      r.curve.push_back(p);
    }
  }
  if (r.curve.back().fppf < 1.0) r.curve.push_back({1.0, r.curve.back().tpr});
  for (std::size_t i = 1; i < r.curve.size(); ++i)
    r.auc += (r.curve[i].fppf - r.curve[i - 1].fppf) * 0.5 *
             (r.curve[i].tpr + r.curve[i - 1].tpr);
  return r;
}

namespace {

void require_same_dims(const SegMask& a, const SegMask& b, const char* who) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument(std::string(who) + ": mask dims differ (" +
                                std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                " vs " + std::to_string(b.height()) + "x" +
                                std::to_string(b.width()) + ")");
}

// Fraction of set pixels of `from` whose distance to `field` is <= tol.
double matched_fraction(const SegMask& from, const DistanceField& field, double tol) {
  std::size_t n = 0, hit = 0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (!from[i]) continue;
    ++n;
    hit += field.dist2[i] <= tol * tol;
  }
  return n ? static_cast<double>(hit) / n : 0.0;
}

double mean_distance(const SegMask& from, const DistanceField& field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < from.size(); ++i)
    if (from[i]) {
      sum += std::sqrt(field.dist2[i]);
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

double contour_f(const SegMask& pred, const SegMask& gt, double tolerance) {
  require_same_dims(pred, gt, "contour_f");
  if (tolerance < 0) throw std::invalid_argument("contour_f: tolerance must be >= 0");
  const SegMask cp = contour(pred), cg = contour(gt);
  const bool ep = !cp.any(), eg = !cg.any();
  if (ep && eg) return 1.0;
  if (ep || eg) return 0.0;
  const double precision = matched_fraction(cp, distance_transform(cg), tolerance);
  const double recall = matched_fraction(cg, distance_transform(cp), tolerance);
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double default_f_tolerance(int height, int width) {
  return std::ceil(0.008 * std::hypot(static_cast<double>(height), static_cast<double>(width)));
}

double temporal_stability(const std::vector<SegMask>& masks) {
  if (masks.size() < 2) throw std::invalid_argument("temporal_stability: needs >= 2 frames");
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < masks.size(); ++t) {
    const SegMask &a = masks[t], &b = masks[t + 1];
    require_same_dims(a, b, "temporal_stability");
    const SegMask ca = contour(a), cb = contour(b);
    const bool ea = !ca.any(), eb = !cb.any();
    if (ea && eb) continue;
    if (ea || eb) {
      total += 1.0;
      continue;
    }
    const double d = 0.5 * (mean_distance(ca, distance_transform(cb)) +
                            mean_distance(cb, distance_transform(ca)));
    total += d / std::hypot(static_cast<double>(a.height()), static_cast<double>(a.width()));
  }
  return total / static_cast<double>(masks.size() - 1);
}

MeanRecallDecay mean_recall_decay(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("mean_recall_decay: no scores");
  MeanRecallDecay r;
  std::size_t above = 0;
  for (double s : scores) {
    r.mean += s;
    above += s > 0.5;
  }
  r.mean /= static_cast<double>(scores.size());
  r.recall = static_cast<double>(above) / static_cast<double>(scores.size());
  const auto bins = bin_edges(static_cast<int>(scores.size()), 4);
  auto bin_mean = [&](const Bin& b) {
    double s = 0.0;
    for (int i = b.start; i < b.end; ++i) s += scores[static_cast<std::size_t>(i)];
    return s / (b.end - b.start);
  };
  r.decay = bin_mean(bins.front()) - bin_mean(bins.back());
  return r;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
  std::vector<std::string> keys;
  for (const EvalRow& r : rows)
    for (const auto& [k, _] : r.values)
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "name";
  for (const auto& k : keys) out << ',' << k;
  out << '\n';
  char buf[64];
  for (const EvalRow& r : rows) {
    out << r.name;
    for (const auto& k : keys) {
      out << ',';
      const auto it = r.values.find(k);
      if (it != r.values.end()) {
        std::snprintf(buf, sizeof buf, "%.6f", it->second);
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<std::pair<double, double>>& points,
                     const std::string& x_label, const std::string& y_label) {
  constexpr double W = 400, H = 300, M = 40;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[128];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" "
                "stroke=\"black\"/>\n",
                M, M, W - 2 * M, H - 2 * M);
  out << buf;
  out << "<polyline fill=\"none\" stroke=\"blue\" points=\"";
  for (const auto& [x, y] : points) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", M + std::clamp(x, 0.0, 1.0) * (W - 2 * M),
                  H - M - std::clamp(y, 0.0, 1.0) * (H - 2 * M));
    out << buf;
  }
  out << "\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">" << x_label
      << "</text>\n";
  out << "<text x=\"12\" y=\"" << H / 2 << "\" transform=\"rotate(-90 12 " << H / 2
      << ")\" text-anchor=\"middle\">" << y_label << "</text>\n</svg>\n";
}

}  // namespace tcnn
