#include "tcnn/proposals.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tcnn/toi_pool.hpp"

namespace tcnn {

double anchor_iou_distance(const Anchor& a, const Anchor& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? 1.0 - inter / uni : 1.0;
}

namespace {

double distance(const Anchor& a, const Anchor& b, AnchorDistance kind) {
  if (kind == AnchorDistance::iou) return anchor_iou_distance(a, b);
  const double dw = a.w - b.w, dh = a.h - b.h;
  return dw * dw + dh * dh;
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int nearest(const Anchor& b, const std::vector<Anchor>& centers, AnchorDistance kind,
            double* dist) {
  int best = 0;
  double bd = distance(b, centers[0], kind);
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = distance(b, centers[c], kind);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = bd;
  return best;
}

}  // namespace

KMeansResult kmeans_anchors(std::span<const Anchor> boxes, int k, std::uint64_t seed,
                            const KMeansOptions& opts) {
  if (boxes.empty()) throw std::invalid_argument("kmeans_anchors: no boxes");
  if (k < 1) throw std::invalid_argument("kmeans_anchors: k must be >= 1");
  std::set<std::pair<double, double>> distinct;
  for (const Anchor& b : boxes) {
    if (!(b.w > 0.0 && b.h > 0.0))
      throw std::invalid_argument("kmeans_anchors: box sizes must be positive");
    distinct.emplace(b.w, b.h);
  }
  if (static_cast<std::size_t>(k) > distinct.size())
    throw std::invalid_argument("kmeans_anchors: k = " + std::to_string(k) + " exceeds the " +
                                std::to_string(distinct.size()) + " distinct boxes");

  std::mt19937_64 rng(seed);
  const std::size_t n = boxes.size();
  KMeansResult r;
  r.centers.push_back(boxes[rng() % n]);
  std::vector<double> d2(n);
  while (static_cast<int>(r.centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d;
      nearest(boxes[i], r.centers, opts.distance, &d);
      d2[i] = d * d;
      total += d2[i];
    }
    const double target = unit_draw(rng) * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    r.centers.push_back(boxes[pick]);
  }

  auto assign = [&] {
    double total = 0.0;
    r.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d;
      r.assignment[i] = nearest(boxes[i], r.centers, opts.distance, &d);
      total += d;
    }
    return total;
  };
  r.distortion.push_back(assign());

  for (int it = 0; it < opts.max_iters; ++it) {
    bool moved = false;
    for (int c = 0; c < k; ++c) {
      double sw = 0.0, sh = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (r.assignment[i] == c) {
          sw += boxes[i].w;
          sh += boxes[i].h;
          ++count;
        }
      if (count == 0) continue;
      const Anchor mean{sw / count, sh / count};
      if (mean == r.centers[c]) continue;
      double old_cost = 0.0, new_cost = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (r.assignment[i] == c) {
          old_cost += distance(boxes[i], r.centers[c], opts.distance);
          new_cost += distance(boxes[i], mean, opts.distance);
        }
      if (new_cost < old_cost) {
        r.centers[c] = mean;
        moved = true;
      }
    }
    const std::vector<int> before = r.assignment;
    r.distortion.push_back(assign());
    if (!moved && before == r.assignment) break;
  }
  return r;
}

void save_anchors(const std::filesystem::path& path, std::span<const Anchor> anchors) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write anchors to " + path.string());
  out.precision(17);
  for (const Anchor& a : anchors) out << a.w << ' ' << a.h << '\n';
  if (!out) throw std::runtime_error("failed writing anchors to " + path.string());
}

std::vector<Anchor> load_anchors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read anchors from " + path.string());
  std::vector<Anchor> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Anchor a;
    if (!(ss >> a.w >> a.h) || !(a.w > 0 && a.h > 0))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected two positive numbers");
    out.push_back(a);
  }
  return out;
}

Box anchor_box(const Anchor& a, double cx, double cy) {
  return Box{cx - 0.5 * (a.w - 1.0), cy - 0.5 * (a.h - 1.0), cx + 0.5 * (a.w - 1.0),
             cy + 0.5 * (a.h - 1.0)};
}

std::vector<LabeledBox> assign_actionness_labels(std::span<const Box> candidates,
                                                 std::span<const Box> gt, double pos_iou,
                                                 double neg_iou) {
  if (!(pos_iou > 0.0 && pos_iou < 1.0))
    throw std::invalid_argument("assign_actionness_labels: pos_iou must lie in (0,1)");
  std::vector<LabeledBox> out(candidates.size());
  std::vector<double> best(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out[i].box = candidates[i];
    for (const Box& g : gt) best[i] = std::max(best[i], iou(candidates[i], g));
  }
  std::vector<bool> positive(candidates.size(), false);
  for (std::size_t i = 0; i < candidates.size(); ++i) positive[i] = best[i] > pos_iou;
  for (const Box& g : gt) {
    if (candidates.empty()) break;
    std::size_t arg = 0;
    double top = iou(candidates[0], g);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const double v = iou(candidates[i], g);
      if (v > top) {
        top = v;
        arg = i;
      }
    }
    positive[arg] = true;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (positive[i]) {
      out[i].label = BoxLabel::positive;
      out[i].actionness = 1.0;
    } else {
      out[i].label = best[i] >= neg_iou ? BoxLabel::ignore : BoxLabel::negative;
    }
  }
  return out;
}

RegressionTarget encode_regression(const Box& a, const Box& g, RegressionParam param) {
  if (param == RegressionParam::raw)
    return {g.cx() - a.cx(), g.cy() - a.cy(), g.width() - a.width(), g.height() - a.height()};
  return {(g.cx() - a.cx()) / a.width(), (g.cy() - a.cy()) / a.height(),
          std::log(g.width() / a.width()), std::log(g.height() / a.height())};
}

Box decode_regression(const Box& a, const RegressionTarget& t, RegressionParam param) {
  double cx, cy, w, h;
  if (param == RegressionParam::raw) {
    cx = a.cx() + t.d_cx;
    cy = a.cy() + t.d_cy;
    w = a.width() + t.d_w;
    h = a.height() + t.d_h;
  } else {
    cx = a.cx() + t.d_cx * a.width();
    cy = a.cy() + t.d_cy * a.height();
    w = a.width() * std::exp(t.d_w);
    h = a.height() * std::exp(t.d_h);
  }
  return anchor_box(Anchor{w, h}, cx, cy);
}

Tube temporal_skip_map(const CellBox& box5, int conv5_h, int conv5_w, int conv2_h, int conv2_w,
                       int depth) {
  if (depth < 1) throw std::invalid_argument("temporal_skip_map: depth must be >= 1");
  return Tube(static_cast<std::size_t>(depth),
              rescale_cells(box5, conv5_h, conv5_w, conv2_h, conv2_w));
}

namespace {

double l2norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

// y = x / n backward: dx = (g - y (y . g)) / n.
void normalize_backward(std::span<const float> y, std::span<float> g, double n) {
  if (n == 0.0) {
    std::fill(g.begin(), g.end(), 0.0f);
    return;
  }
  const double yg = dot(y, std::span<const float>(g.data(), g.size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = static_cast<float>((g[i] - y[i] * yg) / n);
}

}  // namespace

PairedFeatures pair_tube_features(const Tensor4& conv2_cube, const Tube& tube,
                                  const Tensor4& conv5_cube, const CellBox& box5,
                                  const PairDims& dims) {
  if (conv5_cube.depth() != dims.box.d)
    throw ShapeError("pair_tube_features: conv5 cube " + conv5_cube.shape().str() +
                     " must have depth " + std::to_string(dims.box.d));
  PairedFeatures f;
  f.tube_pool = toi_pool_forward(conv2_cube, tube, dims.tube);
  f.box_pool = toi_pool_forward(conv5_cube, Tube(conv5_cube.depth(), box5), dims.box);
  const Tensor4& tp = f.tube_pool.output;
  const Tensor4& bp = f.box_pool.output;
  const int D = dims.tube.d;
  if (dims.box.d != 1)
    throw ShapeError("pair_tube_features: the conv5 box must pool to depth 1");
  f.tube_norm = l2norm(tp.values());
  f.box_norm = l2norm(bp.values()) * std::sqrt(static_cast<double>(D));

  const int tube_slice = tp.channels() * dims.tube.h * dims.tube.w;
  const int box_len = static_cast<int>(bp.size());
  f.paired = Tensor4(Shape4{tube_slice + box_len, D, 1, 1});
  const double ts = f.tube_norm > 0 ? 1.0 / f.tube_norm : 0.0;
  const double bs = f.box_norm > 0 ? 1.0 / f.box_norm : 0.0;
  for (int d = 0; d < D; ++d) {
    int ch = 0;
    for (int c = 0; c < tp.channels(); ++c)
      for (int y = 0; y < dims.tube.h; ++y)
        for (int x = 0; x < dims.tube.w; ++x)
          f.paired(ch++, d, 0, 0) = static_cast<float>(tp(c, d, y, x) * ts);
    for (int i = 0; i < box_len; ++i) f.paired(ch++, d, 0, 0) = static_cast<float>(bp[i] * bs);
  }
  return f;
}

PairedGrads pair_tube_features_backward(const PairedFeatures& f, const Tensor4& grad,
                                        const Shape4& conv2_shape, const Shape4& conv5_shape) {
  require_same_shape(f.paired.shape(), grad.shape(), "pair_tube_features_backward gradient");
  const Tensor4& tp = f.tube_pool.output;
  const Tensor4& bp = f.box_pool.output;
  const int D = tp.depth();
  const int th = tp.height(), tw = tp.width();
  const int box_len = static_cast<int>(bp.size());

  // Gradients and normalized values of both halves in pooled layout.
  Tensor4 gt(tp.shape()), yt(tp.shape());
  std::vector<float> gb(static_cast<std::size_t>(box_len) * D), yb(gb.size());
  for (int d = 0; d < D; ++d) {
    int ch = 0;
    for (int c = 0; c < tp.channels(); ++c)
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x, ++ch) {
          gt(c, d, y, x) = grad(ch, d, 0, 0);
          yt(c, d, y, x) = f.paired(ch, d, 0, 0);
        }
    for (int i = 0; i < box_len; ++i, ++ch) {
      gb[static_cast<std::size_t>(d) * box_len + i] = grad(ch, d, 0, 0);
      yb[static_cast<std::size_t>(d) * box_len + i] = f.paired(ch, d, 0, 0);
    }
  }
  normalize_backward(yt.values(), gt.values(), f.tube_norm);
  normalize_backward(yb, gb, f.box_norm);
  Tensor4 gbox(bp.shape());
  for (int d = 0; d < D; ++d)
    for (int i = 0; i < box_len; ++i) gbox[i] += gb[static_cast<std::size_t>(d) * box_len + i];

  return PairedGrads{toi_pool_backward(gt, f.tube_pool.argmax, conv2_shape),
                     toi_pool_backward(gbox, f.box_pool.argmax, conv5_shape)};
}

std::vector<std::size_t> keep_by_actionness(std::span<const double> actionness,
                                            double threshold) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < actionness.size(); ++i)
    if (actionness[i] >= threshold) keep.push_back(i);
  if (keep.empty() && !actionness.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < actionness.size(); ++i)
      if (actionness[i] > actionness[best]) best = i;
    keep.push_back(best);
  }
  return keep;
}

}  // namespace tcnn
