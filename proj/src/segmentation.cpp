#include "tcnn/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tcnn {

void validate_clip(const ClipSample& clip) {
  const Shape4 s = clip.frames.shape();
  if (s.c != 3) throw ShapeError("clip frames must have 3 channels, got " + s.str());
  if (!clip.masks.empty()) {
    if (static_cast<int>(clip.masks.size()) != s.d)
      throw ShapeError("clip has " + std::to_string(clip.masks.size()) + " masks for " +
                       std::to_string(s.d) + " frames");
    for (const SegMask& m : clip.masks)
      if (m.height() != s.h || m.width() != s.w)
        throw ShapeError("mask " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                         " does not match frames " + s.str());
  }
  if (!clip.boxes.empty() && static_cast<int>(clip.boxes.size()) != s.d)
    throw ShapeError("clip has " + std::to_string(clip.boxes.size()) + " boxes for " +
                     std::to_string(s.d) + " frames");
}

std::optional<Box> mask_to_box(const SegMask& m) {
  int x1 = m.width(), y1 = m.height(), x2 = -1, y2 = -1;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(y, x)) {
        x1 = std::min(x1, x);
        y1 = std::min(y1, y);
        x2 = std::max(x2, x);
        y2 = std::max(y2, y);
      }
  if (x2 < 0) return std::nullopt;
  return Box{double(x1), double(y1), double(x2), double(y2)};
}

template <typename T>
SegLoss<T> segmentation_loss(const BasicTensor4<T>& logits, std::span<const SegMask> gt,
                             double fg_weight) {
  const Shape4 s = logits.shape();
  if (s.c != 2) throw ShapeError("segmentation_loss: logits need 2 channels, got " + s.str());
  if (static_cast<int>(gt.size()) != s.d)
    throw ShapeError("segmentation_loss: " + std::to_string(gt.size()) + " masks for logits " +
                     s.str());
  for (const SegMask& m : gt)
    if (m.height() != s.h || m.width() != s.w)
      throw ShapeError("segmentation_loss: mask " + std::to_string(m.height()) + "x" +
                       std::to_string(m.width()) + " vs logits " + s.str());
  SegLoss<T> r{0.0, BasicTensor4<T>(s)};
  const std::size_t vol = s.volume(), plane = s.plane();
  const double inv_n = 1.0 / static_cast<double>(vol);
  for (std::size_t i = 0; i < vol; ++i) {
    const bool fg = gt[i / plane][i % plane];
    const double w = fg ? fg_weight : 1.0;
    const double z0 = logits[i], z1 = logits[vol + i];
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const double p1 = std::exp(z1 - lse);
    r.loss += w * (lse - (fg ? z1 : z0));
    const double g1 = w * (p1 - (fg ? 1.0 : 0.0)) * inv_n;
    r.grad[vol + i] = static_cast<T>(g1);
    r.grad[i] = static_cast<T>(-g1);
  }
  r.loss *= inv_n;
  return r;
}

template SegLoss<float> segmentation_loss(const BasicTensor4<float>&, std::span<const SegMask>,
                                          double);
template SegLoss<double> segmentation_loss(const BasicTensor4<double>&, std::span<const SegMask>,
                                           double);

Tensor4 foreground_probability(const Tensor4& logits) {
  const Shape4 s = logits.shape();
  if (s.c != 2) throw ShapeError("foreground_probability: logits need 2 channels, got " + s.str());
  Tensor4 p(Shape4{1, s.d, s.h, s.w});
  const std::size_t vol = s.volume();
  for (std::size_t i = 0; i < vol; ++i)
    p[i] = static_cast<float>(1.0 / (1.0 + std::exp(double(logits[i]) - logits[vol + i])));
  return p;
}

std::vector<SegMask> logits_to_masks(const Tensor4& logits, double threshold) {
  const Tensor4 p = foreground_probability(logits);
  const Shape4 s = p.shape();
  std::vector<SegMask> out;
  for (int d = 0; d < s.d; ++d) {
    SegMask m(s.h, s.w);
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        if (p(0, d, y, x) > threshold) m.set(y, x, true);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Box> hard_negative_mine(std::span<const LabeledBox> negatives, int pool_size) {
  if (pool_size < 1) throw std::invalid_argument("hard_negative_mine: pool_size must be >= 1");
  std::vector<std::size_t> order(negatives.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return negatives[a].actionness > negatives[b].actionness;
  });
  if (order.size() > static_cast<std::size_t>(pool_size)) order.resize(pool_size);
  std::vector<Box> out;
  for (std::size_t i : order) out.push_back(negatives[i].box);
  return out;
}

Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), c = mx - mn;
  Hsv o;
  o.v = mx;
  o.s = mx > 0 ? c / mx : 0.0;
  if (c > 0) {
    double h;
    if (mx == r)
      h = std::fmod((g - b) / c, 6.0);
    else if (mx == g)
      h = (b - r) / c + 2.0;
    else
      h = (r - g) / c + 4.0;
    if (h < 0) h += 6.0;
    o.h = h * 60.0;
  }
  return o;
}

void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
  const double c = hsv.v * hsv.s;
  const double hp = hsv.h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = hsv.v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

ClipSample augment_illumination(const ClipSample& clip, double a) {
  validate_clip(clip);
  ClipSample out = clip;
  const Shape4 s = clip.frames.shape();
  const std::size_t vol = s.volume();
  float* px = out.frames.data();
  for (std::size_t i = 0; i < vol; ++i) {
    Hsv hsv = rgb_to_hsv(px[i], px[vol + i], px[2 * vol + i]);
    hsv.v = std::clamp(hsv.v * a, 0.0, 1.0);
    double r, g, b;
    hsv_to_rgb(hsv, r, g, b);
    px[i] = static_cast<float>(r);
    px[vol + i] = static_cast<float>(g);
    px[2 * vol + i] = static_cast<float>(b);
  }
  return out;
}

ClipSample augment_illumination(const ClipSample& clip, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return augment_illumination(clip, 0.9 + 0.2 * u);
}

ClipSample augment_background_replace(const ClipSample& clip, Side side) {
  validate_clip(clip);
  if (clip.masks.empty())
    throw std::invalid_argument("augment_background_replace: clip has no masks");
  ClipSample out = clip;
  const Shape4 s = clip.frames.shape();
  for (int d = 0; d < s.d; ++d) {
    const SegMask& m = clip.masks[d];
    const auto box = mask_to_box(m);
    if (!box) continue;
    if (m.count() == m.size())
      throw std::invalid_argument("augment_background_replace: frame " + std::to_string(d) +
                                  " has no background pixels");
    SegMask background(s.h, s.w);
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) background.set(y, x, !m(y, x));
    const DistanceField near = distance_transform(background);
    const int bx = static_cast<int>(box->x1), by = static_cast<int>(box->y1);
    const int half_w = static_cast<int>(box->width()) / 2, half_h = static_cast<int>(box->height()) / 2;
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        if (!m(y, x)) continue;
        bool hit = false;
        switch (side) {
          case Side::left: hit = x < bx + half_w; break;
          case Side::right: hit = x >= static_cast<int>(box->x2) + 1 - half_w; break;
          case Side::top: hit = y < by + half_h; break;
          case Side::bottom: hit = y >= static_cast<int>(box->y2) + 1 - half_h; break;
        }
        if (!hit) continue;
        const std::size_t i = static_cast<std::size_t>(y) * s.w + x;
        const std::int64_t src = near.nearest[i];
        const int sy = static_cast<int>(src / s.w), sx = static_cast<int>(src % s.w);
        for (int c = 0; c < 3; ++c) out.frames(c, d, y, x) = clip.frames(c, d, sy, sx);
        out.masks[d].set(y, x, false);
      }
    if (!out.boxes.empty()) out.boxes[d] = mask_to_box(out.masks[d]);
  }
  return out;
}

ClipSample augment_flip_shift(const ClipSample& clip, bool flip, int dx, int dy) {
  validate_clip(clip);
  if (dx < -1 || dx > 1 || dy < -1 || dy > 1)
    throw std::invalid_argument("augment_flip_shift: shift must be in {-1,0,1}");
  const Shape4 s = clip.frames.shape();
  // Output pixel (y, x) reads source (sy, sx).
  auto src_x = [&](int x) {
    const int sx = std::clamp(x - dx, 0, s.w - 1);
    return flip ? s.w - 1 - sx : sx;
  };
  auto src_y = [&](int y) { return std::clamp(y - dy, 0, s.h - 1); };
  ClipSample out = clip;
  for (int c = 0; c < s.c; ++c)
    for (int d = 0; d < s.d; ++d)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.frames(c, d, y, x) = clip.frames(c, d, src_y(y), src_x(x));
  for (std::size_t d = 0; d < clip.masks.size(); ++d)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) out.masks[d].set(y, x, clip.masks[d](src_y(y), src_x(x)));
  for (std::size_t d = 0; d < clip.boxes.size(); ++d) {
    if (!clip.masks.empty()) {
      out.boxes[d] = mask_to_box(out.masks[d]);
      continue;
    }
    if (!clip.boxes[d]) continue;
    Box b = *clip.boxes[d];
    if (flip) b = Box{s.w - 1 - b.x2, b.y1, s.w - 1 - b.x1, b.y2};
    b = Box{b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy};
    out.boxes[d] = tcnn::clip(b, s.w, s.h);
  }
  return out;
}

}  // namespace tcnn
