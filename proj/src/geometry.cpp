#include "tcnn/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tcnn {

std::string Box::str() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "(%g,%g,%g,%g)", x1, y1, x2, y2);
  return buf;
}

std::string CellBox::str() const {
  return "(" + std::to_string(x1) + "," + std::to_string(y1) + "," + std::to_string(x2) + "," +
         std::to_string(y2) + ")";
}

Box intersect(const Box& a, const Box& b) {
  return Box{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2),
             std::min(a.y2, b.y2)};
}

Box enclose(const Box& a, const Box& b) {
  return Box{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
             std::max(a.y2, b.y2)};
}

double iou(const Box& a, const Box& b) {
  const Box i = intersect(a, b);
  const double inter = i.empty() ? 0.0 : i.area();
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Box clip(const Box& b, double width, double height) {
  return Box{std::clamp(b.x1, 0.0, width - 1), std::clamp(b.y1, 0.0, height - 1),
             std::clamp(b.x2, 0.0, width - 1), std::clamp(b.y2, 0.0, height - 1)};
}

namespace {

// Low edge of source index i on a grid of `from` cells mapped onto `to`.
int scale_low(long long i, long long from, long long to) { return static_cast<int>(i * to / from); }

// High edge: last target cell touched by source cell i.
int scale_high(long long i, long long from, long long to) {
  return static_cast<int>(((i + 1) * to + from - 1) / from - 1);
}

}  // namespace

CellBox rescale_cells(const CellBox& b, int from_h, int from_w, int to_h, int to_w) {
  if (from_h < 1 || from_w < 1 || to_h < 1 || to_w < 1)
    throw std::invalid_argument("rescale_cells: grid dims must be positive");
  CellBox r{scale_low(b.x1, from_w, to_w), scale_low(b.y1, from_h, to_h),
            scale_high(b.x2, from_w, to_w), scale_high(b.y2, from_h, to_h)};
  r.x1 = std::clamp(r.x1, 0, to_w - 1);
  r.y1 = std::clamp(r.y1, 0, to_h - 1);
  r.x2 = std::clamp(r.x2, r.x1, to_w - 1);
  r.y2 = std::clamp(r.y2, r.y1, to_h - 1);
  return r;
}

CellBox pixel_to_cells(const Box& b, int pixel_h, int pixel_w, int cell_h, int cell_w) {
  if (pixel_h < 1 || pixel_w < 1 || cell_h < 1 || cell_w < 1)
    throw std::invalid_argument("pixel_to_cells: grid dims must be positive");
  // Multiply before dividing so integer pixel coordinates stay exact.
  CellBox r{static_cast<int>(std::floor(b.x1 * cell_w / pixel_w)),
            static_cast<int>(std::floor(b.y1 * cell_h / pixel_h)),
            static_cast<int>(std::ceil((b.x2 + 1.0) * cell_w / pixel_w)) - 1,
            static_cast<int>(std::ceil((b.y2 + 1.0) * cell_h / pixel_h)) - 1};
  r.x1 = std::clamp(r.x1, 0, cell_w - 1);
  r.y1 = std::clamp(r.y1, 0, cell_h - 1);
  r.x2 = std::clamp(r.x2, r.x1, cell_w - 1);
  r.y2 = std::clamp(r.y2, r.y1, cell_h - 1);
  return r;
}

Box cells_to_pixels(const CellBox& b, int cell_h, int cell_w, int pixel_h, int pixel_w) {
  const double sx = static_cast<double>(pixel_w) / cell_w;
  const double sy = static_cast<double>(pixel_h) / cell_h;
  return Box{b.x1 * sx, b.y1 * sy, (b.x2 + 1) * sx - 1.0, (b.y2 + 1) * sy - 1.0};
}

}  // namespace tcnn
