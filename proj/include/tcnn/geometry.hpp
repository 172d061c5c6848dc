#pragma once

#include <algorithm>
#include <string>
#include <vector>

namespace tcnn {

/// Pixel-space box with inclusive corners; a box covering columns 0..9 has
/// width 10.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1 + 1.0; }
  double height() const { return y2 - y1 + 1.0; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool empty() const { return x2 < x1 || y2 < y1; }
  std::string str() const;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Feature-map cell box, inclusive integer corners.
struct CellBox {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  int width() const { return x2 - x1 + 1; }
  int height() const { return y2 - y1 + 1; }
  bool empty() const { return x2 < x1 || y2 < y1; }
  bool inside(int h, int w) const { return x1 >= 0 && y1 >= 0 && x2 < w && y2 < h; }
  std::string str() const;

  friend bool operator==(const CellBox&, const CellBox&) = default;
};

/// One box per feature frame.
using Tube = std::vector<CellBox>;

/// Intersection over union with the inclusive-corner area convention; 0 when
/// the union is empty.
double iou(const Box& a, const Box& b);

Box intersect(const Box& a, const Box& b);
Box enclose(const Box& a, const Box& b);
Box clip(const Box& b, double width, double height);

/// Maps a cell box between grids of different resolution by scaling each
/// cell to the span it covers and rounding outward: floor on the low corner,
/// ceil(x + 1) - 1 on the high corner. The result is clamped to the target.
CellBox rescale_cells(const CellBox& b, int from_h, int from_w, int to_h, int to_w);

/// Pixel box to the feature cells it touches, with the same outward rounding.
CellBox pixel_to_cells(const Box& b, int pixel_h, int pixel_w, int cell_h, int cell_w);

/// Pixel-space span of a feature cell box (inverse of pixel_to_cells up to
/// rounding).
Box cells_to_pixels(const CellBox& b, int cell_h, int cell_w, int pixel_h, int pixel_w);

}  // namespace tcnn
