#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace tcnn {

/// Binary per-pixel map, 1 = action foreground, row-major.
class SegMask {
 public:
  SegMask() = default;
  SegMask(int height, int width, bool fill = false);

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return bits_.size(); }
  bool operator()(int y, int x) const { return bits_[static_cast<std::size_t>(y) * w_ + x] != 0; }
  void set(int y, int x, bool v) { bits_[static_cast<std::size_t>(y) * w_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  std::size_t count() const;
  bool any() const { return count() > 0; }

  friend bool operator==(const SegMask&, const SegMask&) = default;

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Mask file: "SM", then H and W as little-endian u32, then H*W bits packed
// row-major, most significant bit first, zero-padded to a whole byte.
void write_mask(std::ostream& out, const SegMask& m);
SegMask read_mask(std::istream& in);
void save_mask(const std::filesystem::path& path, const SegMask& m);
SegMask load_mask(const std::filesystem::path& path);

/// Foreground pixels with at least one 4-neighbour in the background.
/// Pixels outside the image do not count as background.
SegMask contour(const SegMask& m);

/// Exact Euclidean distance transform: for every pixel, the squared
/// distance to the nearest set pixel of `features` and that pixel's flat
/// index (-1 and +inf when there is none).
struct DistanceField {
  int height = 0;
  int width = 0;
  std::vector<double> dist2;
  std::vector<std::int64_t> nearest;
};

DistanceField distance_transform(const SegMask& features);

}  // namespace tcnn
