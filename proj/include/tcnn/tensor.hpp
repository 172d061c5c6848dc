#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tcnn {

/// Extent of a C x D x H x W feature cube.
struct Shape4 {
  int c = 1;
  int d = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(c) * d * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t volume() const { return static_cast<std::size_t>(d) * h * w; }
  bool valid() const { return c >= 1 && d >= 1 && h >= 1 && w >= 1; }
  std::string str() const;

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Depth/height/width triple used for kernel extents, strides and padding.
struct Extent3 {
  int d = 1;
  int h = 1;
  int w = 1;
  friend bool operator==(const Extent3&, const Extent3&) = default;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Storage allocator with a fixed 64-byte base alignment.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

/// Dense C x D x H x W cube, values stored channel-major then depth,
/// height, width. The layout is part of the on-disk contract.
template <typename T>
class BasicTensor4 {
 public:
  using value_type = T;

  BasicTensor4() = default;
  explicit BasicTensor4(Shape4 shape, T fill = T{}) : shape_(shape) {
    if (!shape.valid()) throw ShapeError("tensor dims must be >= 1, got " + shape.str());
    values_.assign(shape.size(), fill);
  }
  BasicTensor4(Shape4 shape, const std::vector<T>& values)
      : shape_(shape), values_(values.begin(), values.end()) {
    if (!shape.valid()) throw ShapeError("tensor dims must be >= 1, got " + shape.str());
    if (values_.size() != shape.size())
      throw ShapeError("value count " + std::to_string(values_.size()) + " does not match " +
                       shape.str());
  }

  const Shape4& shape() const { return shape_; }
  int channels() const { return shape_.c; }
  int depth() const { return shape_.d; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(int c, int d, int h, int w) const {
    return ((static_cast<std::size_t>(c) * shape_.d + d) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(int c, int d, int h, int w) { return values_[index(c, d, h, w)]; }
  T operator()(int c, int d, int h, int w) const { return values_[index(c, d, h, w)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  T operator[](std::size_t i) const { return values_[i]; }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  /// Contiguous D x H x W block of one channel.
  std::span<T> channel(int c) {
    return {values_.data() + static_cast<std::size_t>(c) * shape_.volume(), shape_.volume()};
  }
  std::span<const T> channel(int c) const {
    return {values_.data() + static_cast<std::size_t>(c) * shape_.volume(), shape_.volume()};
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  template <typename U>
  BasicTensor4<U> cast() const {
    return BasicTensor4<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  friend bool operator==(const BasicTensor4&, const BasicTensor4&) = default;

 private:
  Shape4 shape_{0, 0, 0, 0};
  std::vector<T, AlignedAllocator<T>> values_;
};

using Tensor4 = BasicTensor4<float>;
using Tensor4d = BasicTensor4<double>;

/// Throws ShapeError naming both shapes when they differ.
void require_same_shape(const Shape4& expected, const Shape4& actual, const std::string& what);

/// Concatenate along the channel axis; all other dims must agree.
template <typename T>
BasicTensor4<T> concat_channels(const BasicTensor4<T>& a, const BasicTensor4<T>& b);

/// Split the channel axis at `first_channels` (inverse of concat_channels).
template <typename T>
std::pair<BasicTensor4<T>, BasicTensor4<T>> split_channels(const BasicTensor4<T>& x,
                                                           int first_channels);

/// Concatenate along the depth axis; channel and spatial dims must agree.
template <typename T>
BasicTensor4<T> concat_depth(std::span<const BasicTensor4<T>> parts);

/// Copy depth slices [first, first + count) of every channel.
template <typename T>
BasicTensor4<T> slice_depth(const BasicTensor4<T>& x, int first, int count);

// Tensor file: "T4", u16 version, then C, D, H, W as little-endian u32,
// followed by C*D*H*W little-endian IEEE-754 binary32 values.
inline constexpr std::uint16_t kTensorFileVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 20;

void write_tensor(std::ostream& out, const Tensor4& t);
Tensor4 read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const Tensor4& t);
Tensor4 load_tensor(const std::filesystem::path& path);

}  // namespace tcnn
