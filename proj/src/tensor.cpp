#include "tcnn/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace tcnn {

std::string Shape4::str() const {
  return std::to_string(c) + "x" + std::to_string(d) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

void require_same_shape(const Shape4& expected, const Shape4& actual, const std::string& what) {
  if (!(expected == actual))
    throw ShapeError(what + ": expected shape " + expected.str() + ", got " + actual.str());
}

template <typename T>
BasicTensor4<T> concat_channels(const BasicTensor4<T>& a, const BasicTensor4<T>& b) {
  const Shape4 sa = a.shape(), sb = b.shape();
  if (sa.d != sb.d || sa.h != sb.h || sa.w != sb.w)
    throw ShapeError("concat_channels: " + sa.str() + " and " + sb.str() +
                     " differ outside the channel axis");
  BasicTensor4<T> out(Shape4{sa.c + sb.c, sa.d, sa.h, sa.w});
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
  return out;
}

template <typename T>
std::pair<BasicTensor4<T>, BasicTensor4<T>> split_channels(const BasicTensor4<T>& x,
                                                           int first_channels) {
  const Shape4 s = x.shape();
  if (first_channels < 1 || first_channels >= s.c)
    throw ShapeError("split_channels: cannot split " + s.str() + " at channel " +
                     std::to_string(first_channels));
  BasicTensor4<T> a(Shape4{first_channels, s.d, s.h, s.w});
  BasicTensor4<T> b(Shape4{s.c - first_channels, s.d, s.h, s.w});
  std::copy(x.values().begin(), x.values().begin() + a.size(), a.values().begin());
  std::copy(x.values().begin() + a.size(), x.values().end(), b.values().begin());
  return {std::move(a), std::move(b)};
}

template <typename T>
BasicTensor4<T> concat_depth(std::span<const BasicTensor4<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_depth: no parts");
  const Shape4 s0 = parts[0].shape();
  int depth = 0;
  for (const auto& p : parts) {
    const Shape4 s = p.shape();
    if (s.c != s0.c || s.h != s0.h || s.w != s0.w)
      throw ShapeError("concat_depth: " + s0.str() + " and " + s.str() +
                       " differ outside the depth axis");
    depth += s.d;
  }
  BasicTensor4<T> out(Shape4{s0.c, depth, s0.h, s0.w});
  const std::size_t plane = s0.plane();
  for (int c = 0; c < s0.c; ++c) {
    T* dst = out.channel(c).data();
    for (const auto& p : parts) {
      auto src = p.channel(c);
      std::copy(src.begin(), src.end(), dst);
      dst += static_cast<std::size_t>(p.depth()) * plane;
    }
  }
  return out;
}

template <typename T>
BasicTensor4<T> slice_depth(const BasicTensor4<T>& x, int first, int count) {
  const Shape4 s = x.shape();
  if (first < 0 || count < 1 || first + count > s.d)
    throw ShapeError("slice_depth: range [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside " + s.str());
  BasicTensor4<T> out(Shape4{s.c, count, s.h, s.w});
  const std::size_t plane = s.plane();
  for (int c = 0; c < s.c; ++c) {
    const T* src = x.channel(c).data() + static_cast<std::size_t>(first) * plane;
    std::copy(src, src + static_cast<std::size_t>(count) * plane, out.channel(c).data());
  }
  return out;
}

template BasicTensor4<float> concat_channels(const BasicTensor4<float>&, const BasicTensor4<float>&);
template BasicTensor4<double> concat_channels(const BasicTensor4<double>&,
                                              const BasicTensor4<double>&);
template std::pair<BasicTensor4<float>, BasicTensor4<float>> split_channels(
    const BasicTensor4<float>&, int);
template std::pair<BasicTensor4<double>, BasicTensor4<double>> split_channels(
    const BasicTensor4<double>&, int);
template BasicTensor4<float> concat_depth(std::span<const BasicTensor4<float>>);
template BasicTensor4<double> concat_depth(std::span<const BasicTensor4<double>>);
template BasicTensor4<float> slice_depth(const BasicTensor4<float>&, int, int);
template BasicTensor4<double> slice_depth(const BasicTensor4<double>&, int, int);

namespace {

void put_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor4& t) {
  const Shape4 s = t.shape();
  out.write("T4", 2);
  put_u16(out, kTensorFileVersion);
  put_u32(out, static_cast<std::uint32_t>(s.c));
  put_u32(out, static_cast<std::uint32_t>(s.d));
  put_u32(out, static_cast<std::uint32_t>(s.h));
  put_u32(out, static_cast<std::uint32_t>(s.w));
  std::vector<unsigned char> buf(t.size() * 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(t[i]);
    for (int k = 0; k < 4; ++k) buf[4 * i + k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write_tensor: stream write failed");
}

Tensor4 read_tensor(std::istream& in) {
  unsigned char header[kTensorHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(header), kTensorHeaderBytes))
    throw std::runtime_error("read_tensor: truncated header");
  if (header[0] != 'T' || header[1] != '4') throw std::runtime_error("read_tensor: bad magic");
  const auto version = static_cast<std::uint16_t>(header[2] | (header[3] << 8));
  if (version != kTensorFileVersion)
    throw std::runtime_error("read_tensor: unsupported version " + std::to_string(version));
  const Shape4 s{static_cast<int>(get_u32(header + 4)), static_cast<int>(get_u32(header + 8)),
                 static_cast<int>(get_u32(header + 12)), static_cast<int>(get_u32(header + 16))};
  if (!s.valid()) throw std::runtime_error("read_tensor: invalid dims " + s.str());
  std::vector<unsigned char> buf(s.size() * 4);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw std::runtime_error("read_tensor: truncated payload for " + s.str());
  std::vector<float> values(s.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<float>(get_u32(&buf[4 * i]));
  return Tensor4(s, std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor4& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor4 load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace tcnn
