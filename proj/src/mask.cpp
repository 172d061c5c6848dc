#include "tcnn/mask.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tcnn {

SegMask::SegMask(int height, int width, bool fill) : h_(height), w_(width) {
  if (height < 1 || width < 1)
    throw std::invalid_argument("SegMask: dims must be >= 1, got " + std::to_string(height) +
                                "x" + std::to_string(width));
  bits_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t SegMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw std::runtime_error("mask file truncated in header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_mask(std::ostream& out, const SegMask& m) {
  out.write("SM", 2);
  put_u32(out, static_cast<std::uint32_t>(m.height()));
  put_u32(out, static_cast<std::uint32_t>(m.width()));
  std::vector<char> packed((m.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (0x80 >> (i % 8)));
  out.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  if (!out) throw std::runtime_error("failed writing mask");
}

SegMask read_mask(std::istream& in) {
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'S' || magic[1] != 'M') throw std::runtime_error("not a mask file");
  const std::uint32_t h = get_u32(in), w = get_u32(in);
  if (h == 0 || w == 0 || h > (1u << 16) || w > (1u << 16))
    throw std::runtime_error("mask file has invalid dims " + std::to_string(h) + "x" +
                             std::to_string(w));
  SegMask m(static_cast<int>(h), static_cast<int>(w));
  std::vector<unsigned char> packed((m.size() + 7) / 8);
  in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!in) throw std::runtime_error("mask file truncated in payload");
  for (std::size_t i = 0; i < m.size(); ++i)
    if (packed[i / 8] & (0x80 >> (i % 8)))
      m.set(static_cast<int>(i / w), static_cast<int>(i % w), true);
  return m;
}

void save_mask(const std::filesystem::path& path, const SegMask& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_mask(out, m);
}

SegMask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_mask(in);
}

SegMask contour(const SegMask& m) {
  SegMask c(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m(y, x)) continue;
      const bool edge = (y > 0 && !m(y - 1, x)) || (y + 1 < m.height() && !m(y + 1, x)) ||
                        (x > 0 && !m(y, x - 1)) || (x + 1 < m.width() && !m(y, x + 1));
      if (edge) c.set(y, x, true);
    }
  return c;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - p)^2 + f[p] over finite sites.
void envelope_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& arg) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v;
  std::vector<double> z;
  v.reserve(n);
  z.reserve(n + 1);
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    while (!v.empty()) {
      const int p = v.back();
      const double s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z.back()) {
        v.pop_back();
        z.pop_back();
      } else {
        v.push_back(q);
        z.push_back(s);
        break;
      }
    }
    if (v.empty()) {
      v.push_back(q);
      z.assign(1, -kInf);
    }
  }
  d.assign(n, kInf);
  arg.assign(n, -1);
  if (v.empty()) return;
  z.push_back(kInf);
  std::size_t k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const int p = v[k];
    d[q] = double(q - p) * (q - p) + f[p];
    arg[q] = p;
  }
}

}  // namespace

DistanceField distance_transform(const SegMask& features) {
  const int h = features.height(), w = features.width();
  DistanceField r{h, w, std::vector<double>(features.size(), kInf),
                  std::vector<std::int64_t>(features.size(), -1)};
  std::vector<double> col_d(features.size(), kInf);
  std::vector<int> col_arg(features.size(), -1);
  std::vector<double> f, d;
  std::vector<int> arg;
  for (int x = 0; x < w; ++x) {
    f.assign(h, kInf);
    for (int y = 0; y < h; ++y)
      if (features(y, x)) f[y] = 0.0;
    envelope_1d(f, d, arg);
    for (int y = 0; y < h; ++y) {
      col_d[static_cast<std::size_t>(y) * w + x] = d[y];
      col_arg[static_cast<std::size_t>(y) * w + x] = arg[y];
    }
  }
  for (int y = 0; y < h; ++y) {
    f.assign(col_d.begin() + static_cast<std::ptrdiff_t>(y) * w,
             col_d.begin() + static_cast<std::ptrdiff_t>(y + 1) * w);
    envelope_1d(f, d, arg);
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      r.dist2[i] = d[x];
      if (arg[x] >= 0) {
        const int ny = col_arg[static_cast<std::size_t>(y) * w + arg[x]];
        r.nearest[i] = static_cast<std::int64_t>(ny) * w + arg[x];
      }
    }
  }
  return r;
}

}  // namespace tcnn
