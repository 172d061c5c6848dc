#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "tcnn/kernels.hpp"

namespace tcnn::test {

inline Tensor4d random_tensor(Shape4 s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor4d t(s);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline Tensor4 random_tensorf(Shape4 s, std::mt19937_64& rng) {
  return random_tensor(s, rng).cast<float>();
}

template <typename T>
BasicKernelSet<T> random_kernels(int out, int in, Extent3 size, std::mt19937_64& rng) {
  BasicKernelSet<T> k;
  k.out_channels = out;
  k.in_channels = in;
  k.size = size;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  k.weights.resize(static_cast<std::size_t>(out) * in * size.d * size.h * size.w);
  k.bias.resize(static_cast<std::size_t>(out));
  for (auto& w : k.weights) w = static_cast<T>(u(rng));
  for (auto& b : k.bias) b = static_cast<T>(u(rng));
  return k;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("tcnn_test_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace tcnn::test
