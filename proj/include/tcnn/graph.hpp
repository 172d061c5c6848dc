#pragma once

// Small layer graph for the convolutional trunks: layers are appended in
// topological order, each one knows its output shape as soon as it is
// added, and a forward pass keeps every activation so a backward pass can
// be seeded at any set of layers.

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcnn/kernels.hpp"
#include "tcnn/subpixel.hpp"

namespace tcnn {

enum class LayerKind { input, conv, pool, subpixel, unpool, concat, pixel_mlp };

struct Layer {
  std::string name;
  LayerKind kind = LayerKind::input;
  std::vector<int> inputs;
  KernelSet kernels;   // conv, subpixel, unpool, first pixel_mlp map
  KernelSet kernels2;  // second pixel_mlp map
  ConvGeometry geom;
  bool relu = false;
  Extent3 pool_kernel;
  Extent3 pool_stride;
  UpscaleFactors factors;
  int pool_source = -1;     // unpool: the pool layer whose argmax places values
  std::string hidden_name;  // pixel_mlp: name of the hidden map
  Shape4 shape;
  Shape4 hidden_shape;
};

class Network {
 public:
  int input(const std::string& name, Shape4 shape);
  /// Same-padded stride-1 convolution.
  int conv(const std::string& name, int in, int out_channels, Extent3 k = {3, 3, 3},
           bool relu = true);
  int conv(const std::string& name, int in, int out_channels, Extent3 k, ConvGeometry geom,
           bool relu);
  int pool(const std::string& name, int in, Extent3 kernel, Extent3 stride);
  /// Low-resolution convolution to out_channels * p_d * p_h * p_w maps,
  /// then the channel-to-space&depth permutation.
  int subpixel(const std::string& name, int in, int out_channels, Extent3 k, UpscaleFactors p,
               bool relu = true);
  /// Places values at the argmax positions of `pool_layer`, then a
  /// same-padded convolution at high resolution.
  int unpool(const std::string& name, int in, int pool_layer, int out_channels, Extent3 k,
             UpscaleFactors p, bool relu = true);
  int concat(const std::string& name, int a, int b);
  /// Two 1x1 maps applied to every voxel, ReLU on the hidden map only. The
  /// hidden activations are never stored whole.
  int pixel_mlp(const std::string& hidden_name, const std::string& out_name, int in, int hidden,
                int out_channels);

  std::size_t size() const { return layers_.size(); }
  const Layer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
  Layer& layer(int i) { return layers_.at(static_cast<std::size_t>(i)); }
  /// Index of the layer called `name`; throws when absent.
  int find(const std::string& name) const;
  const Shape4& shape(int i) const { return layer(i).shape; }

  /// (name, output shape) per layer in order; pixel_mlp contributes its
  /// hidden row before its output row; the input is left out.
  std::vector<std::pair<std::string, Shape4>> shape_rows() const;

  void init(std::mt19937_64& rng);
  std::size_t parameter_count() const;

  /// Parameter blocks in a fixed order (weights then bias of every kernel
  /// set, layer by layer).
  std::vector<std::span<float>> parameters();
  std::vector<std::span<const float>> parameters() const;

  struct Activations {
    std::vector<Tensor4> out;
    std::vector<ArgmaxMap> maps;  // pool layers only
  };

  Activations forward(const Tensor4& x) const;
  /// Forward pass that frees each activation once nothing later reads it,
  /// except those listed in `keep`. Returns the kept activations.
  std::map<int, Tensor4> forward_streaming(const Tensor4& x, const std::vector<int>& keep,
                                           const std::function<void(int, const Tensor4&)>&
                                               on_layer = {}) const;

  struct Grads {
    std::vector<KernelSet> k1;
    std::vector<KernelSet> k2;
    std::vector<std::span<float>> blocks();
    void add(const Grads& other);
  };

  /// Gradients of all parameters given upstream gradients `seeds[i]` at
  /// layer i (empty tensors mean none).
  Grads backward(const Activations& acts, const std::vector<Tensor4>& seeds) const;
  Grads zero_grads() const;

  void save(const std::filesystem::path& dir, const std::string& prefix,
            std::vector<std::string>& manifest) const;
  void load(const std::filesystem::path& dir, const std::string& prefix);

 private:
  int push(Layer l);
  void check_input(int in) const;
  std::vector<Layer> layers_;
};

/// Stack of dense layers with ReLU after every layer but the last.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> dims);

  const std::vector<Dense>& layers() const { return layers_; }
  std::vector<Dense>& layers() { return layers_; }
  int in_dim() const { return layers_.front().in; }
  int out_dim() const { return layers_.back().out; }

  void init(std::mt19937_64& rng);

  struct Cache {
    std::vector<std::vector<float>> acts;  // input, then each layer's output
  };
  std::vector<float> forward(std::span<const float> x, Cache* cache = nullptr) const;

  struct Grads {
    std::vector<Dense> layers;
    std::vector<float> input;
    void add(const Grads& other);
  };
  Grads backward(const Cache& cache, std::span<const float> grad_out, bool want_input) const;
  Grads zero_grads() const;

  std::vector<std::span<float>> parameters();
  static std::vector<std::span<float>> blocks(Grads& g);

  void save(const std::filesystem::path& dir, const std::string& prefix,
            std::vector<std::string>& manifest) const;
  void load(const std::filesystem::path& dir, const std::string& prefix);

 private:
  std::vector<Dense> layers_;
};

enum class OptimizerKind { sgd, adam };

/// SGD with momentum, or Adam; both with optional L2 weight decay. State is
/// keyed by the position of each parameter block in the list passed to
/// step, so one instance serves one fixed parameter list.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::sgd, double momentum = 0.9,
                     double weight_decay = 0.0)
      : kind_(kind), momentum_(momentum), decay_(weight_decay) {}
  void step(const std::vector<std::span<float>>& params,
            const std::vector<std::span<float>>& grads, double lr, double grad_scale = 1.0);

 private:
  OptimizerKind kind_;
  double momentum_;
  double decay_;
  long steps_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

/// Adds b into a element-wise; shapes must agree.
void add_inplace(Tensor4& a, const Tensor4& b);

}  // namespace tcnn
