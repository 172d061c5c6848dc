#include "tcnn/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcnn {

void add_inplace(Tensor4& a, const Tensor4& b) {
  require_same_shape(a.shape(), b.shape(), "add_inplace");
  float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

int Network::push(Layer l) {
  for (const Layer& e : layers_)
    if (e.name == l.name || (!l.hidden_name.empty() && e.name == l.hidden_name))
      throw std::invalid_argument("network: duplicate layer name '" + l.name + "'");
  layers_.push_back(std::move(l));
  return static_cast<int>(layers_.size()) - 1;
}

void Network::check_input(int in) const {
  if (in < 0 || in >= static_cast<int>(layers_.size()))
    throw std::invalid_argument("network: input layer " + std::to_string(in) + " does not exist");
}

int Network::find(const std::string& name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].name == name) return static_cast<int>(i);
  throw std::invalid_argument("network: no layer named '" + name + "'");
}

int Network::input(const std::string& name, Shape4 shape) {
  if (!shape.valid()) throw ShapeError("network input shape " + shape.str() + " is invalid");
  Layer l;
  l.name = name;
  l.kind = LayerKind::input;
  l.shape = shape;
  return push(std::move(l));
}

int Network::conv(const std::string& name, int in, int out, Extent3 k, bool relu) {
  return conv(name, in, out, k, ConvGeometry{{1, 1, 1}, {k.d / 2, k.h / 2, k.w / 2}}, relu);
}

int Network::conv(const std::string& name, int in, int out, Extent3 k, ConvGeometry geom,
                  bool relu) {
  check_input(in);
  Layer l;
  l.name = name;
  l.kind = LayerKind::conv;
  l.inputs = {in};
  l.kernels = KernelSet(out, shape(in).c, k);
  l.geom = geom;
  l.relu = relu;
  l.shape = conv3d_output_shape(shape(in), out, k, geom);
  return push(std::move(l));
}

int Network::pool(const std::string& name, int in, Extent3 kernel, Extent3 stride) {
  check_input(in);
  Layer l;
  l.name = name;
  l.kind = LayerKind::pool;
  l.inputs = {in};
  l.pool_kernel = kernel;
  l.pool_stride = stride;
  l.shape = maxpool3d_output_shape(shape(in), kernel, stride);
  return push(std::move(l));
}

int Network::subpixel(const std::string& name, int in, int out, Extent3 k, UpscaleFactors p,
                      bool relu) {
  check_input(in);
  Layer l;
  l.name = name;
  l.kind = LayerKind::subpixel;
  l.inputs = {in};
  l.kernels = KernelSet(out * p.product(), shape(in).c, k);
  l.factors = p;
  l.relu = relu;
  const Shape4 s = shape(in);
  l.shape = Shape4{out, s.d * p.d, s.h * p.h, s.w * p.w};
  return push(std::move(l));
}

int Network::unpool(const std::string& name, int in, int pool_layer, int out, Extent3 k,
                    UpscaleFactors p, bool relu) {
  check_input(in);
  check_input(pool_layer);
  if (layer(pool_layer).kind != LayerKind::pool)
    throw std::invalid_argument("network: unpool source '" + layer(pool_layer).name +
                                "' is not a pool layer");
  const Shape4 s = shape(in), ps = shape(pool_layer);
  if (ps.d != s.d || ps.h != s.h || ps.w != s.w)
    throw ShapeError("network: unpool input " + s.str() + " does not match pool grid " +
                     ps.str());
  Layer l;
  l.name = name;
  l.kind = LayerKind::unpool;
  l.inputs = {in};
  l.pool_source = pool_layer;
  l.kernels = KernelSet(out, s.c, k);
  l.factors = p;
  l.relu = relu;
  l.shape = Shape4{out, s.d * p.d, s.h * p.h, s.w * p.w};
  return push(std::move(l));
}

int Network::concat(const std::string& name, int a, int b) {
  check_input(a);
  check_input(b);
  const Shape4 sa = shape(a), sb = shape(b);
  if (sa.d != sb.d || sa.h != sb.h || sa.w != sb.w)
    throw ShapeError("network: cannot concatenate " + sa.str() + " and " + sb.str());
  Layer l;
  l.name = name;
  l.kind = LayerKind::concat;
  l.inputs = {a, b};
  l.shape = Shape4{sa.c + sb.c, sa.d, sa.h, sa.w};
  return push(std::move(l));
}

int Network::pixel_mlp(const std::string& hidden_name, const std::string& out_name, int in,
                       int hidden, int out) {
  check_input(in);
  const Shape4 s = shape(in);
  Layer l;
  l.name = out_name;
  l.hidden_name = hidden_name;
  l.kind = LayerKind::pixel_mlp;
  l.inputs = {in};
  l.kernels = KernelSet(hidden, s.c, Extent3{1, 1, 1});
  l.kernels2 = KernelSet(out, hidden, Extent3{1, 1, 1});
  l.hidden_shape = Shape4{hidden, s.d, s.h, s.w};
  l.shape = Shape4{out, s.d, s.h, s.w};
  return push(std::move(l));
}

std::vector<std::pair<std::string, Shape4>> Network::shape_rows() const {
  std::vector<std::pair<std::string, Shape4>> rows;
  for (const Layer& l : layers_) {
    if (l.kind == LayerKind::input) continue;
    if (l.kind == LayerKind::pixel_mlp) rows.emplace_back(l.hidden_name, l.hidden_shape);
    rows.emplace_back(l.name, l.shape);
  }
  return rows;
}

void Network::init(std::mt19937_64& rng) {
  for (Layer& l : layers_) {
    if (!l.kernels.weights.empty()) init_kernels(l.kernels, rng);
    if (!l.kernels2.weights.empty()) init_kernels(l.kernels2, rng);
  }
}

std::vector<std::span<float>> Network::parameters() {
  std::vector<std::span<float>> out;
  for (Layer& l : layers_)
    for (KernelSet* k : {&l.kernels, &l.kernels2})
      if (!k->weights.empty()) {
        out.emplace_back(k->weights);
        out.emplace_back(k->bias);
      }
  return out;
}

std::vector<std::span<const float>> Network::parameters() const {
  std::vector<std::span<const float>> out;
  for (const Layer& l : layers_)
    for (const KernelSet* k : {&l.kernels, &l.kernels2})
      if (!k->weights.empty()) {
        out.emplace_back(k->weights);
        out.emplace_back(k->bias);
      }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : parameters()) n += b.size();
  return n;
}

namespace {

using MatMap = Eigen::Map<Eigen::MatrixXf, 0, Eigen::OuterStride<>>;
using CMatMap = Eigen::Map<const Eigen::MatrixXf, 0, Eigen::OuterStride<>>;
using WMap = Eigen::Map<const Eigen::MatrixXf>;
using WMapMut = Eigen::Map<Eigen::MatrixXf>;

constexpr std::size_t kVoxelTile = 2048;

// Voxels [v0, v0 + n) of a channel-major cube as an n x C column-major block.
CMatMap voxel_block(const Tensor4& t, std::size_t v0, std::size_t n) {
  return CMatMap(t.data() + v0, static_cast<Eigen::Index>(n), t.channels(),
                 Eigen::OuterStride<>(static_cast<Eigen::Index>(t.shape().volume())));
}
MatMap voxel_block(Tensor4& t, std::size_t v0, std::size_t n) {
  return MatMap(t.data() + v0, static_cast<Eigen::Index>(n), t.channels(),
                Eigen::OuterStride<>(static_cast<Eigen::Index>(t.shape().volume())));
}

// Row-major out x in weights viewed column-major: an in x out matrix.
WMap weight_t(const KernelSet& k) { return WMap(k.weights.data(), k.in_channels, k.out_channels); }
WMapMut weight_t(KernelSet& k) { return WMapMut(k.weights.data(), k.in_channels, k.out_channels); }

Tensor4 pixel_mlp_forward(const Layer& l, const Tensor4& x) {
  Tensor4 y(l.shape);
  const std::size_t vol = x.shape().volume();
  const Eigen::Map<const Eigen::RowVectorXf> b1(l.kernels.bias.data(), l.kernels.out_channels);
  const Eigen::Map<const Eigen::RowVectorXf> b2(l.kernels2.bias.data(), l.kernels2.out_channels);
  const std::size_t tiles = (vol + kVoxelTile - 1) / kVoxelTile;
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < tiles; ++t) {
    const std::size_t v0 = t * kVoxelTile, n = std::min(kVoxelTile, vol - v0);
    Eigen::MatrixXf h = voxel_block(x, v0, n) * weight_t(l.kernels);
    h.rowwise() += b1;
    h = h.cwiseMax(0.0f);
    MatMap out = voxel_block(y, v0, n);
    out.noalias() = h * weight_t(l.kernels2);
    out.rowwise() += b2;
  }
  return y;
}

// In-order sums, independent of the block's address.
template <typename M>
Eigen::RowVectorXd column_sums(const M& m) {
  Eigen::RowVectorXd s(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) acc += m(r, c);
    s[c] = acc;
  }
  return s;
}

struct MlpBackward {
  Tensor4 input;
  KernelSet k1, k2;
};

MlpBackward pixel_mlp_backward(const Layer& l, const Tensor4& x, const Tensor4& g,
                               bool want_input) {
  MlpBackward r{want_input ? Tensor4(x.shape()) : Tensor4(), l.kernels, l.kernels2};
  std::fill(r.k1.weights.begin(), r.k1.weights.end(), 0.0f);
  std::fill(r.k1.bias.begin(), r.k1.bias.end(), 0.0f);
  std::fill(r.k2.weights.begin(), r.k2.weights.end(), 0.0f);
  std::fill(r.k2.bias.begin(), r.k2.bias.end(), 0.0f);
  const std::size_t vol = x.shape().volume();
  const Eigen::Map<const Eigen::RowVectorXf> b1(l.kernels.bias.data(), l.kernels.out_channels);
  Eigen::MatrixXd gw1 = Eigen::MatrixXd::Zero(l.kernels.in_channels, l.kernels.out_channels);
  Eigen::MatrixXd gw2 = Eigen::MatrixXd::Zero(l.kernels2.in_channels, l.kernels2.out_channels);
  Eigen::RowVectorXd gb1 = Eigen::RowVectorXd::Zero(l.kernels.out_channels);
  Eigen::RowVectorXd gb2 = Eigen::RowVectorXd::Zero(l.kernels2.out_channels);
  for (std::size_t v0 = 0; v0 < vol; v0 += kVoxelTile) {
    const std::size_t n = std::min(kVoxelTile, vol - v0);
    const CMatMap xb = voxel_block(x, v0, n);
    Eigen::MatrixXf h = xb * weight_t(l.kernels);
    h.rowwise() += b1;
    h = h.cwiseMax(0.0f);
    const CMatMap gy = voxel_block(g, v0, n);
    gw2 += (h.transpose() * gy).cast<double>();
    gb2 += column_sums(gy);
    Eigen::MatrixXf gh = gy * weight_t(l.kernels2).transpose();
    gh = gh.cwiseProduct((h.array() > 0.0f).cast<float>().matrix());
    gw1 += (xb.transpose() * gh).cast<double>();
    gb1 += column_sums(gh);
    if (want_input) voxel_block(r.input, v0, n).noalias() = gh * weight_t(l.kernels).transpose();
  }
  weight_t(r.k1) = gw1.cast<float>();
  weight_t(r.k2) = gw2.cast<float>();
  for (int i = 0; i < gb1.size(); ++i) r.k1.bias[i] = static_cast<float>(gb1[i]);
  for (int i = 0; i < gb2.size(); ++i) r.k2.bias[i] = static_cast<float>(gb2[i]);
  return r;
}

Tensor4 with_relu(Tensor4 t, bool relu) {
  if (relu) relu_inplace(t.values());
  return t;
}

}  // namespace

namespace {

template <typename Get>
Tensor4 run_layer(const Layer& l, const Tensor4* in0, const Tensor4* in1, Get&& pool_map,
                  ArgmaxMap* map_out) {
  switch (l.kind) {
    case LayerKind::input:
      return *in0;
    case LayerKind::conv:
      return with_relu(conv3d(*in0, l.kernels, l.geom), l.relu);
    case LayerKind::pool: {
      auto r = maxpool3d(*in0, l.pool_kernel, l.pool_stride);
      if (map_out) *map_out = std::move(r.argmax);
      return std::move(r.output);
    }
    case LayerKind::subpixel:
      return with_relu(subpixel_upsample3d(*in0, l.kernels, l.factors), l.relu);
    case LayerKind::unpool:
      return with_relu(unpool_conv3d_reference(*in0, pool_map(l.pool_source), l.kernels, l.factors),
                       l.relu);
    case LayerKind::concat:
      return concat_channels(*in0, *in1);
    case LayerKind::pixel_mlp:
      return pixel_mlp_forward(l, *in0);
  }
  throw std::logic_error("unknown layer kind");
}

}  // namespace

Network::Activations Network::forward(const Tensor4& x) const {
  if (layers_.empty() || layers_[0].kind != LayerKind::input)
    throw std::logic_error("network: first layer must be the input");
  require_same_shape(layers_[0].shape, x.shape(), "network input");
  Activations a;
  a.out.resize(layers_.size());
  a.maps.resize(layers_.size());
  a.out[0] = x;
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const Tensor4* in0 = &a.out[l.inputs[0]];
    const Tensor4* in1 = l.inputs.size() > 1 ? &a.out[l.inputs[1]] : nullptr;
    a.out[i] = run_layer(
        l, in0, in1, [&](int p) -> const ArgmaxMap& { return a.maps[p]; }, &a.maps[i]);
  }
  return a;
}

std::map<int, Tensor4> Network::forward_streaming(
    const Tensor4& x, const std::vector<int>& keep,
    const std::function<void(int, const Tensor4&)>& on_layer) const {
  if (layers_.empty() || layers_[0].kind != LayerKind::input)
    throw std::logic_error("network: first layer must be the input");
  require_same_shape(layers_[0].shape, x.shape(), "network input");
  const std::size_t n = layers_.size();
  std::vector<std::size_t> last_use(n, 0);
  std::vector<std::size_t> map_last_use(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int in : layers_[i].inputs) last_use[in] = std::max(last_use[in], i);
    if (layers_[i].pool_source >= 0) map_last_use[layers_[i].pool_source] = i;
  }
  std::vector<Tensor4> out(n);
  std::vector<ArgmaxMap> maps(n);
  out[0] = x;
  if (on_layer) on_layer(0, out[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const Layer& l = layers_[i];
    const Tensor4* in0 = &out[l.inputs[0]];
    const Tensor4* in1 = l.inputs.size() > 1 ? &out[l.inputs[1]] : nullptr;
    out[i] = run_layer(
        l, in0, in1, [&](int p) -> const ArgmaxMap& { return maps[p]; }, &maps[i]);
    if (on_layer) on_layer(static_cast<int>(i), out[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const bool kept = std::find(keep.begin(), keep.end(), static_cast<int>(j)) != keep.end();
      if (!kept && last_use[j] <= i && !out[j].empty()) out[j] = Tensor4();
      if (map_last_use[j] <= i) maps[j] = ArgmaxMap();
    }
  }
  std::map<int, Tensor4> kept;
  for (int k : keep) kept[k] = std::move(out.at(static_cast<std::size_t>(k)));
  return kept;
}

std::vector<std::span<float>> Network::Grads::blocks() {
  std::vector<std::span<float>> out;
  for (std::size_t i = 0; i < k1.size(); ++i)
    for (KernelSet* k : {&k1[i], &k2[i]})
      if (!k->weights.empty()) {
        out.emplace_back(k->weights);
        out.emplace_back(k->bias);
      }
  return out;
}

void Network::Grads::add(const Grads& o) {
  for (std::size_t i = 0; i < k1.size(); ++i) {
    for (std::size_t j = 0; j < k1[i].weights.size(); ++j) k1[i].weights[j] += o.k1[i].weights[j];
    for (std::size_t j = 0; j < k1[i].bias.size(); ++j) k1[i].bias[j] += o.k1[i].bias[j];
    for (std::size_t j = 0; j < k2[i].weights.size(); ++j) k2[i].weights[j] += o.k2[i].weights[j];
    for (std::size_t j = 0; j < k2[i].bias.size(); ++j) k2[i].bias[j] += o.k2[i].bias[j];
  }
}

Network::Grads Network::zero_grads() const {
  Grads g;
  for (const Layer& l : layers_) {
    KernelSet a = l.kernels, b = l.kernels2;
    std::fill(a.weights.begin(), a.weights.end(), 0.0f);
    std::fill(a.bias.begin(), a.bias.end(), 0.0f);
    std::fill(b.weights.begin(), b.weights.end(), 0.0f);
    std::fill(b.bias.begin(), b.bias.end(), 0.0f);
    g.k1.push_back(std::move(a));
    g.k2.push_back(std::move(b));
  }
  return g;
}

Network::Grads Network::backward(const Activations& acts, const std::vector<Tensor4>& seeds) const {
  const std::size_t n = layers_.size();
  if (acts.out.size() != n || seeds.size() != n)
    throw std::invalid_argument("network backward: activations/seeds do not match the layers");
  Grads grads = zero_grads();
  std::vector<Tensor4> g(n);
  auto accumulate = [&](int target, Tensor4&& t) {
    if (g[target].empty())
      g[target] = std::move(t);
    else
      add_inplace(g[target], t);
  };
  for (std::size_t i = 0; i < n; ++i)
    if (!seeds[i].empty()) {
      require_same_shape(layers_[i].shape, seeds[i].shape(), "seed for '" + layers_[i].name + "'");
      accumulate(static_cast<int>(i), Tensor4(seeds[i]));
    }

  for (std::size_t i = n; i-- > 1;) {
    if (g[i].empty()) continue;
    const Layer& l = layers_[i];
    Tensor4 gi = std::move(g[i]);
    g[i] = Tensor4();
    const int in = l.inputs[0];
    const bool want = in != 0;
    if (l.relu) relu_backward_inplace(gi.values(), acts.out[i].values());
    switch (l.kind) {
      case LayerKind::input:
        break;
      case LayerKind::conv: {
        auto r = conv3d_backward(acts.out[in], l.kernels, gi, l.geom, want);
        grads.k1[i] = std::move(r.kernels);
        if (want) accumulate(in, std::move(r.input));
        break;
      }
      case LayerKind::pool:
        if (want) accumulate(in, route_gradient(gi, acts.maps[i]));
        break;
      case LayerKind::subpixel: {
        auto r = subpixel_upsample3d_backward(acts.out[in], l.kernels, gi, l.factors);
        grads.k1[i] = std::move(r.kernels);
        if (want) accumulate(in, std::move(r.input));
        break;
      }
      case LayerKind::unpool: {
        auto r = unpool_conv3d_backward(acts.out[in], acts.maps[l.pool_source], l.kernels, gi,
                                        l.factors);
        grads.k1[i] = std::move(r.kernels);
        if (want) accumulate(in, std::move(r.input));
        break;
      }
      case LayerKind::concat: {
        auto [a, b] = split_channels(gi, layers_[l.inputs[0]].shape.c);
        if (l.inputs[0] != 0) accumulate(l.inputs[0], std::move(a));
        if (l.inputs[1] != 0) accumulate(l.inputs[1], std::move(b));
        break;
      }
      case LayerKind::pixel_mlp: {
        auto r = pixel_mlp_backward(l, acts.out[in], gi, want);
        grads.k1[i] = std::move(r.k1);
        grads.k2[i] = std::move(r.k2);
        if (want) accumulate(in, std::move(r.input));
        break;
      }
    }
  }
  return grads;
}

namespace {

Tensor4 as_blob(std::span<const float> v) {
  return Tensor4(Shape4{1, 1, 1, static_cast<int>(v.size())},
                 std::vector<float>(v.begin(), v.end()));
}

void load_blob(const std::filesystem::path& file, std::span<float> dst) {
  const Tensor4 t = load_tensor(file);
  if (t.size() != dst.size())
    throw std::runtime_error("model blob " + file.string() + " holds " + std::to_string(t.size()) +
                             " values, the architecture expects " + std::to_string(dst.size()));
  std::copy(t.data(), t.data() + t.size(), dst.begin());
}

}  // namespace

void Network::save(const std::filesystem::path& dir, const std::string& prefix,
                   std::vector<std::string>& manifest) const {
  for (const Layer& l : layers_) {
    const std::pair<const KernelSet*, const char*> sets[] = {{&l.kernels, "a"}, {&l.kernels2, "b"}};
    for (const auto& [k, tag] : sets) {
      if (k->weights.empty()) continue;
      const std::string base = prefix + "." + l.name + "." + tag;
      save_tensor(dir / (base + ".w.t4"), as_blob(k->weights));
      save_tensor(dir / (base + ".b.t4"), as_blob(k->bias));
      manifest.push_back("blob " + base + ".w.t4 " + std::to_string(k->weights.size()));
      manifest.push_back("blob " + base + ".b.t4 " + std::to_string(k->bias.size()));
    }
  }
}

void Network::load(const std::filesystem::path& dir, const std::string& prefix) {
  for (Layer& l : layers_) {
    const std::pair<KernelSet*, const char*> sets[] = {{&l.kernels, "a"}, {&l.kernels2, "b"}};
    for (const auto& [k, tag] : sets) {
      if (k->weights.empty()) continue;
      const std::string base = prefix + "." + l.name + "." + tag;
      load_blob(dir / (base + ".w.t4"), k->weights);
      load_blob(dir / (base + ".b.t4"), k->bias);
    }
  }
}

Mlp::Mlp(std::vector<int> dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: needs at least input and output dims");
  for (std::size_t i = 1; i < dims.size(); ++i) {
    if (dims[i - 1] < 1 || dims[i] < 1) throw std::invalid_argument("Mlp: dims must be >= 1");
    layers_.emplace_back(dims[i], dims[i - 1]);
  }
}

void Mlp::init(std::mt19937_64& rng) {
  for (Dense& d : layers_) init_dense(d, rng);
}

std::vector<float> Mlp::forward(std::span<const float> x, Cache* cache) const {
  std::vector<float> a(x.begin(), x.end());
  if (cache) cache->acts.assign(1, a);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    a = fully_connected<float>(a, layers_[i]);
    if (i + 1 < layers_.size()) relu_inplace<float>(a);
    if (cache) cache->acts.push_back(a);
  }
  return a;
}

Mlp::Grads Mlp::backward(const Cache& cache, std::span<const float> grad_out,
                         bool want_input) const {
  if (cache.acts.size() != layers_.size() + 1)
    throw std::invalid_argument("Mlp::backward: cache does not match the layers");
  Grads g;
  g.layers.resize(layers_.size());
  std::vector<float> cur(grad_out.begin(), grad_out.end());
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) relu_backward_inplace<float>(cur, cache.acts[i + 1]);
    auto r = fully_connected_backward<float>(cache.acts[i], layers_[i], cur);
    g.layers[i] = std::move(r.layer);
    if (i > 0 || want_input) cur = std::move(r.input);
  }
  if (want_input) g.input = std::move(cur);
  return g;
}

Mlp::Grads Mlp::zero_grads() const {
  Grads g;
  for (const Dense& d : layers_) g.layers.emplace_back(d.out, d.in);
  return g;
}

void Mlp::Grads::add(const Grads& o) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t j = 0; j < layers[i].weights.size(); ++j)
      layers[i].weights[j] += o.layers[i].weights[j];
    for (std::size_t j = 0; j < layers[i].bias.size(); ++j) layers[i].bias[j] += o.layers[i].bias[j];
  }
}

std::vector<std::span<float>> Mlp::parameters() {
  std::vector<std::span<float>> out;
  for (Dense& d : layers_) {
    out.emplace_back(d.weights);
    out.emplace_back(d.bias);
  }
  return out;
}

std::vector<std::span<float>> Mlp::blocks(Grads& g) {
  std::vector<std::span<float>> out;
  for (Dense& d : g.layers) {
    out.emplace_back(d.weights);
    out.emplace_back(d.bias);
  }
  return out;
}

void Mlp::save(const std::filesystem::path& dir, const std::string& prefix,
               std::vector<std::string>& manifest) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string base = prefix + ".fc" + std::to_string(i);
    save_tensor(dir / (base + ".w.t4"), as_blob(layers_[i].weights));
    save_tensor(dir / (base + ".b.t4"), as_blob(layers_[i].bias));
    manifest.push_back("blob " + base + ".w.t4 " + std::to_string(layers_[i].weights.size()));
    manifest.push_back("blob " + base + ".b.t4 " + std::to_string(layers_[i].bias.size()));
  }
}

void Mlp::load(const std::filesystem::path& dir, const std::string& prefix) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string base = prefix + ".fc" + std::to_string(i);
    load_blob(dir / (base + ".w.t4"), layers_[i].weights);
    load_blob(dir / (base + ".b.t4"), layers_[i].bias);
  }
}

void Optimizer::step(const std::vector<std::span<float>>& params,
                     const std::vector<std::span<float>>& grads, double lr, double grad_scale) {
  if (params.size() != grads.size())
    throw std::invalid_argument("Optimizer: " + std::to_string(params.size()) +
                                " parameter blocks but " + std::to_string(grads.size()) +
                                " gradient blocks");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0f);
      if (kind_ == OptimizerKind::adam) v_.emplace_back(p.size(), 0.0f);
    }
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("Optimizer: parameter list changed between steps");
  ++steps_;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    std::span<float> p = params[b];
    std::span<float> g = grads[b];
    if (p.size() != g.size() || p.size() != m_[b].size())
      throw std::invalid_argument("Optimizer: block " + std::to_string(b) + " size changed");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * grad_scale + decay_ * p[i];
      if (kind_ == OptimizerKind::sgd) {
        m_[b][i] = static_cast<float>(momentum_ * m_[b][i] + gi);
        p[i] = static_cast<float>(p[i] - lr * m_[b][i]);
      } else {
        m_[b][i] = static_cast<float>(b1 * m_[b][i] + (1 - b1) * gi);
        v_[b][i] = static_cast<float>(b2 * v_[b][i] + (1 - b2) * gi * gi);
        p[i] = static_cast<float>(p[i] - lr * (m_[b][i] / c1) / (std::sqrt(v_[b][i] / c2) + eps));
      }
    }
  }
}

}  // namespace tcnn
