#include "tcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tcnn {

const char* motion_name(Motion m) {
  switch (m) {
    case Motion::horizontal: return "horizontal";
    case Motion::vertical: return "vertical";
    case Motion::diagonal: return "diagonal";
    case Motion::oscillating: return "oscillating";
  }
  return "?";
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("synthetic spec: " + m); };
  if (num_videos < num_classes) fail("num_videos must be >= num_classes");
  if (frames < 8) fail("frames must be >= 8");
  if (height < 32 || width < 32) fail("resolution must be at least 32x32");
  if (num_classes < 2 || num_classes > 4) fail("num_classes must be between 2 and 4");
  if (actor_min < 4 || actor_max < actor_min) fail("actor size range is invalid");
  if (actor_max + 2 * frames + 16 > std::min(height, width))
    fail("actor size range and frame count do not fit the resolution");
  if (noise < 0) fail("noise must be >= 0");
  if (!(train_fraction > 0 && train_fraction < 1)) fail("train_fraction must lie in (0,1)");
}

SyntheticSpec SyntheticSpec::from_config(const Config& c) {
  SyntheticSpec s;
  auto get = [&](const char* k, auto& field) {
    if (!c.has(k)) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>)
      field = c.real(k);
    else
      field = static_cast<std::decay_t<decltype(field)>>(c.integer(k));
  };
  get("num_videos", s.num_videos);
  get("frames", s.frames);
  get("height", s.height);
  get("width", s.width);
  get("num_classes", s.num_classes);
  get("actor_min", s.actor_min);
  get("actor_max", s.actor_max);
  get("noise", s.noise);
  get("train_fraction", s.train_fraction);
  get("seed", s.seed);
  return s;
}

void SyntheticSpec::to_config(Config& c) const {
  char buf[64];
  c.set("num_videos", std::to_string(num_videos));
  c.set("frames", std::to_string(frames));
  c.set("height", std::to_string(height));
  c.set("width", std::to_string(width));
  c.set("num_classes", std::to_string(num_classes));
  c.set("actor_min", std::to_string(actor_min));
  c.set("actor_max", std::to_string(actor_max));
  std::snprintf(buf, sizeof buf, "%.17g", noise);
  c.set("noise", buf);
  std::snprintf(buf, sizeof buf, "%.17g", train_fraction);
  c.set("train_fraction", buf);
  c.set("seed", std::to_string(seed));
}

namespace {

// Draws from the raw engine output so results do not depend on the
// standard library's distribution implementations.
struct Draw {
  std::mt19937_64 rng;
  double unit() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * unit(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  int sign() { return (rng() & 1) ? 1 : -1; }
};

}  // namespace

Video synthesize_video(const SyntheticSpec& spec, int id) {
  spec.validate();
  if (id < 0 || id >= spec.num_videos)
    throw std::out_of_range("video id " + std::to_string(id) + " outside the dataset");
  Draw r{std::mt19937_64(spec.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(id) + 1)};
  const int H = spec.height, W = spec.width, F = spec.frames;
  Video v;
  v.id = id;
  v.label = id % spec.num_classes;
  const Motion motion = static_cast<Motion>(v.label);

  const int aw = r.integer(spec.actor_min, spec.actor_max);
  const int ah = r.integer(spec.actor_min, spec.actor_max);
  // Per-frame offsets relative to the start position.
  std::vector<int> ox(F, 0), oy(F, 0);
  const int speed = r.integer(1, 2);
  const int sx = r.sign(), sy = r.sign();
  const double amp = r.uniform(4.0, 7.0);
  const double phase = r.unit() * 2.0 * std::numbers::pi;
  for (int t = 0; t < F; ++t) {
    switch (motion) {
      case Motion::horizontal: ox[t] = sx * speed * t; break;
      case Motion::vertical: oy[t] = sy * speed * t; break;
      case Motion::diagonal:
        ox[t] = sx * speed * t;
        oy[t] = sy * speed * t;
        break;
      case Motion::oscillating:
        ox[t] = static_cast<int>(std::lround(amp * std::sin(2.0 * std::numbers::pi * t / 8.0 + phase)));
        break;
    }
  }
  const auto [minx, maxx] = std::minmax_element(ox.begin(), ox.end());
  const auto [miny, maxy] = std::minmax_element(oy.begin(), oy.end());
  const int x0 = r.integer(-*minx, W - aw - *maxx);
  const int y0 = r.integer(-*miny, H - ah - *maxy);

  double base[3], a[3], b[3];
  for (double& c : base) c = r.uniform(0.3, 0.7);
  for (double& c : a) c = r.uniform(0.75, 1.0);
  for (double& c : b) c = r.uniform(0.0, 0.25);
  const int cell = r.integer(3, 5);
  std::vector<float> texture(static_cast<std::size_t>(3) * H * W);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < H * W; ++i)
      texture[static_cast<std::size_t>(c) * H * W + i] =
          static_cast<float>(base[c] + r.uniform(-0.25, 0.25));

  v.frames = Tensor4(Shape4{3, F, H, W});
  for (int t = 0; t < F; ++t) {
    const int bx = x0 + ox[t], by = y0 + oy[t];
    Box box{double(bx), double(by), double(bx + aw - 1), double(by + ah - 1)};
    SegMask m(H, W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const bool inside = x >= bx && x < bx + aw && y >= by && y < by + ah;
        if (inside) m.set(y, x, true);
        const bool dark = (((x - bx) / cell) + ((y - by) / cell)) % 2 != 0;
        for (int c = 0; c < 3; ++c) {
          double val = inside ? (dark ? b[c] : a[c])
                              : texture[static_cast<std::size_t>(c) * H * W + y * W + x];
          val += r.uniform(-spec.noise, spec.noise);
          v.frames(c, t, y, x) = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
      }
    v.masks.push_back(std::move(m));
    v.boxes.push_back(box);
  }
  return v;
}

void split_ids(const SyntheticSpec& spec, std::vector<int>& train, std::vector<int>& test) {
  train.clear();
  test.clear();
  for (int c = 0; c < spec.num_classes; ++c) {
    std::vector<int> ids;
    for (int i = c; i < spec.num_videos; i += spec.num_classes) ids.push_back(i);
    const auto n_train = static_cast<std::size_t>(std::lround(spec.train_fraction * ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) (k < n_train ? train : test).push_back(ids[k]);
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

std::filesystem::path frame_path(const std::filesystem::path& root, int video, int frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "videos/%03d/frame_%04d.t4", video, frame);
  return root / buf;
}

std::filesystem::path mask_path(const std::filesystem::path& root, int video, int frame) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "masks/%03d/frame_%04d.sm", video, frame);
  return root / buf;
}

namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void gen_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream ann(dir / "annotations.csv");
  if (!ann) throw std::runtime_error("cannot write " + (dir / "annotations.csv").string());
  ann << "video,frame,x1,y1,x2,y2,class\n";
  for (int id = 0; id < spec.num_videos; ++id) {
    const Video v = synthesize_video(spec, id);
    std::filesystem::create_directories(frame_path(dir, id, 0).parent_path());
    std::filesystem::create_directories(mask_path(dir, id, 0).parent_path());
    for (int t = 0; t < spec.frames; ++t) {
      save_tensor(frame_path(dir, id, t), slice_depth(v.frames, t, 1));
      save_mask(mask_path(dir, id, t), v.masks[t]);
      const Box& b = v.boxes[t];
      ann << id << ',' << t << ',' << b.x1 << ',' << b.y1 << ',' << b.x2 << ',' << b.y2 << ','
          << v.label << '\n';
    }
  }
  if (!ann) throw std::runtime_error("failed writing annotations");
  Config c;
  spec.to_config(c);
  std::vector<int> train, test;
  split_ids(spec, train, test);
  c.set("train", join(train));
  c.set("test", join(test));
  std::ofstream cfg(dir / "dataset.cfg");
  cfg << c.dump();
  if (!cfg) throw std::runtime_error("cannot write " + (dir / "dataset.cfg").string());
}

Dataset::Dataset(const std::filesystem::path& dir) : root_(dir) {
  Config c;
  c.merge_file(dir / "dataset.cfg");
  spec_ = SyntheticSpec::from_config(c);
  spec_.validate();
  train_ = c.int_list("train");
  test_ = c.int_list("test");
}

Video Dataset::load_annotations(int id) const {
  if (id < 0 || id >= spec_.num_videos)
    throw std::out_of_range("video id " + std::to_string(id) + " outside the dataset");
  Video v;
  v.id = id;
  v.label = -1;
  for (int t = 0; t < spec_.frames; ++t) v.masks.push_back(load_mask(mask_path(root_, id, t)));
  std::ifstream ann(root_ / "annotations.csv");
  if (!ann) throw std::runtime_error("cannot read " + (root_ / "annotations.csv").string());
  std::string line;
  std::getline(ann, line);
  v.boxes.resize(static_cast<std::size_t>(spec_.frames));
  int seen = 0;
  while (std::getline(ann, line)) {
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    int vid, frame, cls;
    Box b;
    if (!(ss >> vid >> frame >> b.x1 >> b.y1 >> b.x2 >> b.y2 >> cls))
      throw std::runtime_error("malformed annotation line: " + line);
    if (vid != id) continue;
    if (frame < 0 || frame >= spec_.frames)
      throw std::runtime_error("annotation frame " + std::to_string(frame) + " out of range");
    v.boxes[frame] = b;
    v.label = cls;
    ++seen;
  }
  if (seen != spec_.frames)
    throw std::runtime_error("video " + std::to_string(id) + " has " + std::to_string(seen) +
                             " annotations, expected " + std::to_string(spec_.frames));
  return v;
}

Video Dataset::load(int id) const {
  Video v = load_annotations(id);
  std::vector<Tensor4> frames;
  for (int t = 0; t < spec_.frames; ++t) frames.push_back(load_tensor(frame_path(root_, id, t)));
  v.frames = concat_depth<float>(std::span<const Tensor4>(frames));
  return v;
}

std::vector<Video> Dataset::load(const std::vector<int>& ids) const {
  std::vector<Video> out;
  for (int id : ids) out.push_back(load(id));
  return out;
}

}  // namespace tcnn
