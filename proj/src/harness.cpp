#include "tcnn/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <type_traits>

namespace tcnn {

namespace {

template <typename R, typename F>
void visit_fields(R& r, F&& f) {
  f("mode", r.mode);
  f("data", r.data);
  f("model", r.model);
  f("out", r.out);
  f("seed", r.seed);
  f("steps", r.steps);
  f("batch", r.batch);
  f("lr", r.lr);
  f("lr_drop_step", r.lr_drop_step);
  f("lr_drop_factor", r.lr_drop_factor);
  f("optimizer", r.optimizer);
  f("momentum", r.momentum);
  f("weight_decay", r.weight_decay);
  f("augment", r.augment);
  f("log_every", r.log_every);
  f("encoder", r.encoder);
  f("decoder", r.decoder);
  f("seg_hidden", r.seg_hidden);
  f("upsampling", r.upsampling);
  f("rec_weight", r.rec_weight);
  f("fg_weight", r.fg_weight);
  f("rec_hidden", r.rec_hidden);
  f("anchors", r.anchors);
  f("projection", r.projection);
  f("reg_hidden", r.reg_hidden);
  f("pos_iou", r.pos_iou);
  f("neg_iou", r.neg_iou);
  f("box_batch", r.box_batch);
  f("actionness_threshold", r.actionness_threshold);
  f("proposals", r.proposals);
  f("link_k", r.link_k);
  f("nms", r.nms);
  f("alpha", r.alpha);
  f("bench_runs", r.bench_runs);
}

std::string format_value(const std::string& v) { return v; }
std::string format_value(const std::filesystem::path& v) { return v.string(); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string format_value(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  RunConfig r;
  visit_fields(r, [&](const char* k, auto&) { out.emplace_back(k); });
  return out;
}

Config RunConfig::defaults() { return RunConfig{}.to_config(); }

Config RunConfig::defaults(const std::string& mode) {
  RunConfig r;
  r.mode = mode;
  if (mode == "tcnn") {
    r.steps = 16000;
    r.lr_drop_step = 12000;
  }
  r.validate();
  return r.to_config();
}

Config RunConfig::to_config() const {
  Config c;
  visit_fields(*this, [&](const char* k, const auto& v) { c.set(k, format_value(v)); });
  return c;
}

RunConfig RunConfig::from(const Config& c) {
  c.require_known(keys());
  RunConfig r;
  visit_fields(r, [&](const char* k, auto& field) {
    if (!c.has(k)) return;
    using V = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<V, std::string>)
      field = c.str(k);
    else if constexpr (std::is_same_v<V, std::filesystem::path>)
      field = c.str(k);
    else if constexpr (std::is_same_v<V, bool>)
      field = c.flag(k);
    else if constexpr (std::is_same_v<V, double>)
      field = c.real(k);
    else if constexpr (std::is_same_v<V, std::vector<int>>)
      field = c.int_list(k);
    else
      field = static_cast<V>(c.integer(k));
  });
  r.validate();
  return r;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (mode != "tcnn" && mode != "stcnn" && mode != "segment-only")
    fail("mode must be tcnn, stcnn or segment-only");
  if (steps < 0) fail("steps must be >= 0");
  if (batch < 1) fail("batch must be >= 1");
  if (!(lr > 0)) fail("lr must be > 0");
  if (lr_drop_step < 0) fail("lr_drop_step must be >= 0");
  if (!(lr_drop_factor > 0)) fail("lr_drop_factor must be > 0");
  if (optimizer != "adam" && optimizer != "sgd") fail("optimizer must be adam or sgd");
  if (momentum < 0 || momentum >= 1) fail("momentum must lie in [0,1)");
  if (weight_decay < 0) fail("weight_decay must be >= 0");
  if (log_every < 1) fail("log_every must be >= 1");
  if (encoder.size() != 5) fail("encoder needs 5 widths");
  if (decoder.size() != 8) fail("decoder needs 8 widths");
  for (int w : encoder)
    if (w < 1) fail("encoder widths must be positive");
  for (int w : decoder)
    if (w < 1) fail("decoder widths must be positive");
  for (int w : rec_hidden)
    if (w < 1) fail("rec_hidden widths must be positive");
  for (int w : reg_hidden)
    if (w < 1) fail("reg_hidden widths must be positive");
  if (seg_hidden < 1) fail("seg_hidden must be positive");
  if (upsampling != "subpixel" && upsampling != "unpool")
    fail("upsampling must be subpixel or unpool");
  if (rec_weight < 0) fail("rec_weight must be >= 0");
  if (!(fg_weight > 0)) fail("fg_weight must be > 0");
  if (anchors < 1) fail("anchors must be >= 1");
  if (projection < 1) fail("projection must be >= 1");
  if (!(pos_iou > 0 && pos_iou <= 1)) fail("pos_iou must lie in (0,1]");
  if (!(neg_iou >= 0 && neg_iou <= pos_iou)) fail("neg_iou must lie in [0,pos_iou]");
  if (box_batch < 2) fail("box_batch must be >= 2");
  if (!(actionness_threshold >= 0 && actionness_threshold < 1))
    fail("actionness_threshold must lie in [0,1)");
  if (proposals < 1) fail("proposals must be >= 1");
  if (link_k < 1) fail("link_k must be >= 1");
  if (!(nms > 0 && nms < 1)) fail("nms must lie in (0,1)");
  if (!(alpha > 0 && alpha < 1)) fail("alpha must lie in (0,1)");
  if (bench_runs < 1) fail("bench_runs must be >= 1");
}

double RunConfig::lr_at(int step) const {
  return (lr_drop_step > 0 && step >= lr_drop_step) ? lr * lr_drop_factor : lr;
}

RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::string>& overrides, const std::string& mode) {
  Config c = RunConfig::defaults(mode);
  if (!file.empty()) c.merge_file(file);
  c.merge_env();
  c.merge_overrides(overrides);
  return RunConfig::from(c);
}

std::vector<int> train_clip_starts(int frames) {
  std::vector<int> out;
  for (int s = 0; s + kClipLength <= frames; ++s) out.push_back(s);
  if (out.empty()) out.push_back(0);
  return out;
}

std::vector<int> test_clip_starts(int frames) {
  std::vector<int> out;
  for (int s = 0; s < frames; s += kClipLength) out.push_back(s);
  if (out.empty()) out.push_back(0);
  return out;
}

int clip_valid_frames(const Video& v, int start) {
  return std::clamp(v.frames.shape().d - start, 0, kClipLength);
}

ClipSample make_clip(const Video& v, int start) {
  const Shape4 s = v.frames.shape();
  if (start < 0 || start >= std::max(s.d, 1))
    throw std::out_of_range("clip start " + std::to_string(start) + " outside the video");
  ClipSample c;
  c.label = v.label;
  c.frames = Tensor4(Shape4{s.c, kClipLength, s.h, s.w});
  const int valid = clip_valid_frames(v, start);
  for (int ch = 0; ch < s.c; ++ch)
    for (int d = 0; d < valid; ++d)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) c.frames(ch, d, y, x) = v.frames(ch, start + d, y, x);
  for (int d = 0; d < kClipLength; ++d) {
    if (d < valid) {
      c.masks.push_back(v.masks.at(static_cast<std::size_t>(start + d)));
      c.boxes.emplace_back(v.boxes.at(static_cast<std::size_t>(start + d)));
    } else {
      c.masks.emplace_back(s.h, s.w);
      c.boxes.emplace_back(std::nullopt);
    }
  }
  return c;
}

ClipSample augment_clip(const ClipSample& clip, std::uint64_t draw) {
  std::mt19937_64 rng(draw);
  const bool flip = rng() & 1;
  const int dx = static_cast<int>(rng() % 3) - 1;
  const int dy = static_cast<int>(rng() % 3) - 1;
  ClipSample out = augment_flip_shift(clip, flip, dx, dy);
  return augment_illumination(out, static_cast<std::uint64_t>(rng()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace tcnn
