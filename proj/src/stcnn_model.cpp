#include "tcnn/stcnn_model.hpp"

#include <cstdio>
#include <random>
#include <stdexcept>

#include "tcnn/toi_pool.hpp"

namespace tcnn {

std::string loss_curve_csv(const std::vector<std::string>& names,
                           const std::vector<LossRow>& rows) {
  std::string out = "step,lr";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  char buf[64];
  for (const LossRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6g", r.step, r.lr);
    out += buf;
    for (double t : r.terms) {
      std::snprintf(buf, sizeof buf, ",%.6f", t);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

StcnnSpec desk_stcnn_spec(const RunConfig& cfg, int height, int width, int num_classes) {
  StcnnSpec s;
  s.input = Shape4{3, kClipLength, height, width};
  const auto& e = cfg.encoder;
  s.encoder = EncoderWidths{e[0], e[1], e[2], e[3], e[4]};
  const auto& d = cfg.decoder;
  s.decoder = DecoderWidths{d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7], cfg.seg_hidden};
  s.upsampling = cfg.upsampling == "unpool" ? Upsampling::unpool : Upsampling::subpixel;
  s.recognition_pool = Extent3{8, 8, 8};
  s.recognition_hidden = cfg.rec_hidden;
  s.num_classes = num_classes;
  return s;
}

StcnnModel::StcnnModel(const RunConfig& cfg, int height, int width, int num_classes)
    : spec_(desk_stcnn_spec(cfg, height, width, num_classes)) {
  if (height % 16 || width % 16)
    throw std::invalid_argument("ST-CNN input " + std::to_string(height) + "x" +
                                std::to_string(width) + " is not divisible by 16");
  net_ = build_stcnn(spec_);
  concat1_ = net_.find("concat1");
  conv7_ = net_.find("conv7");
  std::vector<int> dims{stcnn_recognition_inputs(spec_)};
  dims.insert(dims.end(), spec_.recognition_hidden.begin(), spec_.recognition_hidden.end());
  dims.push_back(num_classes);
  rec_ = Mlp(dims);
}

void StcnnModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  net_.init(rng);
  rec_.init(rng);
}

std::vector<std::span<float>> StcnnModel::parameters() {
  auto p = net_.parameters();
  for (auto s : rec_.parameters()) p.push_back(s);
  return p;
}

Tube StcnnModel::recognition_tube(const std::vector<std::optional<Box>>& boxes) const {
  const int H = spec_.input.h, W = spec_.input.w;
  std::optional<Box> all;
  for (const auto& b : boxes)
    if (b) all = all ? enclose(*all, *b) : *b;
  Tube t;
  for (int d = 0; d < spec_.input.d; ++d) {
    const std::optional<Box>& b = d < static_cast<int>(boxes.size()) ? boxes[d] : std::nullopt;
    const Box px = b ? *b : all ? *all : Box{0, 0, double(W - 1), double(H - 1)};
    t.push_back(pixel_to_cells(px, H, W, H, W));
  }
  return t;
}

Network::Activations StcnnModel::segment_stage(const Tensor4& frames, ClipOutput& o) const {
  if (!(frames.shape() == spec_.input))
    throw ShapeError("ST-CNN expects a " + spec_.input.str() + " clip, got " +
                     frames.shape().str());
  auto acts = net_.forward(frames);
  o.logits = acts.out[static_cast<std::size_t>(conv7_)];
  o.masks = logits_to_masks(o.logits);
  o.boxes.clear();
  for (const SegMask& m : o.masks) o.boxes.push_back(mask_to_box(m));
  return acts;
}

std::vector<double> StcnnModel::recognize_stage(const Network::Activations& acts,
                                                const std::vector<std::optional<Box>>& boxes) const {
  const auto pooled = toi_pool_forward(acts.out[static_cast<std::size_t>(concat1_)],
                                       recognition_tube(boxes), spec_.recognition_pool);
  const auto p = softmax<float>(rec_.forward(pooled.output.values()));
  return std::vector<double>(p.begin(), p.end());
}

StcnnModel::ClipOutput StcnnModel::run_clip(const Tensor4& frames) const {
  ClipOutput o;
  const auto acts = segment_stage(frames, o);
  o.class_prob = recognize_stage(acts, o.boxes);
  return o;
}

StcnnModel::StepLoss StcnnModel::accumulate(const ClipSample& clip, Network::Grads& g,
                                            Mlp::Grads& rg, double rec_weight,
                                            double fg_weight) const {
  validate_clip(clip);
  if (clip.masks.empty()) throw std::invalid_argument("ST-CNN training clip has no masks");
  if (clip.label < 0 || clip.label >= spec_.num_classes)
    throw std::invalid_argument("ST-CNN training clip label " + std::to_string(clip.label) +
                                " outside [0," + std::to_string(spec_.num_classes) + ")");
  StepLoss loss;
  const auto acts = net_.forward(clip.frames);
  std::vector<Tensor4> seeds(net_.size());
  auto seg = segmentation_loss(acts.out[static_cast<std::size_t>(conv7_)],
                               std::span<const SegMask>(clip.masks), fg_weight);
  loss.seg = seg.loss;
  seeds[static_cast<std::size_t>(conv7_)] = std::move(seg.grad);

  if (rec_weight > 0) {
    const Tensor4& feat = acts.out[static_cast<std::size_t>(concat1_)];
    const auto pooled = toi_pool_forward(feat, recognition_tube(clip.boxes), spec_.recognition_pool);
    Mlp::Cache cache;
    const auto logits = rec_.forward(pooled.output.values(), &cache);
    auto xent = softmax_xent<float>(logits, clip.label);
    loss.rec = xent.loss;
    for (float& v : xent.grad) v *= static_cast<float>(rec_weight);
    Mlp::Grads r = rec_.backward(cache, xent.grad, true);
    rg.add(r);
    Tensor4 gp(pooled.output.shape());
    std::copy(r.input.begin(), r.input.end(), gp.values().begin());
    seeds[static_cast<std::size_t>(concat1_)] = toi_pool_backward(gp, pooled.argmax, feat.shape());
  }
  g.add(net_.backward(acts, seeds));
  return loss;
}

namespace {

void write_arch(const std::filesystem::path& dir, const std::string& kind, int h, int w,
                int classes) {
  write_text(dir / "arch.cfg", "classes = " + std::to_string(classes) + "\nheight = " +
                                   std::to_string(h) + "\nkind = " + kind + "\nwidth = " +
                                   std::to_string(w) + "\n");
}

}  // namespace

void StcnnModel::save(const std::filesystem::path& dir, const RunConfig& cfg) const {
  std::filesystem::create_directories(dir);
  write_arch(dir, "stcnn", spec_.input.h, spec_.input.w, spec_.num_classes);
  write_text(dir / "model.cfg", cfg.to_config().dump());
  std::vector<std::string> manifest;
  net_.save(dir, "stcnn", manifest);
  rec_.save(dir, "stcnn.recognition", manifest);
  std::string text;
  for (const auto& l : manifest) text += l + "\n";
  write_text(dir / "manifest.txt", text);
}

StcnnModel StcnnModel::load(const std::filesystem::path& dir, RunConfig* stored) {
  Config arch;
  arch.merge_file(dir / "arch.cfg");
  if (arch.str("kind") != "stcnn")
    throw std::runtime_error(dir.string() + " holds a " + arch.str("kind") +
                             " model, not an ST-CNN");
  Config c;
  c.merge_file(dir / "model.cfg");
  const RunConfig cfg = RunConfig::from(c);
  StcnnModel m(cfg, static_cast<int>(arch.integer("height")), static_cast<int>(arch.integer("width")),
               static_cast<int>(arch.integer("classes")));
  m.net_.load(dir, "stcnn");
  m.rec_.load(dir, "stcnn.recognition");
  if (stored) *stored = cfg;
  return m;
}

TrainReport train_stcnn(const RunConfig& cfg, const Dataset& data, const ProgressFn& progress) {
  const SyntheticSpec& ds = data.spec();
  StcnnModel model(cfg, ds.height, ds.width, ds.num_classes);
  model.init(cfg.seed);
  const std::vector<Video> videos = data.load(data.train_ids());
  if (videos.empty()) throw std::runtime_error("training split is empty");
  const std::vector<int> starts = train_clip_starts(ds.frames);

  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ull);
  Optimizer opt(cfg.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam, cfg.momentum,
                cfg.weight_decay);
  auto params = model.parameters();
  TrainReport rep;
  rep.names = {"seg_loss", "rec_loss", "total"};
  double acc_seg = 0, acc_rec = 0;
  int acc_n = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    Network::Grads g = model.net().zero_grads();
    Mlp::Grads rg = model.recognizer().zero_grads();
    for (int b = 0; b < cfg.batch; ++b) {
      const Video& v = videos[rng() % videos.size()];
      ClipSample clip = make_clip(v, starts[rng() % starts.size()]);
      const std::uint64_t draw = rng();
      if (cfg.augment) clip = augment_clip(clip, draw);
      const auto l = model.accumulate(clip, g, rg, cfg.rec_weight, cfg.fg_weight);
      acc_seg += l.seg;
      acc_rec += l.rec;
      ++acc_n;
    }
    auto grads = g.blocks();
    for (auto s : Mlp::blocks(rg)) grads.push_back(s);
    opt.step(params, grads, cfg.lr_at(step), 1.0 / cfg.batch);
    if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps) {
      const double s = acc_seg / acc_n, r = acc_rec / acc_n;
      rep.curve.push_back({step + 1, cfg.lr_at(step), {s, r, s + cfg.rec_weight * r}});
      if (progress) progress(rep.curve.back());
      acc_seg = acc_rec = 0;
      acc_n = 0;
    }
  }
  if (!rep.curve.empty()) {
    rep.first_loss = rep.curve.front().terms.back();
    rep.last_loss = rep.curve.back().terms.back();
  }
  model.save(cfg.model, cfg);
  write_text(cfg.model / "loss_curve.csv", loss_curve_csv(rep.names, rep.curve));
  return rep;
}

VideoSegmentation segment_video(const StcnnModel& m, const Video& v) {
  const Shape4 s = v.frames.shape();
  if (s.h != m.spec().input.h || s.w != m.spec().input.w)
    throw std::invalid_argument("video " + std::to_string(v.id) + " is " + std::to_string(s.h) +
                                "x" + std::to_string(s.w) + " but the model expects " +
                                std::to_string(m.spec().input.h) + "x" +
                                std::to_string(m.spec().input.w));
  VideoSegmentation out;
  out.video = v.id;
  std::vector<double> prob(static_cast<std::size_t>(m.num_classes()), 0.0);
  const auto starts = test_clip_starts(s.d);
  for (int start : starts) {
    const ClipSample clip = make_clip(v, start);
    const auto o = m.run_clip(clip.frames);
    const int valid = clip_valid_frames(v, start);
    for (int d = 0; d < valid; ++d) {
      out.masks.push_back(o.masks[static_cast<std::size_t>(d)]);
      out.boxes.push_back(o.boxes[static_cast<std::size_t>(d)]);
    }
    for (std::size_t c = 0; c < prob.size(); ++c) prob[c] += o.class_prob[c] / starts.size();
  }
  for (std::size_t c = 0; c < prob.size(); ++c)
    if (prob[c] > out.confidence) {
      out.confidence = prob[c];
      out.label = static_cast<int>(c);
    }
  return out;
}

void write_segmentations(const std::filesystem::path& dir,
                         const std::vector<VideoSegmentation>& segs) {
  std::string csv = "video,frame,x1,y1,x2,y2,class,confidence\n";
  char buf[160];
  for (const auto& s : segs) {
    for (std::size_t f = 0; f < s.masks.size(); ++f) {
      const auto path = mask_path(dir, s.video, static_cast<int>(f));
      std::filesystem::create_directories(path.parent_path());
      save_mask(path, s.masks[f]);
      if (!s.boxes[f]) continue;
      const Box& b = *s.boxes[f];
      std::snprintf(buf, sizeof buf, "%d,%zu,%g,%g,%g,%g,%d,%.6f\n", s.video, f, b.x1, b.y1, b.x2,
                    b.y2, s.label, s.confidence);
      csv += buf;
    }
  }
  write_text(dir / "segments.csv", csv);
}

}  // namespace tcnn
