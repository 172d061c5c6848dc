#include "tcnn/tcnn_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tcnn/toi_pool.hpp"

namespace tcnn {

namespace {

constexpr RegressionParam kParam = RegressionParam::log;

std::vector<int> dims_of(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

// Indices sorted by descending value, input order on ties.
std::vector<std::size_t> rank_desc(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

// Fisher-Yates on raw engine output.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

TcnnSpec desk_tcnn_spec(const RunConfig& cfg, int height, int width, int num_classes) {
  TcnnSpec s;
  s.input = Shape4{3, kClipLength, height, width};
  const auto& e = cfg.encoder;
  s.encoder = EncoderWidths{e[0], e[1], e[2], e[3], e[4]};
  s.anchors = cfg.anchors;
  s.projection = cfg.projection;
  s.regression_hidden = cfg.reg_hidden;
  s.recognition_pool = Extent3{8, 4, 4};
  s.recognition_hidden = cfg.rec_hidden;
  s.num_classes = num_classes;
  return s;
}

std::optional<Box> clip_gt_box(const ClipSample& clip) {
  std::optional<Box> out;
  for (const auto& b : clip.boxes)
    if (b) out = out ? enclose(*out, *b) : *b;
  return out;
}

struct TcnnModel::RegCache {
  PairedFeatures pf;
  std::vector<std::vector<float>> hidden;  // post-ReLU projection per frame
  std::vector<Mlp::Cache> proj;
  Mlp::Cache reg;
  std::vector<float> out;
};

TcnnModel::TcnnModel(const RunConfig& cfg, int height, int width, int num_classes,
                     std::vector<Anchor> anchors)
    : spec_(desk_tcnn_spec(cfg, height, width, num_classes)), anchors_(std::move(anchors)) {
  if (height % 16 || width % 16)
    throw std::invalid_argument("T-CNN input " + std::to_string(height) + "x" +
                                std::to_string(width) + " is not divisible by 16");
  if (static_cast<int>(anchors_.size()) != spec_.anchors)
    throw std::invalid_argument("T-CNN expects " + std::to_string(spec_.anchors) + " anchors, got " +
                                std::to_string(anchors_.size()));
  net_ = build_tcnn(spec_);
  conv2_ = net_.find("conv2");
  conv5_ = net_.find("conv5b");
  act_ = net_.find("actionness");
  proj_ = Mlp({tcnn_pair_channels(spec_), spec_.projection});
  const int depth = spec_.pair.tube.d;
  reg_ = Mlp(dims_of(spec_.projection * depth, spec_.regression_hidden, 4 * depth));
  rec_ = Mlp(dims_of(tcnn_recognition_inputs(spec_), spec_.recognition_hidden, num_classes + 1));

  const Shape4 s5 = net_.shape(conv5_);
  for (const Anchor& a : anchors_)
    for (int y = 0; y < s5.h; ++y)
      for (int x = 0; x < s5.w; ++x) {
        const double cx = (x + 0.5) * width / s5.w - 0.5;
        const double cy = (y + 0.5) * height / s5.h - 0.5;
        const Box b = clip(anchor_box(a, cx, cy), width, height);
        candidates_.push_back(b);
        candidate_cells_.push_back(pixel_to_cells(b, height, width, s5.h, s5.w));
      }
}

void TcnnModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  net_.init(rng);
  proj_.init(rng);
  reg_.init(rng);
  rec_.init(rng);
}

TcnnModel::Grads TcnnModel::zero_grads() const {
  return Grads{net_.zero_grads(), proj_.zero_grads(), reg_.zero_grads(), rec_.zero_grads()};
}

namespace {

bool has(const std::vector<TcnnModel::Part>& parts, TcnnModel::Part p) {
  return std::find(parts.begin(), parts.end(), p) != parts.end();
}

// The actionness layer is the last one and owns the last two blocks.
template <typename S>
void split_net(const std::vector<S>& all, const std::vector<TcnnModel::Part>& parts,
               std::vector<S>& out) {
  if (has(parts, TcnnModel::Part::trunk)) out.insert(out.end(), all.begin(), all.end() - 2);
  if (has(parts, TcnnModel::Part::actionness)) out.insert(out.end(), all.end() - 2, all.end());
}

}  // namespace

std::vector<std::span<float>> TcnnModel::parameters(const std::vector<Part>& parts) {
  std::vector<std::span<float>> out;
  split_net(net_.parameters(), parts, out);
  if (has(parts, Part::regression)) {
    for (auto s : proj_.parameters()) out.push_back(s);
    for (auto s : reg_.parameters()) out.push_back(s);
  }
  if (has(parts, Part::recognition))
    for (auto s : rec_.parameters()) out.push_back(s);
  return out;
}

std::vector<std::span<float>> TcnnModel::blocks(Grads& g, const TcnnModel&,
                                                const std::vector<Part>& parts) {
  std::vector<std::span<float>> out;
  split_net(g.net.blocks(), parts, out);
  if (has(parts, Part::regression)) {
    for (auto s : Mlp::blocks(g.proj)) out.push_back(s);
    for (auto s : Mlp::blocks(g.reg)) out.push_back(s);
  }
  if (has(parts, Part::recognition))
    for (auto s : Mlp::blocks(g.rec)) out.push_back(s);
  return out;
}

std::vector<double> TcnnModel::actionness_probs(const Tensor4& logits) const {
  std::vector<double> p;
  p.reserve(candidates_.size());
  for (float v : logits.values()) p.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
  return p;
}

std::vector<Box> TcnnModel::regress(const Network::Activations& acts, std::size_t cand,
                                    RegCache* cache) const {
  const Tensor4& conv2 = acts.out[static_cast<std::size_t>(conv2_)];
  const Tensor4& conv5 = acts.out[static_cast<std::size_t>(conv5_)];
  const Shape4 s2 = conv2.shape(), s5 = conv5.shape();
  const CellBox& box5 = candidate_cells_[cand];
  RegCache local;
  RegCache& c = cache ? *cache : local;
  c.pf = pair_tube_features(conv2, temporal_skip_map(box5, s5.h, s5.w, s2.h, s2.w, s2.d), conv5,
                            box5, spec_.pair);
  const Shape4 ps = c.pf.paired.shape();
  std::vector<float> z;
  z.reserve(static_cast<std::size_t>(spec_.projection) * ps.d);
  c.hidden.assign(static_cast<std::size_t>(ps.d), {});
  c.proj.assign(static_cast<std::size_t>(ps.d), {});
  std::vector<float> x(static_cast<std::size_t>(ps.c));
  for (int d = 0; d < ps.d; ++d) {
    for (int ch = 0; ch < ps.c; ++ch) x[static_cast<std::size_t>(ch)] = c.pf.paired(ch, d, 0, 0);
    auto h = proj_.forward(x, &c.proj[static_cast<std::size_t>(d)]);
    for (float& v : h) v = std::max(v, 0.0f);
    z.insert(z.end(), h.begin(), h.end());
    c.hidden[static_cast<std::size_t>(d)] = std::move(h);
  }
  c.out = reg_.forward(z, &c.reg);
  std::vector<Box> boxes;
  const Box& anchor = candidates_[cand];
  for (int d = 0; d < ps.d; ++d) {
    const float* t = &c.out[static_cast<std::size_t>(4 * d)];
    const Box b = decode_regression(anchor, RegressionTarget{t[0], t[1], t[2], t[3]}, kParam);
    boxes.push_back(clip(b, spec_.input.w, spec_.input.h));
  }
  return boxes;
}

TcnnModel::TpnLoss TcnnModel::tpn_step(const ClipSample& clip, const RunConfig& cfg,
                                       std::mt19937_64& rng, Grads& g) const {
  validate_clip(clip);
  const auto gt = clip_gt_box(clip);
  if (!gt) throw std::invalid_argument("T-CNN training clip has no boxes");
  TpnLoss loss;
  const auto acts = net_.forward(clip.frames);
  const Tensor4& logits = acts.out[static_cast<std::size_t>(act_)];
  const auto probs = actionness_probs(logits);

  const Box gts[] = {*gt};
  const auto labels = assign_actionness_labels(candidates_, gts, cfg.pos_iou, cfg.neg_iou);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].label == BoxLabel::positive) pos.push_back(i);
    if (labels[i].label == BoxLabel::negative) neg.push_back(i);
  }
  shuffle(pos, rng);
  pos.resize(std::min<std::size_t>(pos.size(), static_cast<std::size_t>(cfg.box_batch / 2)));
  const std::size_t rest = static_cast<std::size_t>(cfg.box_batch) - pos.size();
  shuffle(neg, rng);
  const std::size_t n_rand = std::min(neg.size(), rest / 2);
  std::vector<std::size_t> sample = pos;
  sample.insert(sample.end(), neg.begin(), neg.begin() + static_cast<long>(n_rand));
  // Hard negatives: the highest-actionness negatives not drawn at random.
  std::vector<std::size_t> pool_idx(neg.begin() + static_cast<long>(n_rand), neg.end());
  std::sort(pool_idx.begin(), pool_idx.end());
  std::vector<double> pool_scores;
  for (std::size_t i : pool_idx) pool_scores.push_back(probs[i]);
  const auto hard_order = rank_desc(pool_scores);
  for (std::size_t k = 0; k < std::min(rest - n_rand, hard_order.size()); ++k)
    sample.push_back(pool_idx[hard_order[k]]);

  std::vector<Tensor4> seeds(net_.size());
  Tensor4 gl(logits.shape());
  const double scale = 1.0 / static_cast<double>(sample.size());
  for (std::size_t i : sample) {
    double grad = 0;
    loss.actionness += sigmoid_bce(logits.values()[i],
                                   labels[i].label == BoxLabel::positive ? 1.0 : 0.0, &grad) *
                       scale;
    gl.values()[i] += static_cast<float>(grad * scale);
  }
  seeds[static_cast<std::size_t>(act_)] = std::move(gl);

  const Tensor4& conv2 = acts.out[static_cast<std::size_t>(conv2_)];
  const Tensor4& conv5 = acts.out[static_cast<std::size_t>(conv5_)];
  Tensor4 g2(conv2.shape()), g5(conv5.shape());
  for (std::size_t i : pos) {
    RegCache c;
    regress(acts, i, &c);
    const int depth = static_cast<int>(c.hidden.size());
    std::vector<float> target(c.out.size(), 0.0f), mask(c.out.size(), 0.0f);
    for (int d = 0; d < depth; ++d) {
      const auto& b = clip.boxes[static_cast<std::size_t>(d)];
      if (!b) continue;
      const RegressionTarget t = encode_regression(candidates_[i], *b, kParam);
      const float tv[] = {float(t.d_cx), float(t.d_cy), float(t.d_w), float(t.d_h)};
      for (int k = 0; k < 4; ++k) {
        target[static_cast<std::size_t>(4 * d + k)] = tv[k];
        mask[static_cast<std::size_t>(4 * d + k)] = 1.0f;
      }
    }
    std::vector<float> pred = c.out;
    for (std::size_t k = 0; k < pred.size(); ++k)
      if (mask[k] == 0.0f) pred[k] = target[k];
    auto sl = smooth_l1<float>(pred, target);
    const double rscale = 1.0 / static_cast<double>(pos.size());
    loss.regression += sl.loss * rscale;
    for (std::size_t k = 0; k < sl.grad.size(); ++k)
      sl.grad[k] *= static_cast<float>(rscale) * mask[k];
    Mlp::Grads rg = reg_.backward(c.reg, sl.grad, true);
    g.reg.add(rg);
    const Shape4 ps = c.pf.paired.shape();
    Tensor4 gp(ps);
    const std::size_t P = static_cast<std::size_t>(spec_.projection);
    for (int d = 0; d < depth; ++d) {
      std::vector<float> gh(rg.input.begin() + static_cast<long>(d * P),
                            rg.input.begin() + static_cast<long>((d + 1) * P));
      const auto& h = c.hidden[static_cast<std::size_t>(d)];
      for (std::size_t k = 0; k < P; ++k)
        if (h[k] <= 0.0f) gh[k] = 0.0f;
      Mlp::Grads pg = proj_.backward(c.proj[static_cast<std::size_t>(d)], gh, true);
      g.proj.add(pg);
      for (int ch = 0; ch < ps.c; ++ch) gp(ch, d, 0, 0) = pg.input[static_cast<std::size_t>(ch)];
    }
    const PairedGrads pgr = pair_tube_features_backward(c.pf, gp, conv2.shape(), conv5.shape());
    add_inplace(g2, pgr.conv2);
    add_inplace(g5, pgr.conv5);
  }
  if (!pos.empty()) {
    seeds[static_cast<std::size_t>(conv2_)] = std::move(g2);
    seeds[static_cast<std::size_t>(conv5_)] = std::move(g5);
  }
  g.net.add(net_.backward(acts, seeds));
  return loss;
}

Tube TcnnModel::conv2_tube(const std::vector<Box>& boxes, int depth) const {
  if (static_cast<int>(boxes.size()) != depth)
    throw std::invalid_argument("tube has " + std::to_string(boxes.size()) + " boxes for " +
                                std::to_string(depth) + " frames");
  const Shape4 s2 = net_.shape(conv2_);
  Tube t;
  for (const Box& b : boxes)
    t.push_back(pixel_to_cells(clip(b, spec_.input.w, spec_.input.h), spec_.input.h,
                               spec_.input.w, s2.h, s2.w));
  return t;
}

double TcnnModel::recognition_step(const ClipSample& clip, const RunConfig& cfg,
                                   std::mt19937_64& rng, Grads& g, bool train_trunk) const {
  validate_clip(clip);
  const auto gt = clip_gt_box(clip);
  if (!gt) throw std::invalid_argument("T-CNN training clip has no boxes");
  if (clip.label < 0 || clip.label >= spec_.num_classes)
    throw std::invalid_argument("T-CNN training clip label " + std::to_string(clip.label) +
                                " outside [0," + std::to_string(spec_.num_classes) + ")");
  const auto acts = net_.forward(clip.frames);
  const Tensor4& conv2 = acts.out[static_cast<std::size_t>(conv2_)];
  const int D = conv2.shape().d;

  std::vector<std::pair<std::vector<Box>, int>> samples;
  std::vector<Box> truth;
  for (const auto& b : clip.boxes) truth.push_back(b ? *b : *gt);
  samples.emplace_back(truth, clip.label);
  const double jx = static_cast<int>(rng() % 7) - 3, jy = static_cast<int>(rng() % 7) - 3;
  std::vector<Box> jit;
  for (const Box& b : truth) jit.push_back(Box{b.x1 + jx, b.y1 + jy, b.x2 + jx, b.y2 + jy});
  samples.emplace_back(jit, clip.label);
  std::vector<std::size_t> bg;
  for (std::size_t i = 0; i < candidates_.size(); ++i)
    if (iou(candidates_[i], *gt) < cfg.neg_iou) bg.push_back(i);
  if (!bg.empty())
    samples.emplace_back(std::vector<Box>(static_cast<std::size_t>(D), candidates_[bg[rng() % bg.size()]]),
                         background());

  double loss = 0;
  Tensor4 g2(conv2.shape());
  const double scale = 1.0 / static_cast<double>(samples.size());
  for (const auto& [boxes, label] : samples) {
    const auto pooled = toi_pool_forward(conv2, conv2_tube(boxes, D), spec_.recognition_pool);
    Mlp::Cache cache;
    const auto logits = rec_.forward(pooled.output.values(), &cache);
    auto xent = softmax_xent<float>(logits, label);
    loss += xent.loss * scale;
    for (float& v : xent.grad) v *= static_cast<float>(scale);
    Mlp::Grads r = rec_.backward(cache, xent.grad, train_trunk);
    g.rec.add(r);
    if (train_trunk) {
      Tensor4 gp(pooled.output.shape());
      std::copy(r.input.begin(), r.input.end(), gp.values().begin());
      add_inplace(g2, toi_pool_backward(gp, pooled.argmax, conv2.shape()));
    }
  }
  if (train_trunk) {
    std::vector<Tensor4> seeds(net_.size());
    seeds[static_cast<std::size_t>(conv2_)] = std::move(g2);
    g.net.add(net_.backward(acts, seeds));
  }
  return loss;
}

TcnnModel::ClipProposals TcnnModel::propose(const Tensor4& frames, int clip_index,
                                            const RunConfig& cfg) const {
  if (!(frames.shape() == spec_.input))
    throw ShapeError("T-CNN expects a " + spec_.input.str() + " clip, got " +
                     frames.shape().str());
  const auto acts = net_.forward(frames);
  const auto probs = actionness_probs(acts.out[static_cast<std::size_t>(act_)]);
  const auto order = rank_desc(probs);
  const std::size_t top = std::min(order.size(), static_cast<std::size_t>(cfg.proposals));
  std::vector<double> top_probs;
  for (std::size_t k = 0; k < top; ++k) top_probs.push_back(probs[order[k]]);
  ClipProposals out;
  for (std::size_t k : keep_by_actionness(top_probs, cfg.actionness_threshold)) {
    const std::size_t i = order[k];
    out.proposals.push_back(TubeProposal{clip_index, regress(acts, i, nullptr), probs[i]});
  }
  out.conv2 = acts.out[static_cast<std::size_t>(conv2_)];
  return out;
}

std::vector<double> TcnnModel::recognize(const Tensor4& conv2, const std::vector<Box>& boxes) const {
  const auto pooled =
      toi_pool_forward(conv2, conv2_tube(boxes, conv2.shape().d), spec_.recognition_pool);
  const auto p = softmax<float>(rec_.forward(pooled.output.values()));
  return std::vector<double>(p.begin(), p.end());
}

void TcnnModel::save(const std::filesystem::path& dir, const RunConfig& cfg) const {
  std::filesystem::create_directories(dir);
  write_text(dir / "arch.cfg", "classes = " + std::to_string(spec_.num_classes) + "\nheight = " +
                                   std::to_string(spec_.input.h) + "\nkind = tcnn\nwidth = " +
                                   std::to_string(spec_.input.w) + "\n");
  write_text(dir / "model.cfg", cfg.to_config().dump());
  save_anchors(dir / "anchors.txt", anchors_);
  std::vector<std::string> manifest;
  net_.save(dir, "tcnn", manifest);
  proj_.save(dir, "tcnn.projection", manifest);
  reg_.save(dir, "tcnn.regression", manifest);
  rec_.save(dir, "tcnn.recognition", manifest);
  std::string text;
  for (const auto& l : manifest) text += l + "\n";
  write_text(dir / "manifest.txt", text);
}

TcnnModel TcnnModel::load(const std::filesystem::path& dir, RunConfig* stored) {
  Config arch;
  arch.merge_file(dir / "arch.cfg");
  if (arch.str("kind") != "tcnn")
    throw std::runtime_error(dir.string() + " holds a " + arch.str("kind") +
                             " model, not a T-CNN");
  Config c;
  c.merge_file(dir / "model.cfg");
  const RunConfig cfg = RunConfig::from(c);
  TcnnModel m(cfg, static_cast<int>(arch.integer("height")), static_cast<int>(arch.integer("width")),
              static_cast<int>(arch.integer("classes")), load_anchors(dir / "anchors.txt"));
  m.net_.load(dir, "tcnn");
  m.proj_.load(dir, "tcnn.projection");
  m.reg_.load(dir, "tcnn.regression");
  m.rec_.load(dir, "tcnn.recognition");
  if (stored) *stored = cfg;
  return m;
}

std::vector<Anchor> fit_anchors(const std::vector<Video>& videos, int k, std::uint64_t seed) {
  std::vector<Anchor> sizes;
  for (const Video& v : videos)
    for (int s : train_clip_starts(v.frames.shape().d)) {
      const auto b = clip_gt_box(make_clip(v, s));
      if (b) sizes.push_back(Anchor{b->width(), b->height()});
    }
  return kmeans_anchors(sizes, k, seed).centers;
}

TrainReport train_tcnn(const RunConfig& cfg, const Dataset& data, const ProgressFn& progress) {
  using P = TcnnModel::Part;
  const SyntheticSpec& ds = data.spec();
  const std::vector<Video> videos = data.load(data.train_ids());
  if (videos.empty()) throw std::runtime_error("training split is empty");
  TcnnModel model(cfg, ds.height, ds.width, ds.num_classes,
                  fit_anchors(videos, cfg.anchors, cfg.seed));
  model.init(cfg.seed);
  const std::vector<int> starts = train_clip_starts(ds.frames);
  std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dull);

  const std::vector<std::vector<P>> phases = {{P::trunk, P::actionness, P::regression},
                                              {P::trunk, P::recognition},
                                              {P::actionness, P::regression},
                                              {P::recognition}};
  TrainReport rep;
  rep.names = {"phase", "actionness_loss", "regression_loss", "recognition_loss"};
  for (std::size_t ph = 0; ph < phases.size(); ++ph) {
    const int begin = static_cast<int>(static_cast<long>(cfg.steps) * ph / 4);
    const int end = static_cast<int>(static_cast<long>(cfg.steps) * (ph + 1) / 4);
    const bool tpn = ph % 2 == 0;
    Optimizer opt(cfg.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam, cfg.momentum,
                  cfg.weight_decay);
    auto params = model.parameters(phases[ph]);
    double a = 0, r = 0, c = 0;
    int n = 0;
    for (int step = begin; step < end; ++step) {
      auto g = model.zero_grads();
      for (int b = 0; b < cfg.batch; ++b) {
        const Video& v = videos[rng() % videos.size()];
        ClipSample clip = make_clip(v, starts[rng() % starts.size()]);
        const std::uint64_t draw = rng();
        if (cfg.augment) clip = augment_clip(clip, draw);
        if (tpn) {
          const auto l = model.tpn_step(clip, cfg, rng, g);
          a += l.actionness;
          r += l.regression;
        } else {
          c += model.recognition_step(clip, cfg, rng, g, ph == 1);
        }
        ++n;
      }
      opt.step(params, TcnnModel::blocks(g, model, phases[ph]), cfg.lr_at(step), 1.0 / cfg.batch);
      if ((step + 1 - begin) % cfg.log_every == 0 || step + 1 == end) {
        rep.curve.push_back({step + 1, cfg.lr_at(step), {double(ph + 1), a / n, r / n, c / n}});
        if (progress) progress(rep.curve.back());
        a = r = c = 0;
        n = 0;
      }
    }
  }
  // First and last proposal-network windows.
  for (const LossRow& row : rep.curve)
    if (row.terms[0] == 1.0 || row.terms[0] == 3.0) {
      const double t = row.terms[1] + row.terms[2];
      if (rep.first_loss == 0) rep.first_loss = t;
      rep.last_loss = t;
    }
  model.save(cfg.model, cfg);
  write_text(cfg.model / "loss_curve.csv", loss_curve_csv(rep.names, rep.curve));
  return rep;
}

std::vector<Detection> detect_video(const TcnnModel& m, const Video& v, const RunConfig& cfg) {
  const Shape4 s = v.frames.shape();
  if (s.h != m.spec().input.h || s.w != m.spec().input.w)
    throw std::invalid_argument("video " + std::to_string(v.id) + " is " + std::to_string(s.h) +
                                "x" + std::to_string(s.w) + " but the model expects " +
                                std::to_string(m.spec().input.h) + "x" +
                                std::to_string(m.spec().input.w));
  const auto starts = test_clip_starts(s.d);
  std::vector<std::vector<TubeProposal>> per_clip;
  std::vector<Tensor4> conv2;
  for (std::size_t ci = 0; ci < starts.size(); ++ci) {
    auto cp = m.propose(make_clip(v, starts[ci]).frames, static_cast<int>(ci), cfg);
    per_clip.push_back(std::move(cp.proposals));
    conv2.push_back(std::move(cp.conv2));
  }
  const auto seqs = nms_sequences(link_top_k(per_clip, cfg.link_k), cfg.nms);
  std::vector<Detection> out;
  for (const LinkedSequence& seq : seqs) {
    Detection d;
    d.video = v.id;
    d.rank = static_cast<int>(out.size());
    d.score = seq.score;
    std::vector<double> p(static_cast<std::size_t>(m.num_classes() + 1), 0.0);
    for (std::size_t ci = 0; ci < seq.proposals.size(); ++ci) {
      const int valid = clip_valid_frames(v, starts[ci]);
      const auto& bx = seq.proposals[ci].boxes;
      d.boxes.insert(d.boxes.end(), bx.begin(), bx.begin() + valid);
      const auto pc = m.recognize(conv2[ci], bx);
      for (std::size_t c = 0; c < p.size(); ++c) p[c] += pc[c] * valid / s.d;
    }
    for (int c = 0; c < m.num_classes(); ++c)
      if (c == 0 || p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(d.cls)]) d.cls = c;
    d.confidence = p[static_cast<std::size_t>(d.cls)] * seq.score / 2.0;
    out.push_back(std::move(d));
  }
  return out;
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
  std::string csv = "video,rank,frame,x1,y1,x2,y2,class,confidence\n";
  char buf[200];
  for (const Detection& d : dets)
    for (std::size_t f = 0; f < d.boxes.size(); ++f) {
      const Box& b = d.boxes[f];
      std::snprintf(buf, sizeof buf, "%d,%d,%zu,%.3f,%.3f,%.3f,%.3f,%d,%.6f\n", d.video, d.rank, f,
                    b.x1, b.y1, b.x2, b.y2, d.cls, d.confidence);
      csv += buf;
    }
  write_text(path, csv);
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<Detection> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    Detection d;
    int frame;
    Box b;
    if (!(ss >> d.video >> d.rank >> frame >> b.x1 >> b.y1 >> b.x2 >> b.y2 >> d.cls >> d.confidence))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    if (out.empty() || out.back().video != d.video || out.back().rank != d.rank) out.push_back(d);
    if (frame != static_cast<int>(out.back().boxes.size()))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": frames of a detection must be consecutive from 0");
    out.back().boxes.push_back(b);
  }
  return out;
}

}  // namespace tcnn
