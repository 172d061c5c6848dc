// Command-line front end: gen, train-tcnn, train-stcnn, detect, segment,
// eval, bench.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcnn/dataset.hpp"
#include "tcnn/evaluate.hpp"
#include "tcnn/harness.hpp"
#include "tcnn/stcnn_model.hpp"
#include "tcnn/tcnn_model.hpp"

namespace {

using namespace tcnn;
namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string data, model, out;
  std::string seed;
  std::string split = "test";

  void attach(CLI::App* app, bool with_split) {
    app->add_option("-c,--config", config, "key = value configuration file");
    app->add_option("-s,--set", sets, "key=value override (repeatable)");
    app->add_option("--data", data, "dataset directory");
    app->add_option("--model", model, "model directory");
    app->add_option("--out", out, "output directory");
    app->add_option("--seed", seed, "random seed");
    if (with_split)
      app->add_option("--split", split, "videos to process: test, train or all")
          ->check(CLI::IsMember({"test", "train", "all"}));
  }

  RunConfig load(const std::string& mode) const {
    std::vector<std::string> ov = sets;
    if (!data.empty()) ov.push_back("data=" + data);
    if (!model.empty()) ov.push_back("model=" + model);
    if (!out.empty()) ov.push_back("out=" + out);
    if (!seed.empty()) ov.push_back("seed=" + seed);
    return load_run_config(config, ov, mode);
  }

  std::vector<int> ids(const Dataset& d) const {
    if (split == "train") return d.train_ids();
    if (split == "test") return d.test_ids();
    std::vector<int> all;
    for (int i = 0; i < d.spec().num_videos; ++i) all.push_back(i);
    return all;
  }
};

template <typename Spec>
void check_compatible(const Spec& s, const Dataset& d, const fs::path& model) {
  const SyntheticSpec& ds = d.spec();
  std::string err;
  if (s.num_classes != ds.num_classes)
    err += "\n  classes: model " + std::to_string(s.num_classes) + ", dataset " +
           std::to_string(ds.num_classes);
  if (s.input.h != ds.height || s.input.w != ds.width)
    err += "\n  frame size: model " + std::to_string(s.input.h) + "x" + std::to_string(s.input.w) +
           ", dataset " + std::to_string(ds.height) + "x" + std::to_string(ds.width);
  if (!err.empty())
    throw std::runtime_error("model " + model.string() + " does not fit dataset " +
                             d.root().string() + ":" + err);
}

int run_gen(const std::string& config, const std::vector<std::string>& sets, const std::string& out) {
  Config c;
  SyntheticSpec{}.to_config(c);
  std::vector<std::string> keys;
  for (const auto& [k, _] : c.values()) keys.push_back(k);
  if (!config.empty()) c.merge_file(config);
  c.merge_env();
  c.merge_overrides(sets);
  c.require_known(keys);
  const SyntheticSpec spec = SyntheticSpec::from_config(c);
  gen_dataset(spec, out);
  std::vector<int> train, test;
  split_ids(spec, train, test);
  std::printf("wrote %d videos (%zu train / %zu test) to %s\n", spec.num_videos, train.size(),
              test.size(), out.c_str());
  return 0;
}

void print_row(const std::vector<std::string>& names, const LossRow& r) {
  std::fprintf(stderr, "step %6d  lr %.2g", r.step, r.lr);
  for (std::size_t i = 0; i < names.size() && i < r.terms.size(); ++i)
    std::fprintf(stderr, "  %s %.4f", names[i].c_str(), r.terms[i]);
  std::fprintf(stderr, "\n");
}

int run_train(const Common& o, bool tcnn_mode) {
  const RunConfig cfg = o.load(tcnn_mode ? "tcnn" : "stcnn");
  const Dataset data(cfg.data);
  if (tcnn_mode) {
    const std::vector<std::string> names{"phase", "actionness", "regression", "recognition"};
    train_tcnn(cfg, data, [&](const LossRow& r) { print_row(names, r); });
  } else {
    const std::vector<std::string> names{"seg", "rec", "total"};
    train_stcnn(cfg, data, [&](const LossRow& r) { print_row(names, r); });
  }
  std::printf("trained %d steps; model in %s\n", cfg.steps, cfg.model.string().c_str());
  return 0;
}

int run_detect(const Common& o) {
  const RunConfig cfg = o.load("tcnn");
  const Dataset data(cfg.data);
  const TcnnModel m = TcnnModel::load(cfg.model);
  check_compatible(m.spec(), data, cfg.model);
  std::vector<Detection> all;
  for (int id : o.ids(data)) {
    const auto dets = detect_video(m, data.load(id), cfg);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  write_detections(cfg.out / "detections.csv", all);
  std::printf("%zu sequences written to %s\n", all.size(), (cfg.out / "detections.csv").c_str());
  return 0;
}

int run_segment(const Common& o) {
  const RunConfig cfg = o.load("stcnn");
  const Dataset data(cfg.data);
  const StcnnModel m = StcnnModel::load(cfg.model);
  check_compatible(m.spec(), data, cfg.model);
  std::vector<VideoSegmentation> segs;
  for (int id : o.ids(data)) segs.push_back(segment_video(m, data.load(id)));
  write_segmentations(cfg.out, segs);
  std::printf("%zu videos segmented into %s\n", segs.size(), cfg.out.c_str());
  return 0;
}

int run_eval(const Common& o, const std::string& pred, const std::string& report) {
  const RunConfig cfg = o.load("tcnn");
  const Dataset data(cfg.data);
  const fs::path pdir = pred.empty() ? cfg.out : fs::path(pred);
  const fs::path rdir = report.empty() ? pdir / "eval" : fs::path(report);
  const auto ids = o.ids(data);
  const GroundTruth gt = load_ground_truth(data, ids);
  bool any = false;
  if (fs::exists(pdir / "detections.csv")) {
    const auto dets = read_detections(pdir / "detections.csv");
    std::vector<int> vids;
    for (const auto& d : dets) vids.push_back(d.video);
    check_ids(vids, gt, false);
    const auto r = evaluate_detections(dets, gt, cfg.alpha);
    write_detection_report(rdir / "detection", r);
    std::printf("detection: frame-mAP %.4f  video-mAP %.4f  AUC %.4f\n", r.frame_map, r.video_map,
                r.auc);
    any = true;
  }
  if (fs::exists(pdir / "segments.csv")) {
    const auto segs = read_segmentations(pdir, ids, data.spec().frames);
    const auto r = evaluate_segmentations(segs, gt, cfg.alpha);
    write_segmentation_report(rdir / "segmentation", r);
    std::printf("segmentation: J %.4f  F %.4f  T %.4f  frame-mAP %.4f\n", r.j_mean, r.f_mean,
                r.t_mean, r.detection.frame_map);
    any = true;
  }
  if (!any)
    throw std::runtime_error("no detections.csv or segments.csv in " + pdir.string());
  return 0;
}

int run_bench(const Common& o, const std::string& tcnn_model, const std::string& stcnn_model,
              int video) {
  const RunConfig cfg = o.load("tcnn");
  if (tcnn_model.empty() && stcnn_model.empty())
    throw std::runtime_error("bench needs --tcnn-model and/or --stcnn-model");
  const Dataset data(cfg.data);
  const Video v = data.load(video < 0 ? o.ids(data).front() : video);
  std::vector<StageTiming> rows;
  if (!tcnn_model.empty()) {
    const TcnnModel m = TcnnModel::load(tcnn_model);
    check_compatible(m.spec(), data, tcnn_model);
    const auto r = bench_tcnn(m, v, cfg, cfg.bench_runs);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (!stcnn_model.empty()) {
    const StcnnModel m = StcnnModel::load(stcnn_model);
    check_compatible(m.spec(), data, stcnn_model);
    const auto r = bench_stcnn(m, v, cfg.bench_runs);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const std::string csv = timing_csv(rows);
  write_text(cfg.out / "bench.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"T-CNN / ST-CNN desk-scale harness"};
  app.require_subcommand(1);
  app.footer("Every configuration key can also be set through TCNN_<KEY> in the environment.");

  std::string gen_config, gen_out = "data";
  std::vector<std::string> gen_sets;
  auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  gen->add_option("-c,--config", gen_config, "key = value generator configuration");
  gen->add_option("-s,--set", gen_sets, "key=value override (repeatable)");
  gen->add_option("--out", gen_out, "dataset directory");

  Common tt, ts, det, seg, ev, be;
  tt.attach(app.add_subcommand("train-tcnn", "train the tube CNN"), false);
  ts.attach(app.add_subcommand("train-stcnn", "train the segmentation tube CNN"), false);
  det.attach(app.add_subcommand("detect", "link and recognise action tubes"), true);
  seg.attach(app.add_subcommand("segment", "segment action foreground"), true);
  auto* evc = app.add_subcommand("eval", "score predictions against the ground truth");
  ev.attach(evc, true);
  std::string pred, report;
  evc->add_option("--pred", pred, "prediction directory (default: out)");
  evc->add_option("--report", report, "report directory (default: <pred>/eval)");
  auto* bc = app.add_subcommand("bench", "time the inference stages");
  be.attach(bc, true);
  std::string tcnn_model, stcnn_model;
  int video = -1;
  bc->add_option("--tcnn-model", tcnn_model, "T-CNN model directory");
  bc->add_option("--stcnn-model", stcnn_model, "ST-CNN model directory");
  bc->add_option("--video", video, "video id (default: first of the split)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return run_gen(gen_config, gen_sets, gen_out);
    if (app.got_subcommand("train-tcnn")) return run_train(tt, true);
    if (app.got_subcommand("train-stcnn")) return run_train(ts, false);
    if (app.got_subcommand("detect")) return run_detect(det);
    if (app.got_subcommand("segment")) return run_segment(seg);
    if (evc->parsed()) return run_eval(ev, pred, report);
    if (bc->parsed()) return run_bench(be, tcnn_model, stcnn_model, video);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
