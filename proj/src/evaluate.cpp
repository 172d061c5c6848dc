#include "tcnn/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tcnn {

GroundTruth load_ground_truth(const Dataset& data, const std::vector<int>& ids) {
  GroundTruth gt;
  gt.ids = ids;
  for (int id : ids) {
    Video v = data.load_annotations(id);
    VideoTube tube{id, v.label, {}, 1.0};
    for (std::size_t f = 0; f < v.boxes.size(); ++f) {
      gt.frames.push_back(FrameBox{id, static_cast<int>(f), v.label, v.boxes[f], 1.0});
      tube.boxes[static_cast<int>(f)] = v.boxes[f];
    }
    gt.tubes.push_back(std::move(tube));
    gt.num_frames += static_cast<int>(v.masks.size());
    gt.masks.push_back(std::move(v.masks));
  }
  return gt;
}

std::vector<Detection> gt_as_detections(const Dataset& data, const std::vector<int>& ids) {
  std::vector<Detection> out;
  for (int id : ids) {
    const Video v = data.load_annotations(id);
    out.push_back(Detection{id, 0, v.boxes, v.label, 1.0, 2.0});
  }
  return out;
}

std::vector<VideoSegmentation> gt_as_segmentations(const Dataset& data,
                                                   const std::vector<int>& ids) {
  std::vector<VideoSegmentation> out;
  for (int id : ids) {
    const Video v = data.load_annotations(id);
    VideoSegmentation s{id, v.masks, {}, v.label, 1.0};
    for (const SegMask& m : v.masks) s.boxes.push_back(mask_to_box(m));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FrameBox> to_frame_boxes(const std::vector<Detection>& dets) {
  std::vector<FrameBox> out;
  for (const Detection& d : dets)
    for (std::size_t f = 0; f < d.boxes.size(); ++f)
      out.push_back(FrameBox{d.video, static_cast<int>(f), d.cls, d.boxes[f], d.confidence});
  return out;
}

std::vector<VideoTube> to_tubes(const std::vector<Detection>& dets) {
  std::vector<VideoTube> out;
  for (const Detection& d : dets) {
    VideoTube t{d.video, d.cls, {}, d.confidence};
    for (std::size_t f = 0; f < d.boxes.size(); ++f) t.boxes[static_cast<int>(f)] = d.boxes[f];
    out.push_back(std::move(t));
  }
  return out;
}

DetectionReport evaluate_detections(const std::vector<Detection>& dets, const GroundTruth& gt,
                                    double alpha) {
  DetectionReport r;
  const auto frames = to_frame_boxes(dets);
  r.frame_map = frame_map(frames, gt.frames, alpha, &r.frame_ap);
  r.video_map = video_map(to_tubes(dets), gt.tubes, alpha, &r.video_ap);
  r.roc = roc_auc(frames, gt.frames, alpha, std::max(gt.num_frames, 1));
  r.auc = r.roc.auc;
  return r;
}

void check_ids(const std::vector<int>& predicted, const GroundTruth& gt, bool require_all) {
  const std::set<int> known(gt.ids.begin(), gt.ids.end());
  const std::set<int> seen(predicted.begin(), predicted.end());
  std::string problems;
  for (int id : seen)
    if (!known.count(id)) problems += "\n  video " + std::to_string(id) + ": prediction without ground truth";
  if (require_all)
    for (int id : gt.ids)
      if (!seen.count(id)) problems += "\n  video " + std::to_string(id) + ": no prediction";
  if (!problems.empty()) throw std::runtime_error("prediction/ground-truth mismatch:" + problems);
}

SegmentationReport evaluate_segmentations(const std::vector<VideoSegmentation>& segs,
                                          const GroundTruth& gt, double alpha) {
  std::vector<int> pred_ids;
  for (const auto& s : segs) pred_ids.push_back(s.video);
  check_ids(pred_ids, gt, true);
  SegmentationReport r;
  std::vector<Detection> dets;
  std::size_t longest = 0;
  for (const auto& m : gt.masks) longest = std::max(longest, m.size());
  std::vector<double> j_sum(longest, 0.0);
  std::vector<int> j_n(longest, 0);
  for (std::size_t k = 0; k < gt.ids.size(); ++k) {
    const auto it = std::find_if(segs.begin(), segs.end(),
                                 [&](const VideoSegmentation& s) { return s.video == gt.ids[k]; });
    const auto& truth = gt.masks[k];
    if (it->masks.size() != truth.size())
      throw std::runtime_error("video " + std::to_string(gt.ids[k]) + ": " +
                               std::to_string(it->masks.size()) + " predicted masks for " +
                               std::to_string(truth.size()) + " frames");
    std::vector<double> js, fs;
    for (std::size_t f = 0; f < truth.size(); ++f) {
      js.push_back(iou_mask(it->masks[f], truth[f]));
      fs.push_back(contour_f(it->masks[f], truth[f],
                             default_f_tolerance(truth[f].height(), truth[f].width())));
      j_sum[f] += js.back();
      ++j_n[f];
    }
    const auto j = mean_recall_decay(js), fm = mean_recall_decay(fs);
    r.j_mean += j.mean;
    r.j_recall += j.recall;
    r.j_decay += j.decay;
    r.f_mean += fm.mean;
    r.f_recall += fm.recall;
    r.f_decay += fm.decay;
    r.t_mean += truth.size() >= 2 ? temporal_stability(it->masks) : 0.0;

    // Empty placeholder boxes mark frames without foreground.
    Detection d{gt.ids[k], 0, {}, it->label, it->confidence, 0};
    for (std::size_t f = 0; f < it->boxes.size(); ++f) {
      if (it->boxes[f]) {
        d.boxes.push_back(*it->boxes[f]);
      } else {
        d.boxes.push_back(Box{0, 0, -1, -1});
      }
    }
    dets.push_back(std::move(d));
  }
  const double n = static_cast<double>(std::max<std::size_t>(gt.ids.size(), 1));
  r.j_mean /= n;
  r.j_recall /= n;
  r.j_decay /= n;
  r.f_mean /= n;
  r.f_recall /= n;
  r.f_decay /= n;
  r.t_mean /= n;
  for (std::size_t f = 0; f < longest; ++f) r.j_by_frame.push_back(j_n[f] ? j_sum[f] / j_n[f] : 0.0);

  // Detection view: one box per frame that has foreground.
  std::vector<FrameBox> frames;
  std::vector<VideoTube> tubes;
  for (const Detection& d : dets) {
    VideoTube t{d.video, d.cls, {}, d.confidence};
    for (std::size_t f = 0; f < d.boxes.size(); ++f) {
      if (d.boxes[f].empty()) continue;
      frames.push_back(FrameBox{d.video, static_cast<int>(f), d.cls, d.boxes[f], d.confidence});
      t.boxes[static_cast<int>(f)] = d.boxes[f];
    }
    if (!t.boxes.empty()) tubes.push_back(std::move(t));
  }
  r.detection.frame_map = frame_map(frames, gt.frames, alpha, &r.detection.frame_ap);
  r.detection.video_map = video_map(tubes, gt.tubes, alpha, &r.detection.video_ap);
  r.detection.roc = roc_auc(frames, gt.frames, alpha, std::max(gt.num_frames, 1));
  r.detection.auc = r.detection.roc.auc;
  return r;
}

namespace {

std::vector<EvalRow> detection_rows(const DetectionReport& r) {
  std::vector<EvalRow> rows;
  rows.push_back({"all", {{"frame_map", r.frame_map}, {"video_map", r.video_map}, {"roc_auc", r.auc}}});
  for (const auto& [cls, ap] : r.frame_ap) {
    EvalRow row{"class_" + std::to_string(cls), {{"frame_ap", ap}}};
    const auto it = r.video_ap.find(cls);
    if (it != r.video_ap.end()) row.values["video_ap"] = it->second;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::pair<double, double>> roc_points(const RocResult& roc) {
  std::vector<std::pair<double, double>> pts;
  for (const RocPoint& p : roc.curve) pts.emplace_back(p.fppf, p.tpr);
  return pts;
}

}  // namespace

void write_detection_report(const std::filesystem::path& dir, const DetectionReport& r) {
  std::filesystem::create_directories(dir);
  write_report_csv(dir / "report.csv", detection_rows(r));
  write_curve_svg(dir / "roc.svg", "ROC", roc_points(r.roc), "false positives per frame",
                  "true positive rate");
}

void write_segmentation_report(const std::filesystem::path& dir, const SegmentationReport& r) {
  std::filesystem::create_directories(dir);
  std::vector<EvalRow> rows;
  rows.push_back({"segmentation",
                  {{"j_mean", r.j_mean},
                   {"j_recall", r.j_recall},
                   {"j_decay", r.j_decay},
                   {"f_mean", r.f_mean},
                   {"f_recall", r.f_recall},
                   {"f_decay", r.f_decay},
                   {"t_mean", r.t_mean}}});
  for (EvalRow& row : detection_rows(r.detection)) rows.push_back(std::move(row));
  write_report_csv(dir / "report.csv", rows);
  std::vector<std::pair<double, double>> pts;
  const std::size_t n = r.j_by_frame.size();
  for (std::size_t f = 0; f < n; ++f)
    pts.emplace_back(n > 1 ? static_cast<double>(f) / static_cast<double>(n - 1) : 0.0, r.j_by_frame[f]);
  write_curve_svg(dir / "j_by_frame.svg", "Region similarity by frame", pts, "relative frame", "J");
  write_curve_svg(dir / "roc.svg", "ROC", roc_points(r.detection.roc), "false positives per frame",
                  "true positive rate");
}

std::vector<VideoSegmentation> read_segmentations(const std::filesystem::path& dir,
                                                  const std::vector<int>& ids, int frames) {
  std::vector<VideoSegmentation> out;
  std::string problems;
  for (int id : ids) {
    VideoSegmentation s;
    s.video = id;
    for (int f = 0; f < frames; ++f) {
      const auto path = mask_path(dir, id, f);
      if (!std::filesystem::exists(path)) {
        problems += "\n  video " + std::to_string(id) + ": missing " + path.string();
        break;
      }
      s.masks.push_back(load_mask(path));
      s.boxes.emplace_back(std::nullopt);
    }
    out.push_back(std::move(s));
  }
  std::set<int> unknown;
  std::istringstream in(read_text(dir / "segments.csv"));
  std::string line;
  std::getline(in, line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    int video, frame, cls;
    double conf;
    Box b;
    if (!(ss >> video >> frame >> b.x1 >> b.y1 >> b.x2 >> b.y2 >> cls >> conf))
      throw std::runtime_error((dir / "segments.csv").string() + ":" + std::to_string(lineno) +
                               ": malformed row");
    const auto it = std::find_if(out.begin(), out.end(),
                                 [&](const VideoSegmentation& s) { return s.video == video; });
    if (it == out.end()) {
      unknown.insert(video);
      continue;
    }
    if (frame < 0 || frame >= frames)
      throw std::runtime_error((dir / "segments.csv").string() + ":" + std::to_string(lineno) +
                               ": frame out of range");
    it->boxes[static_cast<std::size_t>(frame)] = b;
    it->label = cls;
    it->confidence = conf;
  }
  for (int v : unknown)
    problems += "\n  video " + std::to_string(v) + ": prediction without ground truth";
  if (!problems.empty()) throw std::runtime_error("prediction/ground-truth mismatch:" + problems);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::vector<StageTiming> bench_tcnn(const TcnnModel& m, const Video& v, const RunConfig& cfg,
                                    int runs) {
  if (runs < 1) throw std::invalid_argument("bench: runs must be >= 1");
  std::vector<StageTiming> rows = {{"tcnn", "proposal", {}}, {"tcnn", "link", {}},
                                   {"tcnn", "recognize", {}}};
  const auto starts = test_clip_starts(v.frames.shape().d);
  std::vector<ClipSample> clips;
  for (int s : starts) clips.push_back(make_clip(v, s));
  for (int r = 0; r < runs; ++r) {
    auto t0 = Clock::now();
    std::vector<std::vector<TubeProposal>> per_clip;
    std::vector<Tensor4> conv2;
    for (std::size_t ci = 0; ci < clips.size(); ++ci) {
      auto cp = m.propose(clips[ci].frames, static_cast<int>(ci), cfg);
      per_clip.push_back(std::move(cp.proposals));
      conv2.push_back(std::move(cp.conv2));
    }
    rows[0].seconds.push_back(since(t0));
    t0 = Clock::now();
    const auto seqs = nms_sequences(link_top_k(per_clip, cfg.link_k), cfg.nms);
    rows[1].seconds.push_back(since(t0));
    t0 = Clock::now();
    for (const auto& seq : seqs)
      for (std::size_t ci = 0; ci < seq.proposals.size(); ++ci)
        m.recognize(conv2[ci], seq.proposals[ci].boxes);
    rows[2].seconds.push_back(since(t0));
  }
  return rows;
}

std::vector<StageTiming> bench_stcnn(const StcnnModel& m, const Video& v, int runs) {
  if (runs < 1) throw std::invalid_argument("bench: runs must be >= 1");
  std::vector<StageTiming> rows = {{"stcnn", "segment", {}}, {"stcnn", "recognize", {}}};
  std::vector<ClipSample> clips;
  for (int s : test_clip_starts(v.frames.shape().d)) clips.push_back(make_clip(v, s));
  for (int r = 0; r < runs; ++r) {
    double seg = 0, rec = 0;
    for (const ClipSample& c : clips) {
      auto t0 = Clock::now();
      StcnnModel::ClipOutput o;
      const auto acts = m.segment_stage(c.frames, o);
      seg += since(t0);
      t0 = Clock::now();
      m.recognize_stage(acts, o.boxes);
      rec += since(t0);
    }
    rows[0].seconds.push_back(seg);
    rows[1].seconds.push_back(rec);
  }
  return rows;
}

std::string timing_csv(const std::vector<StageTiming>& rows) {
  std::string out = "pipeline,stage,runs,median_s,min_s,max_s\n";
  char buf[200];
  for (const StageTiming& r : rows) {
    const auto [lo, hi] = std::minmax_element(r.seconds.begin(), r.seconds.end());
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.6f,%.6f,%.6f\n", r.pipeline.c_str(), r.stage.c_str(),
                  r.seconds.size(), median(r.seconds), *lo, *hi);
    out += buf;
  }
  return out;
}

}  // namespace tcnn
