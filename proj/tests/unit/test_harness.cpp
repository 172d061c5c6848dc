#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "../oracles.hpp"
#include "helpers.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/evaluate.hpp"
#include "tcnn/harness.hpp"
#include "tcnn/segmentation.hpp"
#include "tcnn/stcnn_model.hpp"
#include "tcnn/tcnn_model.hpp"

namespace tcnn {
namespace {

namespace fs = std::filesystem;

const fs::path kToy = fs::path(TCNN_FIXTURE_DIR) / "toy_eval";

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_videos = 4;
  s.frames = 8;
  s.height = 48;
  s.width = 64;
  s.num_classes = 2;
  s.actor_min = 8;
  s.actor_max = 12;
  s.train_fraction = 0.5;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_parameters(std::vector<std::span<float>> a, std::vector<std::span<float>> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end())) return false;
  return true;
}

// Runs the CLI with stderr captured; returns the exit status.
int run_cli(const std::string& args, const fs::path& log, std::string& err) {
  const std::string cmd = std::string(TCNN_CLI) + " " + args + " >/dev/null 2>" + log.string();
  const int rc = std::system(cmd.c_str());
  err = slurp(log);
  return rc;
}

TEST(Synthetic, DeterministicPerVideo) {
  const SyntheticSpec s = small_spec();
  const Video a = synthesize_video(s, 2), b = synthesize_video(s, 2);
  EXPECT_EQ(a.frames.values().size(), b.frames.values().size());
  EXPECT_TRUE(std::equal(a.frames.values().begin(), a.frames.values().end(),
                         b.frames.values().begin()));
  const Video c = synthesize_video(s, 3);
  EXPECT_FALSE(std::equal(a.frames.values().begin(), a.frames.values().end(),
                          c.frames.values().begin()));
}

TEST(Synthetic, MaskMatchesBox) {
  const SyntheticSpec s = small_spec();
  for (int id = 0; id < s.num_videos; ++id) {
    const Video v = synthesize_video(s, id);
    ASSERT_EQ(v.masks.size(), static_cast<std::size_t>(s.frames));
    for (int t = 0; t < s.frames; ++t) {
      const auto b = mask_to_box(v.masks[t]);
      ASSERT_TRUE(b.has_value());
      EXPECT_EQ(b->x1, v.boxes[t].x1);
      EXPECT_EQ(b->y1, v.boxes[t].y1);
      EXPECT_EQ(b->x2, v.boxes[t].x2);
      EXPECT_EQ(b->y2, v.boxes[t].y2);
    }
  }
}

TEST(Synthetic, HorizontalMotionIsMonotoneInX) {
  SyntheticSpec s = small_spec();
  s.num_videos = 8;
  for (int id = 0; id < s.num_videos; id += s.num_classes) {
    const Video v = synthesize_video(s, id);
    ASSERT_EQ(v.label, 0);
    const double dir = v.boxes[1].x1 - v.boxes[0].x1;
    ASSERT_NE(dir, 0.0);
    for (int t = 1; t < s.frames; ++t) {
      EXPECT_GT((v.boxes[t].x1 - v.boxes[t - 1].x1) * dir, 0.0);
      EXPECT_EQ(v.boxes[t].y1, v.boxes[0].y1);
    }
  }
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticSpec s = small_spec();
  s.num_classes = 5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_spec();
  s.actor_max = 40;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Config, LaterSourcesWin) {
  test::TempDir dir("cfg");
  write_text(dir.path() / "run.cfg", "# comment\nlr = 0.5\nsteps = 7\n");
  setenv("TCNN_STEPS", "9", 1);
  const RunConfig c = load_run_config(dir.path() / "run.cfg", {"batch=3"}, "stcnn");
  unsetenv("TCNN_STEPS");
  EXPECT_DOUBLE_EQ(c.lr, 0.5);
  EXPECT_EQ(c.steps, 9);
  EXPECT_EQ(c.batch, 3);
  const RunConfig d = load_run_config(dir.path() / "run.cfg", {"steps=11"}, "stcnn");
  EXPECT_EQ(d.steps, 11);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(load_run_config("", {"no_such_key=1"}, "stcnn"), std::exception);
  EXPECT_THROW(load_run_config("", {"steps=-1"}, "stcnn"), std::exception);
  EXPECT_THROW(load_run_config("", {"optimizer=rmsprop"}, "stcnn"), std::exception);
}

TEST(Config, PerModeSchedules) {
  const RunConfig t = load_run_config("", {}, "tcnn");
  const RunConfig s = load_run_config("", {}, "stcnn");
  EXPECT_EQ(t.steps, 16000);
  EXPECT_EQ(t.lr_drop_step, 12000);
  EXPECT_EQ(s.steps, 2500);
  EXPECT_EQ(s.lr_drop_step, 2000);
  EXPECT_DOUBLE_EQ(s.lr_at(1999), 1e-3);
  EXPECT_DOUBLE_EQ(s.lr_at(2000), 1e-4);
}

TEST(Clips, Starts) {
  EXPECT_EQ(train_clip_starts(16).size(), 9u);
  EXPECT_EQ(test_clip_starts(16), (std::vector<int>{0, 8}));
  EXPECT_EQ(test_clip_starts(12), (std::vector<int>{0, 8}));
  EXPECT_EQ(train_clip_starts(5), (std::vector<int>{0}));
  EXPECT_EQ(test_clip_starts(5), (std::vector<int>{0}));
}

TEST(Clips, ShortVideoIsPadded) {
  Video v;
  v.frames = Tensor4(Shape4{3, 5, 8, 8});
  for (auto& x : v.frames.values()) x = 1.0f;
  for (int t = 0; t < 5; ++t) {
    SegMask m(8, 8);
    m.set(2, 3, true);
    v.masks.push_back(m);
    v.boxes.push_back(Box{3, 2, 3, 2});
  }
  v.label = 1;
  EXPECT_EQ(clip_valid_frames(v, 0), 5);
  const ClipSample c = make_clip(v, 0);
  EXPECT_EQ(c.frames.shape().d, kClipLength);
  for (int t = 0; t < kClipLength; ++t) {
    EXPECT_EQ(c.frames(0, t, 4, 4), t < 5 ? 1.0f : 0.0f);
    EXPECT_EQ(c.masks[t].count(), t < 5 ? 1u : 0u);
    EXPECT_EQ(c.boxes[t].has_value(), t < 5);
  }
}

TEST(Stats, Median) {
  EXPECT_EQ(median({4.0}), 4.0);
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

class SmallRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new test::TempDir("run");
    gen_dataset(small_spec(), dir_->path() / "data");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static RunConfig config(const std::string& mode, const std::string& model) {
    return load_run_config("",
                           {"steps=0", "anchors=2", "data=" + (dir_->path() / "data").string(),
                            "model=" + (dir_->path() / model).string()},
                           mode);
  }
  static test::TempDir* dir_;
};
test::TempDir* SmallRun::dir_ = nullptr;

TEST_F(SmallRun, ZeroStepStcnnEqualsInit) {
  const RunConfig cfg = config("stcnn", "st0");
  const Dataset data(cfg.data);
  train_stcnn(cfg, data);
  StcnnModel loaded = StcnnModel::load(cfg.model);
  StcnnModel fresh(cfg, data.spec().height, data.spec().width, data.spec().num_classes);
  fresh.init(cfg.seed);
  EXPECT_TRUE(same_parameters(loaded.parameters(), fresh.parameters()));
}

TEST_F(SmallRun, ZeroStepTcnnEqualsInit) {
  using P = TcnnModel::Part;
  const RunConfig cfg = config("tcnn", "t0");
  const Dataset data(cfg.data);
  train_tcnn(cfg, data);
  TcnnModel loaded = TcnnModel::load(cfg.model);
  TcnnModel fresh(cfg, data.spec().height, data.spec().width, data.spec().num_classes,
                  fit_anchors(data.load(data.train_ids()), cfg.anchors, cfg.seed));
  fresh.init(cfg.seed);
  const std::vector<P> all{P::trunk, P::actionness, P::regression, P::recognition};
  EXPECT_TRUE(same_parameters(loaded.parameters(all), fresh.parameters(all)));
}

TEST_F(SmallRun, BenchRowsAreNonNegative) {
  const RunConfig cfg = config("stcnn", "stb");
  const Dataset data(cfg.data);
  train_stcnn(cfg, data);
  const StcnnModel m = StcnnModel::load(cfg.model);
  const auto rows = bench_stcnn(m, data.load(data.test_ids().front()), 1);
  ASSERT_FALSE(rows.empty());
  for (const auto& r : rows) {
    ASSERT_EQ(r.seconds.size(), 1u);
    EXPECT_GE(r.seconds[0], 0.0);
  }
  const std::string csv = timing_csv(rows);
  EXPECT_EQ(csv.rfind("pipeline,stage,runs,median_s,min_s,max_s\n", 0), 0u);
}

TEST_F(SmallRun, CliReportsModelDatasetMismatch) {
  const RunConfig cfg = config("stcnn", "stm");
  train_stcnn(cfg, Dataset(cfg.data));
  SyntheticSpec other = small_spec();
  other.num_classes = 3;
  other.num_videos = 6;
  other.width = 72;
  gen_dataset(other, dir_->path() / "other");
  std::string err;
  const int rc = run_cli("segment --data " + (dir_->path() / "other").string() + " --model " +
                             cfg.model.string() + " --out " + (dir_->path() / "o").string(),
                         dir_->path() / "err.txt", err);
  EXPECT_NE(rc, 0);
  EXPECT_NE(err.find("classes: model 2, dataset 3"), std::string::npos) << err;
  EXPECT_NE(err.find("frame size: model 48x64, dataset 48x72"), std::string::npos) << err;
}

TEST(Evaluate, GroundTruthScoresPerfectly) {
  const Dataset data(kToy / "data");
  const std::vector<int> ids{0, 1, 2, 3};
  const GroundTruth gt = load_ground_truth(data, ids);
  const auto d = evaluate_detections(gt_as_detections(data, ids), gt, 0.5);
  EXPECT_DOUBLE_EQ(d.frame_map, 1.0);
  EXPECT_DOUBLE_EQ(d.video_map, 1.0);
  const auto s = evaluate_segmentations(gt_as_segmentations(data, ids), gt, 0.5);
  EXPECT_DOUBLE_EQ(s.j_mean, 1.0);
  EXPECT_DOUBLE_EQ(s.f_mean, 1.0);
  double t = 0;
  for (const auto& m : gt.masks) t += temporal_stability(m);
  EXPECT_NEAR(s.t_mean, t / static_cast<double>(gt.masks.size()), 1e-12);
  const auto e = evaluate_detections({}, gt, 0.5);
  EXPECT_DOUBLE_EQ(e.frame_map, 0.0);
  EXPECT_DOUBLE_EQ(e.video_map, 0.0);
}

TEST(Evaluate, CheckIdsListsEveryMismatch) {
  const Dataset data(kToy / "data");
  const GroundTruth gt = load_ground_truth(data, {2, 3});
  try {
    check_ids({0, 2, 5}, gt, true);
    FAIL() << "expected a mismatch";
  } catch (const std::runtime_error& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("video 0: prediction without ground truth"), std::string::npos) << m;
    EXPECT_NE(m.find("video 5: prediction without ground truth"), std::string::npos) << m;
    EXPECT_NE(m.find("video 3: no prediction"), std::string::npos) << m;
  }
  EXPECT_NO_THROW(check_ids({2}, gt, false));
}

TEST(Evaluate, FixtureReportsAreStable) {
  const Dataset data(kToy / "data");
  const std::vector<int> ids{0, 1, 2, 3};
  const GroundTruth gt = load_ground_truth(data, ids);
  test::TempDir out("report");

  const auto dets = read_detections(kToy / "pred" / "detections.csv");
  const auto dr = evaluate_detections(dets, gt, 0.5);
  write_detection_report(out.path() / "detection", dr);
  EXPECT_EQ(slurp(out.path() / "detection" / "report.csv"), slurp(kToy / "expected_detection.csv"));
  const auto boxes = to_frame_boxes(dets);
  EXPECT_NEAR(dr.frame_map, oracle::frame_map(boxes, gt.frames, 0.5), 1e-12);
  EXPECT_NEAR(dr.video_map, oracle::video_map(to_tubes(dets), gt.tubes, 0.5), 1e-12);

  const auto segs = read_segmentations(kToy / "pred", ids, data.spec().frames);
  const auto sr = evaluate_segmentations(segs, gt, 0.5);
  write_segmentation_report(out.path() / "segmentation", sr);
  EXPECT_EQ(slurp(out.path() / "segmentation" / "report.csv"),
            slurp(kToy / "expected_segmentation.csv"));
}

TEST(Evaluate, CliListsSplitMismatch) {
  test::TempDir out("cli");
  std::string err;
  const int rc = run_cli("eval --data " + (kToy / "data").string() + " --pred " +
                             (kToy / "pred").string() + " --report " + out.path().string(),
                         out.path() / "err.txt", err);
  EXPECT_NE(rc, 0);
  EXPECT_NE(err.find("video 0: prediction without ground truth"), std::string::npos) << err;
  EXPECT_NE(err.find("video 1: prediction without ground truth"), std::string::npos) << err;
}

}  // namespace
}  // namespace tcnn
