#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "tcnn/proposals.hpp"

using namespace tcnn;

TEST(KMeans, DistinctBoxesBecomeCenters) {
  const std::vector<Anchor> boxes{{10, 20}, {30, 15}, {50, 50}, {8, 8}};
  const auto r = kmeans_anchors(boxes, 4, 1);
  ASSERT_EQ(r.centers.size(), 4u);
  for (const auto& b : boxes) EXPECT_NE(std::find(r.centers.begin(), r.centers.end(), b), r.centers.end());
  EXPECT_NEAR(r.distortion.back(), 0.0, 1e-12);
}

TEST(KMeans, RecoversSeparatedClusterMeans) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::vector<Anchor> boxes;
  double sa_w = 0, sa_h = 0, sb_w = 0, sb_h = 0;
  for (int i = 0; i < 20; ++i) {
    const Anchor a{10 + jitter(rng), 12 + jitter(rng)};
    const Anchor b{80 + jitter(rng), 60 + jitter(rng)};
    boxes.push_back(a);
    boxes.push_back(b);
    sa_w += a.w, sa_h += a.h, sb_w += b.w, sb_h += b.h;
  }
  KMeansOptions euclid;
  euclid.distance = AnchorDistance::euclidean;
  const auto r = kmeans_anchors(boxes, 2, 5, euclid);
  auto small = r.centers[0], large = r.centers[1];
  if (small.w > large.w) std::swap(small, large);
  EXPECT_NEAR(small.w, sa_w / 20, 1e-6);
  EXPECT_NEAR(small.h, sa_h / 20, 1e-6);
  EXPECT_NEAR(large.w, sb_w / 20, 1e-6);
  EXPECT_NEAR(large.h, sb_h / 20, 1e-6);
}

TEST(KMeans, DistortionNonIncreasingAndDeterministic) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(5, 100);
  std::vector<Anchor> boxes;
  for (int i = 0; i < 200; ++i) boxes.push_back({u(rng), u(rng)});
  const auto r = kmeans_anchors(boxes, 12, 9);
  EXPECT_EQ(r.centers.size(), 12u);
  for (std::size_t i = 1; i < r.distortion.size(); ++i)
    EXPECT_LE(r.distortion[i], r.distortion[i - 1] + 1e-12);
  const auto again = kmeans_anchors(boxes, 12, 9);
  EXPECT_EQ(r.centers, again.centers);
  EXPECT_THROW(kmeans_anchors(std::vector<Anchor>{}, 1, 1), std::exception);
}

TEST(Anchors, TextRoundTrip) {
  test::TempDir dir("anchors");
  const std::vector<Anchor> a{{12.5, 7.25}, {3, 4}};
  save_anchors(dir.path() / "a.txt", a);
  EXPECT_EQ(load_anchors(dir.path() / "a.txt"), a);
}

TEST(Labels, ExactMatchIsPositive) {
  const std::vector<Box> gt{{10, 10, 29, 29}};
  const std::vector<Box> cands{{10, 10, 29, 29}, {200, 200, 210, 210}, {12, 12, 31, 31}};
  const auto l = assign_actionness_labels(cands, gt);
  EXPECT_EQ(l[0].label, BoxLabel::positive);
  EXPECT_EQ(l[0].actionness, 1.0);
  EXPECT_EQ(l[1].label, BoxLabel::negative);
  EXPECT_EQ(l[1].actionness, 0.0);
}

TEST(Labels, BestCandidateIsPositiveWhenAllBelowThreshold) {
  const std::vector<Box> gt{{0, 0, 19, 19}};
  const std::vector<Box> cands{{5, 5, 24, 24}, {10, 10, 29, 29}, {2, 2, 21, 21}};
  const auto l = assign_actionness_labels(cands, gt);
  EXPECT_EQ(l[0].label, BoxLabel::negative);
  EXPECT_EQ(l[1].label, BoxLabel::negative);
  EXPECT_EQ(l[2].label, BoxLabel::positive);
}

TEST(Labels, EmptyGroundTruthAllNegative) {
  const std::vector<Box> cands{{0, 0, 5, 5}, {1, 1, 4, 4}};
  for (const auto& l : assign_actionness_labels(cands, {})) EXPECT_EQ(l.label, BoxLabel::negative);
}

TEST(Labels, IgnoreBand) {
  const std::vector<Box> gt{{0, 0, 19, 19}};
  const std::vector<Box> cands{{0, 0, 19, 19}, {0, 0, 19, 13}, {0, 0, 4, 4}};
  const auto l = assign_actionness_labels(cands, gt, 0.7, 0.3);
  EXPECT_EQ(l[0].label, BoxLabel::positive);
  EXPECT_EQ(l[1].label, BoxLabel::ignore);
  EXPECT_EQ(l[2].label, BoxLabel::negative);
}

TEST(Regression, RawParameterization) {
  const Box anchor = anchor_box({4, 4}, 10, 10);
  const Box gt = anchor_box({6, 8}, 12, 13);
  EXPECT_EQ(encode_regression(anchor, gt), (RegressionTarget{2, 3, 2, 4}));
  EXPECT_EQ(encode_regression(anchor, anchor), (RegressionTarget{0, 0, 0, 0}));
}

TEST(Regression, RoundTripOnPixelBoxesIsExact) {
  std::mt19937_64 rng(43);
  auto px = [&](int hi) { return static_cast<double>(rng() % static_cast<unsigned>(hi)); };
  for (int i = 0; i < 100; ++i) {
    const double ax = px(200), ay = px(200), gx = px(200), gy = px(200);
    const Box a{ax, ay, ax + 1 + px(80), ay + 1 + px(80)};
    const Box g{gx, gy, gx + 1 + px(80), gy + 1 + px(80)};
    EXPECT_EQ(decode_regression(a, encode_regression(a, g)), g);
  }
}

TEST(Regression, RoundTripOnRealBoxes) {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> c(0, 200), s(2, 80);
  for (auto param : {RegressionParam::raw, RegressionParam::log}) {
    for (int i = 0; i < 100; ++i) {
      const Box a = anchor_box({s(rng), s(rng)}, c(rng), c(rng));
      const Box g = anchor_box({s(rng), s(rng)}, c(rng), c(rng));
      const Box back = decode_regression(a, encode_regression(a, g, param), param);
      EXPECT_NEAR(back.x1, g.x1, 1e-9);
      EXPECT_NEAR(back.y1, g.y1, 1e-9);
      EXPECT_NEAR(back.x2, g.x2, 1e-9);
      EXPECT_NEAR(back.y2, g.y2, 1e-9);
    }
  }
}

TEST(TemporalSkip, FullFrameAndOutwardRounding) {
  const Tube full = temporal_skip_map({0, 0, 24, 18}, 19, 25, 150, 200);
  ASSERT_EQ(full.size(), 8u);
  for (const auto& b : full) EXPECT_EQ(b, (CellBox{0, 0, 199, 149}));
  const Tube part = temporal_skip_map({0, 0, 9, 12}, 19, 25, 150, 200);
  for (const auto& b : part) EXPECT_EQ(b, (CellBox{0, 0, 79, 102}));
}

TEST(TemporalSkip, AlwaysInsideConv2) {
  std::mt19937_64 rng(44);
  for (int i = 0; i < 200; ++i) {
    const int x1 = static_cast<int>(rng() % 25), y1 = static_cast<int>(rng() % 19);
    const int x2 = x1 + static_cast<int>(rng() % (25 - x1));
    const int y2 = y1 + static_cast<int>(rng() % (19 - y1));
    for (const auto& b : temporal_skip_map({x1, y1, x2, y2}, 19, 25, 150, 200))
      EXPECT_TRUE(b.inside(150, 200));
  }
}

TEST(Pairing, NormalizedHalvesAndZeroCube) {
  std::mt19937_64 rng(45);
  const Tensor4 conv2 = test::random_tensorf({3, 8, 16, 16}, rng);
  const Tensor4 conv5 = test::random_tensorf({5, 1, 4, 4}, rng);
  const CellBox box5{0, 0, 3, 3};
  const Tube tube = temporal_skip_map(box5, 4, 4, 16, 16);
  const PairDims dims{{8, 4, 4}, {1, 2, 2}};
  const auto f = pair_tube_features(conv2, tube, conv5, box5, dims);
  const int tube_len = 3 * 4 * 4, box_len = 5 * 2 * 2;
  ASSERT_EQ(f.paired.shape(), (Shape4{tube_len + box_len, 8, 1, 1}));
  double nt = 0, nb = 0;
  for (int c = 0; c < tube_len + box_len; ++c)
    for (int d = 0; d < 8; ++d) (c < tube_len ? nt : nb) += std::pow(f.paired(c, d, 0, 0), 2);
  EXPECT_NEAR(nt, 1.0, 1e-5);
  EXPECT_NEAR(nb, 1.0, 1e-5);
  const auto z = pair_tube_features(conv2, tube, Tensor4(conv5.shape()), box5, dims);
  for (int c = tube_len; c < tube_len + box_len; ++c)
    for (int d = 0; d < 8; ++d) EXPECT_EQ(z.paired(c, d, 0, 0), 0.f);
}

TEST(Pairing, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(46);
  const Tensor4 conv2 = test::random_tensorf({2, 8, 8, 8}, rng);
  const Tensor4 conv5 = test::random_tensorf({3, 1, 2, 2}, rng);
  const CellBox box5{0, 0, 1, 1};
  const Tube tube = temporal_skip_map(box5, 2, 2, 8, 8);
  const PairDims dims{{8, 2, 2}, {1, 1, 1}};
  const auto f = pair_tube_features(conv2, tube, conv5, box5, dims);
  const Tensor4 g = test::random_tensorf(f.paired.shape(), rng);
  const auto back = pair_tube_features_backward(f, g, conv2.shape(), conv5.shape());
  auto objective = [&](const Tensor4& c2, const Tensor4& c5) {
    const auto p = pair_tube_features(c2, tube, c5, box5, dims);
    double s = 0;
    for (std::size_t i = 0; i < p.paired.size(); ++i) s += double(g[i]) * p.paired[i];
    return s;
  };
  // Spot-check the conv5 gradient, which flows through the normalization.
  Tensor4 c5 = conv5;
  for (std::size_t i = 0; i < c5.size(); ++i) {
    const float saved = c5[i];
    c5[i] = saved + 1e-2f;
    const double up = objective(conv2, c5);
    c5[i] = saved - 1e-2f;
    const double down = objective(conv2, c5);
    c5[i] = saved;
    EXPECT_NEAR(back.conv5[i], (up - down) / 2e-2, 2e-3);
  }
}

TEST(KeepByActionness, ThresholdAndFallback) {
  const std::vector<double> a{0.2, 0.7, 0.5, 0.4};
  EXPECT_EQ(keep_by_actionness(a, 0.5), (std::vector<std::size_t>{1, 2}));
  const std::vector<double> low{0.1, 0.3, 0.2};
  EXPECT_EQ(keep_by_actionness(low, 0.5), (std::vector<std::size_t>{1}));
}
