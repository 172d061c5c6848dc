#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "tcnn/architectures.hpp"
#include "tcnn/gradcheck.hpp"
#include "tcnn/mask.hpp"
#include "tcnn/segmentation.hpp"

using namespace tcnn;

namespace {

SegMask rect_mask(int h, int w, int x1, int y1, int x2, int y2) {
  SegMask m(h, w);
  for (int y = y1; y <= y2; ++y)
    for (int x = x1; x <= x2; ++x) m.set(y, x, true);
  return m;
}

ClipSample textured_clip(int frames, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ClipSample c;
  c.frames = test::random_tensor({3, frames, h, w}, rng, 0.0, 1.0).cast<float>();
  for (int d = 0; d < frames; ++d) {
    c.masks.push_back(rect_mask(h, w, d % 2, 1, w / 2 + d % 2, h / 2));
    c.boxes.emplace_back(mask_to_box(c.masks.back()));
  }
  c.label = 1;
  return c;
}

}  // namespace

TEST(Mask, FileRoundTripAndBitOrder) {
  SegMask m(3, 5);
  m.set(0, 0, true);
  m.set(1, 2, true);
  m.set(2, 4, true);
  std::stringstream ss;
  write_mask(ss, m);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 2u + 8u + 2u);
  EXPECT_EQ(bytes.substr(0, 2), "SM");
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 0x80u | (1u << (7 - 7)));
  EXPECT_EQ(read_mask(ss), m);
}

TEST(MaskToBox, Examples) {
  EXPECT_EQ(mask_to_box(SegMask(240, 320, true)), (Box{0, 0, 319, 239}));
  SegMask p(20, 30);
  p.set(10, 20, true);
  EXPECT_EQ(mask_to_box(p), (Box{20, 10, 20, 10}));
  SegMask two(20, 30);
  two.set(2, 3, true);
  two.set(15, 25, true);
  EXPECT_EQ(mask_to_box(two), (Box{3, 2, 25, 15}));
  EXPECT_FALSE(mask_to_box(SegMask(4, 4)).has_value());
}

TEST(MaskToBox, EnclosesEveryForegroundPixel) {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 50; ++t) {
    SegMask m(12, 15);
    for (int i = 0; i < 6; ++i) m.set(static_cast<int>(rng() % 12), static_cast<int>(rng() % 15), true);
    const auto b = mask_to_box(m);
    ASSERT_TRUE(b.has_value());
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 15; ++x)
        if (m(y, x)) {
          EXPECT_GE(x, b->x1);
          EXPECT_LE(x, b->x2);
          EXPECT_GE(y, b->y1);
          EXPECT_LE(y, b->y2);
        }
  }
}

TEST(SegLoss, UniformAndConfident) {
  const std::vector<SegMask> gt{rect_mask(4, 4, 0, 0, 1, 3)};
  const Tensor4d uniform(Shape4{2, 1, 4, 4}, 0.0);
  EXPECT_NEAR(segmentation_loss(uniform, gt).loss, std::log(2.0), 1e-12);
  Tensor4d confident(Shape4{2, 1, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const bool fg = gt[0](y, x);
      confident(1, 0, y, x) = fg ? 40 : -40;
      confident(0, 0, y, x) = fg ? -40 : 40;
    }
  EXPECT_LT(segmentation_loss(confident, gt).loss, 1e-20);
}

TEST(SegLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(62);
  const std::vector<SegMask> gt{rect_mask(4, 4, 1, 0, 2, 2)};
  for (double fg : {1.0, 5.0}) {
    const Tensor4d x = test::random_tensor({2, 1, 4, 4}, rng, -2, 2);
    const auto r = segmentation_loss(x, gt, fg);
    const auto numeric = finite_diff_grad_scalar(
        [&](const Tensor4d& t) { return segmentation_loss(t, gt, fg).loss; }, x, 1e-6);
    EXPECT_LT(relative_error(r.grad, numeric), 1e-5);
  }
}

TEST(SegLoss, ShapeMismatchRejected) {
  const std::vector<SegMask> gt{SegMask(4, 5)};
  EXPECT_THROW(segmentation_loss(Tensor4(Shape4{2, 1, 4, 4}), gt), std::exception);
  EXPECT_THROW(segmentation_loss(Tensor4(Shape4{3, 1, 4, 5}), gt), std::exception);
}

TEST(LogitsToMasks, ThresholdHalf) {
  Tensor4 l(Shape4{2, 1, 1, 3});
  l(1, 0, 0, 0) = 1.f;
  l(0, 0, 0, 1) = 1.f;
  const auto m = logits_to_masks(l);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m[0](0, 0));
  EXPECT_FALSE(m[0](0, 1));
  EXPECT_FALSE(m[0](0, 2));
}

TEST(HardNegatives, TopByScoreWithStableTies) {
  std::vector<LabeledBox> negs(3);
  negs[0] = {{0, 0, 1, 1}, 0.9, BoxLabel::negative};
  negs[1] = {{1, 1, 2, 2}, 0.1, BoxLabel::negative};
  negs[2] = {{2, 2, 3, 3}, 0.5, BoxLabel::negative};
  EXPECT_EQ(hard_negative_mine(negs, 2), (std::vector<Box>{{0, 0, 1, 1}, {2, 2, 3, 3}}));
  for (auto& n : negs) n.actionness = 0.3;
  EXPECT_EQ(hard_negative_mine(negs, 2), (std::vector<Box>{{0, 0, 1, 1}, {1, 1, 2, 2}}));
  EXPECT_EQ(hard_negative_mine(negs, 10).size(), 3u);
}

TEST(Illumination, IdentityBlackAndGray) {
  const ClipSample c = textured_clip(2, 6, 6, 63);
  const ClipSample same = augment_illumination(c, 1.0);
  EXPECT_LT(relative_error(same.frames, c.frames), 1.0 / 255);
  ClipSample black = c;
  black.frames.fill(0.f);
  for (double a : {0.9, 1.1}) {
    const ClipSample out = augment_illumination(black, a);
    for (float v : out.frames.values()) EXPECT_EQ(v, 0.f);
  }
  ClipSample gray = c;
  gray.frames.fill(200.f / 255.f);
  const ClipSample dim = augment_illumination(gray, 0.9);
  for (float v : dim.frames.values()) EXPECT_NEAR(v * 255.f, 180.f, 1e-3);
}

TEST(Illumination, SeededFactorInRange) {
  ClipSample gray = textured_clip(1, 4, 4, 64);
  gray.frames.fill(0.5f);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const float v = augment_illumination(gray, s).frames[0];
    EXPECT_GE(v, 0.45f - 1e-6f);
    EXPECT_LE(v, 0.55f + 1e-6f);
  }
}

TEST(BackgroundReplace, Cases) {
  ClipSample c = textured_clip(1, 10, 10, 65);
  c.masks[0] = SegMask(10, 10);
  c.boxes = {std::nullopt};
  EXPECT_EQ(augment_background_replace(c, Side::left).frames, c.frames);

  ClipSample full = textured_clip(1, 10, 10, 66);
  full.masks[0] = SegMask(10, 10, true);
  full.boxes = {mask_to_box(full.masks[0])};
  EXPECT_THROW(augment_background_replace(full, Side::top), std::exception);

  ClipSample sym = textured_clip(1, 10, 10, 67);
  sym.masks[0] = rect_mask(10, 10, 2, 2, 7, 7);
  sym.boxes = {mask_to_box(sym.masks[0])};
  const ClipSample half = augment_background_replace(sym, Side::left);
  EXPECT_EQ(half.masks[0].count(), sym.masks[0].count() / 2);
  // Replaced pixels copy an existing background pixel.
  EXPECT_EQ(half.frames(0, 0, 4, 2), sym.frames(0, 0, 4, 1));

  ClipSample nomask = textured_clip(1, 10, 10, 68);
  nomask.masks.clear();
  nomask.boxes.clear();
  EXPECT_THROW(augment_background_replace(nomask, Side::left), std::exception);
}

TEST(FlipShift, Examples) {
  ClipSample c = textured_clip(2, 12, 320, 69);
  c.masks.assign(2, rect_mask(12, 320, 5, 5, 10, 10));
  c.boxes.assign(2, Box{5, 5, 10, 10});
  const ClipSample f = augment_flip_shift(c, true, 0, 0);
  EXPECT_EQ(*f.boxes[0], (Box{309, 5, 314, 10}));
  const ClipSample ff = augment_flip_shift(f, true, 0, 0);
  EXPECT_EQ(ff.frames, c.frames);
  EXPECT_EQ(ff.masks, c.masks);
  const ClipSample back = augment_flip_shift(augment_flip_shift(c, false, 1, 0), false, -1, 0);
  for (int y = 0; y < 12; ++y)
    for (int x = 1; x < 319; ++x) EXPECT_EQ(back.frames(0, 0, y, x), c.frames(0, 0, y, x));
  EXPECT_EQ(back.masks[0].count(), c.masks[0].count());
  EXPECT_EQ(back.frames.shape(), c.frames.shape());
}

TEST(Stcnn, PaperHeadShapes) {
  const Network net = build_stcnn(StcnnSpec::paper(10));
  // Shapes only: the network is described, not run.
  EXPECT_EQ(net.shape(net.find("upsample4")), (Shape4{64, 2, 30, 40}));
  EXPECT_EQ(net.shape(net.find("conv7")), (Shape4{2, 8, 240, 320}));
  EXPECT_EQ(net.shape(net.find("concat1")).c, 112);
  EXPECT_EQ(stcnn_recognition_inputs(StcnnSpec::paper(10)), 112 * 8 * 8 * 8);
}
