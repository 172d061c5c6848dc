#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "tcnn/gradcheck.hpp"
#include "tcnn/toi_pool.hpp"

using namespace tcnn;

namespace {

Tube random_tube(int depth, int h, int w, std::mt19937_64& rng) {
  Tube t;
  for (int d = 0; d < depth; ++d) {
    const int x1 = static_cast<int>(rng() % static_cast<unsigned>(w));
    const int y1 = static_cast<int>(rng() % static_cast<unsigned>(h));
    const int x2 = x1 + static_cast<int>(rng() % static_cast<unsigned>(w - x1));
    const int y2 = y1 + static_cast<int>(rng() % static_cast<unsigned>(h - y1));
    t.push_back({x1, y1, x2, y2});
  }
  return t;
}

}  // namespace

TEST(BinEdges, FloorRule) {
  EXPECT_EQ(bin_edges(8, 4), (std::vector<Bin>{{0, 2}, {2, 4}, {4, 6}, {6, 8}}));
  EXPECT_EQ(bin_edges(7, 4), (std::vector<Bin>{{0, 1}, {1, 3}, {3, 5}, {5, 7}}));
}

TEST(BinEdges, SmallerThanGridGetsOneElementEach) {
  const auto b = bin_edges(3, 4);
  ASSERT_EQ(b.size(), 4u);
  for (const auto& bin : b) {
    EXPECT_LT(bin.start, bin.end);
    EXPECT_GE(bin.start, 0);
    EXPECT_LE(bin.end, 3);
  }
  EXPECT_EQ(b.front().start, 0);
  EXPECT_EQ(b.back().end, 3);
}

TEST(ToiPool, TableRowShapes) {
  const Tensor4 conv5(Shape4{512, 1, 19, 25}, 1.f);
  EXPECT_EQ(toi_pool_forward(conv5, full_frame_tube(1, 19, 25), {1, 4, 4}).output.shape(),
            (Shape4{512, 1, 4, 4}));
  const Tensor4 conv2(Shape4{128, 8, 150, 200}, 1.f);
  Tube tube(8, CellBox{10, 20, 90, 120});
  EXPECT_EQ(toi_pool_forward(conv2, tube, {8, 8, 8}).output.shape(),
            (Shape4{128, 8, 8, 8}));
}

TEST(ToiPool, VariableFramesToSingleBin) {
  std::mt19937_64 rng(21);
  const Tensor4d x = test::random_tensor({1, 4, 12, 12}, rng);
  const Tube tube{{0, 0, 11, 11}, {2, 2, 7, 9}, {1, 3, 4, 6}, {5, 0, 11, 4}};
  const auto r = toi_pool_forward(x, tube, {1, 4, 4});
  ASSERT_EQ(r.output.shape(), (Shape4{1, 1, 4, 4}));
  // Each output is the maximum over its spatial bin in every frame.
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 4; ++ox) {
      double best = -1e9;
      for (int d = 0; d < 4; ++d) {
        const CellBox& b = tube[static_cast<std::size_t>(d)];
        const auto ys = bin_edges(b.height(), 4)[static_cast<std::size_t>(oy)];
        const auto xs = bin_edges(b.width(), 4)[static_cast<std::size_t>(ox)];
        for (int y = ys.start; y < ys.end; ++y)
          for (int xx = xs.start; xx < xs.end; ++xx) best = std::max(best, x(0, d, b.y1 + y, b.x1 + xx));
      }
      EXPECT_EQ(r.output(0, 0, oy, ox), best);
    }
}

TEST(ToiPool, ConstantCube) {
  const Tensor4 x(Shape4{3, 4, 6, 6}, 0.25f);
  std::mt19937_64 rng(22);
  const auto r = toi_pool_forward(x, random_tube(4, 6, 6, rng), {2, 3, 3});
  for (std::size_t i = 0; i < r.output.size(); ++i) EXPECT_EQ(r.output[i], 0.25f);
}

TEST(ToiPool, RejectsBadTubes) {
  const Tensor4 x(Shape4{1, 4, 6, 6});
  EXPECT_THROW(toi_pool_forward(x, Tube(3, CellBox{0, 0, 1, 1}), {1, 2, 2}), std::exception);
  Tube bad(4, CellBox{0, 0, 1, 1});
  bad[2] = CellBox{3, 0, 1, 1};
  EXPECT_THROW(toi_pool_forward(x, bad, {1, 2, 2}), std::exception);
  EXPECT_THROW(toi_pool_forward(x, Tube(4, CellBox{0, 0, 6, 1}), {1, 2, 2}), std::exception);
}

TEST(ToiPool, FullTubeAtFeatureShapeIsIdentity) {
  std::mt19937_64 rng(23);
  const Tensor4 x = test::random_tensorf({2, 3, 5, 7}, rng);
  const auto r = toi_pool_forward(x, full_frame_tube(3, 5, 7), {3, 5, 7});
  EXPECT_EQ(r.output, x);
}

TEST(ToiPool, SingleCellGradient) {
  Tensor4 x(Shape4{1, 1, 2, 2});
  x(0, 0, 1, 0) = 5.f;
  const auto r = toi_pool_forward(x, full_frame_tube(1, 2, 2), {1, 1, 1});
  const Tensor4 g = toi_pool_backward(Tensor4(Shape4{1, 1, 1, 1}, 1.f), r.argmax, x.shape());
  EXPECT_EQ(g(0, 0, 1, 0), 1.f);
  EXPECT_EQ(g(0, 0, 0, 0) + g(0, 0, 0, 1) + g(0, 0, 1, 1), 0.f);
}

TEST(ToiPool, SharedWinnerAccumulates) {
  // A 1-wide box pooled into 2 columns: both bins read the same cell.
  Tensor4d x(Shape4{1, 1, 1, 3});
  x(0, 0, 0, 0) = 0.1;
  x(0, 0, 0, 1) = 0.9;
  x(0, 0, 0, 2) = 0.3;
  const Tube tube{{1, 0, 1, 0}};
  const auto r = toi_pool_forward(x, tube, {1, 1, 2});
  EXPECT_EQ(r.argmax.index[0], r.argmax.index[1]);
  Tensor4d g(Shape4{1, 1, 1, 2});
  g[0] = 0.4;
  g[1] = -1.5;
  const auto back = toi_pool_backward(g, r.argmax, x.shape());
  EXPECT_DOUBLE_EQ(back(0, 0, 0, 1), 0.4 - 1.5);
  const auto numeric = finite_diff_grad(
      [&](const Tensor4d& t) { return toi_pool_forward(t, tube, {1, 1, 2}).output; }, x,
      std::span<const double>(g.values()), 1e-6);
  EXPECT_LT(relative_error(back, numeric), 1e-6);
}

TEST(ToiPool, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor4d x = test::random_tensor({2, 4, 6, 6}, rng);
    const Tube tube = random_tube(4, 6, 6, rng);
    const auto r = toi_pool_forward(x, tube, {2, 2, 2});
    const Tensor4d g = test::random_tensor(r.output.shape(), rng);
    const auto back = toi_pool_backward(g, r.argmax, x.shape());
    const auto numeric = finite_diff_grad(
        [&](const Tensor4d& t) { return toi_pool_forward(t, tube, {2, 2, 2}).output; }, x,
        std::span<const double>(g.values()), 1e-7);
    EXPECT_LT(relative_error(back, numeric), 1e-4);
  }
}

TEST(ToiPool, BackwardIsAdjointAndConservesMass) {
  std::mt19937_64 rng(25);
  const Tensor4d x = test::random_tensor({3, 4, 8, 8}, rng);
  const Tube tube = random_tube(4, 8, 8, rng);
  const auto r = toi_pool_forward(x, tube, {2, 3, 3});
  const Tensor4d g = test::random_tensor(r.output.shape(), rng, 0.0, 1.0);
  const auto back = toi_pool_backward(g, r.argmax, x.shape());
  double lhs = 0, rhs = 0, mass_in = 0, mass_out = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += back[i] * x[i];
    mass_in += std::abs(back[i]);
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    rhs += g[j] * r.output[j];
    mass_out += std::abs(g[j]);
  }
  EXPECT_NEAR(lhs, rhs, 1e-12);
  EXPECT_NEAR(mass_in, mass_out, 1e-12);
}

TEST(ToiPool, SingleBinEqualsRegionMax) {
  std::mt19937_64 rng(26);
  const Tensor4d x = test::random_tensor({2, 3, 6, 6}, rng);
  const Tube tube = random_tube(3, 6, 6, rng);
  const auto r = toi_pool_forward(x, tube, {1, 1, 1});
  for (int c = 0; c < 2; ++c) {
    double best = -1e9;
    for (int d = 0; d < 3; ++d) {
      const auto& b = tube[static_cast<std::size_t>(d)];
      for (int y = b.y1; y <= b.y2; ++y)
        for (int xx = b.x1; xx <= b.x2; ++xx) best = std::max(best, x(c, d, y, xx));
    }
    EXPECT_EQ(r.output(c, 0, 0, 0), best);
  }
}

TEST(ToiPool, BackwardRejectsMismatchedMap) {
  const Tensor4 x(Shape4{1, 2, 4, 4}, 1.f);
  const auto r = toi_pool_forward(x, full_frame_tube(2, 4, 4), {1, 2, 2});
  EXPECT_THROW(toi_pool_backward(Tensor4(Shape4{1, 1, 3, 3}), r.argmax, x.shape()), std::exception);
  EXPECT_THROW(toi_pool_backward(r.output, r.argmax, Shape4{1, 2, 4, 5}), std::exception);
}
