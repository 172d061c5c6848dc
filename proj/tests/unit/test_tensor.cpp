#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "helpers.hpp"
#include "tcnn/gradcheck.hpp"
#include "tcnn/kernels.hpp"
#include "tcnn/reference.hpp"
#include "tcnn/tensor.hpp"

using namespace tcnn;
using tcnn::test::random_kernels;
using tcnn::test::random_tensor;

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor4(Shape4{0, 1, 1, 1}), ShapeError);
  EXPECT_THROW(Tensor4(Shape4{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor, LayoutIsChannelDepthHeightWidth) {
  Tensor4 t(Shape4{2, 3, 4, 5});
  EXPECT_EQ(t.index(1, 2, 3, 4), t.size() - 1);
  EXPECT_EQ(t.index(1, 0, 0, 0), 60u);
  EXPECT_EQ(t.index(0, 1, 0, 0), 20u);
}

TEST(Tensor, StorageIsSixtyFourByteAligned) {
  std::vector<Tensor4> keep;
  for (int n = 1; n <= 40; ++n) {
    keep.emplace_back(Shape4{1, 1, 1, n});
    keep.push_back(Tensor4(Shape4{n, 1, 1, 1}, std::vector<float>(n, 1.0f)).cast<float>());
  }
  for (const auto& t : keep) EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t.data()) % 64, 0u);
}

TEST(Tensor, SerializationRoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  Tensor4 t = test::random_tensorf({3, 2, 5, 7}, rng);
  t[0] = -0.0f;
  t[1] = std::nextafter(0.0f, 1.0f);
  std::stringstream ss;
  write_tensor(ss, t);
  EXPECT_EQ(ss.str().size(), kTensorHeaderBytes + 4 * t.size());
  EXPECT_EQ(ss.str().substr(0, 2), "T4");
  const Tensor4 back = read_tensor(ss);
  ASSERT_EQ(back.shape(), t.shape());
  EXPECT_EQ(std::memcmp(back.data(), t.data(), 4 * t.size()), 0);
}

TEST(Tensor, ConcatAndSplitChannels) {
  std::mt19937_64 rng(4);
  const Tensor4 a = test::random_tensorf({2, 2, 3, 3}, rng);
  const Tensor4 b = test::random_tensorf({3, 2, 3, 3}, rng);
  const Tensor4 ab = concat_channels(a, b);
  EXPECT_EQ(ab.shape(), (Shape4{5, 2, 3, 3}));
  auto [x, y] = split_channels(ab, 2);
  EXPECT_EQ(x, a);
  EXPECT_EQ(y, b);
  EXPECT_THROW(concat_channels(a, test::random_tensorf({1, 1, 3, 3}, rng)), ShapeError);
}

TEST(Conv3d, Conv2RowShape) {
  EXPECT_EQ(conv3d_output_shape({64, 8, 300, 400}, 128, {3, 3, 3}, {}),
            (Shape4{128, 8, 300, 400}));
}

TEST(Conv3d, CenterTapIsIdentity) {
  std::mt19937_64 rng(5);
  const Tensor4 x = test::random_tensorf({1, 4, 5, 6}, rng);
  KernelSet k;
  k.out_channels = 1;
  k.in_channels = 1;
  k.size = {3, 3, 3};
  k.weights.assign(27, 0.f);
  k.bias.assign(1, 0.f);
  k.weight(0, 0, 1, 1, 1) = 1.f;
  EXPECT_EQ(conv3d(x, k), x);
}

TEST(Conv3d, AllOnesSumsTo27) {
  const Tensor4 x(Shape4{1, 3, 3, 3}, 1.f);
  KernelSet k;
  k.out_channels = 1;
  k.in_channels = 1;
  k.size = {3, 3, 3};
  k.weights.assign(27, 1.f);
  k.bias.assign(1, 0.f);
  const Tensor4 y = conv3d(x, k, ConvGeometry{{1, 1, 1}, {0, 0, 0}});
  ASSERT_EQ(y.shape(), (Shape4{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y[0], 27.f);
}

TEST(Conv3d, ChannelMismatchNamesBothShapes) {
  std::mt19937_64 rng(6);
  const Tensor4 x = test::random_tensorf({2, 3, 4, 4}, rng);
  const KernelSet k = random_kernels<float>(1, 3, {3, 3, 3}, rng);
  try {
    (void)conv3d(x, k);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
}

TEST(Conv3d, LinearInInputAndWeights) {
  std::mt19937_64 rng(7);
  const Tensor4d x = random_tensor({2, 3, 4, 5}, rng);
  const Tensor4d y = random_tensor({2, 3, 4, 5}, rng);
  auto k = random_kernels<double>(3, 2, {3, 3, 3}, rng);
  std::fill(k.bias.begin(), k.bias.end(), 0.0);
  const double a = 1.7, b = -0.3;
  Tensor4d mix(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
  const Tensor4d lhs = conv3d(mix, k);
  const Tensor4d cx = conv3d(x, k), cy = conv3d(y, k);
  Tensor4d rhs(lhs.shape());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = a * cx[i] + b * cy[i];
  EXPECT_LT(relative_error(lhs, rhs), 1e-10);

  auto k2 = random_kernels<double>(3, 2, {3, 3, 3}, rng);
  std::fill(k2.bias.begin(), k2.bias.end(), 0.0);
  auto kmix = k;
  for (std::size_t i = 0; i < k.weights.size(); ++i) kmix.weights[i] = a * k.weights[i] + b * k2.weights[i];
  const Tensor4d wl = conv3d(x, kmix);
  const Tensor4d w1 = conv3d(x, k), w2 = conv3d(x, k2);
  Tensor4d wr(wl.shape());
  for (std::size_t i = 0; i < wr.size(); ++i) wr[i] = a * w1[i] + b * w2[i];
  EXPECT_LT(relative_error(wl, wr), 1e-10);
}

TEST(Conv3d, MatchesReferenceForStridesAndPads) {
  std::mt19937_64 rng(8);
  const ConvGeometry geoms[] = {{{1, 1, 1}, {1, 1, 1}}, {{1, 2, 2}, {0, 1, 1}}, {{2, 1, 3}, {1, 0, 2}}};
  for (const auto& g : geoms) {
    const Tensor4 x = test::random_tensorf({3, 5, 7, 9}, rng);
    const KernelSet k = random_kernels<float>(4, 3, {3, 3, 3}, rng);
    const Tensor4 fast = conv3d(x, k, g);
    const Tensor4 ref = reference::conv3d(x, k, g);
    EXPECT_LT(relative_error(fast, ref), 1e-6);
    const Tensor4 go = test::random_tensorf(fast.shape(), rng);
    const auto gf = conv3d_backward(x, k, go, g);
    const auto gr = reference::conv3d_backward(x, k, go, g);
    EXPECT_LT(relative_error(gf.input, gr.input), 1e-6);
    EXPECT_LT(relative_error(gf.kernels.weights, gr.kernels.weights), 1e-6);
    EXPECT_LT(relative_error(gf.kernels.bias, gr.kernels.bias), 1e-6);
  }
}

TEST(Conv3d, ParallelResultIsRunToRunIdentical) {
  std::mt19937_64 rng(9);
  const Tensor4 x = test::random_tensorf({8, 4, 12, 12}, rng);
  const KernelSet k = random_kernels<float>(8, 8, {3, 3, 3}, rng);
  EXPECT_EQ(conv3d(x, k), conv3d(x, k));
}

TEST(Conv3d, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  const Tensor4d x = random_tensor({1, 2, 4, 4}, rng);
  const auto k = random_kernels<double>(2, 1, {3, 3, 3}, rng);
  const Tensor4d w = random_tensor(conv3d_output_shape(x.shape(), 2, k.size, {}), rng);
  const auto analytic = conv3d_backward(x, k, w);
  const auto numeric = finite_diff_grad([&](const Tensor4d& t) { return conv3d(t, k); }, x,
                                        std::span<const double>(w.values()), 1e-6);
  EXPECT_LT(relative_error(analytic.input, numeric), 1e-4);
}

TEST(MaxPool, TableRowShapes) {
  EXPECT_EQ(maxpool3d_output_shape({64, 8, 300, 400}, {1, 2, 2}, {1, 2, 2}),
            (Shape4{64, 8, 150, 200}));
  EXPECT_EQ(maxpool3d_output_shape({128, 8, 150, 200}, {2, 2, 2}, {2, 2, 2}),
            (Shape4{128, 4, 75, 100}));
  EXPECT_EQ(maxpool3d_output_shape({256, 4, 75, 100}, {2, 2, 2}, {2, 2, 2}),
            (Shape4{256, 2, 38, 50}));
}

TEST(MaxPool, ConstantInputPicksLowestIndex) {
  const Tensor4 x(Shape4{1, 2, 4, 4}, 2.5f);
  const auto r = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
  for (std::size_t j = 0; j < r.output.size(); ++j) EXPECT_EQ(r.output[j], 2.5f);
  // Window (0,0,0) starts at flat index 0; window (0,0,1) at 2.
  EXPECT_EQ(r.argmax.index[0], 0);
  EXPECT_EQ(r.argmax.index[1], 2);
  EXPECT_EQ(r.argmax.index[2], 8);
}

TEST(MaxPool, OutputIsValueAtArgmax) {
  std::mt19937_64 rng(11);
  const Tensor4 x = test::random_tensorf({3, 5, 7, 6}, rng);
  const auto r = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
  const auto ref = reference::maxpool3d(x, {2, 2, 2}, {2, 2, 2});
  EXPECT_EQ(r.output, ref.output);
  EXPECT_EQ(r.argmax.index, ref.argmax.index);
  for (std::size_t j = 0; j < r.output.size(); ++j)
    EXPECT_EQ(r.output[j], x[static_cast<std::size_t>(r.argmax.index[j])]);
}

TEST(MaxPool, KernelLargerThanInputRejected) {
  EXPECT_THROW(maxpool3d(Tensor4(Shape4{1, 1, 2, 2}), {2, 2, 2}, {2, 2, 2}), ShapeError);
}

TEST(MaxPool, GradientRoutesOnlyToArgmax) {
  std::mt19937_64 rng(12);
  const Tensor4d x = random_tensor({2, 4, 4, 4}, rng);
  const auto r = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
  const Tensor4d g = random_tensor(r.output.shape(), rng);
  const Tensor4d analytic = route_gradient(g, r.argmax);
  const auto numeric = finite_diff_grad(
      [](const Tensor4d& t) { return maxpool3d(t, {2, 2, 2}, {2, 2, 2}).output; }, x,
      std::span<const double>(g.values()), 1e-7);
  EXPECT_LT(relative_error(analytic, numeric), 1e-4);
}

TEST(FullyConnected, Fc6Dims) {
  Dense fc6(4096, 8192);
  const std::vector<float> x(8192, 0.5f);
  EXPECT_EQ(fully_connected<float>(x, fc6).size(), 4096u);
}

TEST(FullyConnected, IdentityAndBias) {
  Dense d(3, 3);
  for (int i = 0; i < 3; ++i) d.weights[static_cast<std::size_t>(i * 3 + i)] = 1.f;
  const std::vector<float> x{1.f, -2.f, 3.f};
  EXPECT_EQ(fully_connected<float>(x, d), x);
  Dense z(2, 3);
  z.bias = {4.f, -5.f};
  EXPECT_EQ(fully_connected<float>(x, z), (std::vector<float>{4.f, -5.f}));
  EXPECT_THROW(fully_connected<float>(std::vector<float>(2), d), std::exception);
}

TEST(FullyConnected, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  BasicDense<double> d(3, 5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& w : d.weights) w = u(rng);
  for (auto& b : d.bias) b = u(rng);
  const Tensor4d x = random_tensor({5, 1, 1, 1}, rng);
  const std::vector<double> g{0.3, -1.2, 0.7};
  const auto analytic = fully_connected_backward<double>(x.values(), d, g);
  const auto numeric = finite_diff_grad(
      [&](const Tensor4d& t) { return Tensor4d({3, 1, 1, 1}, fully_connected<double>(t.values(), d)); },
      x, std::span<const double>(g), 1e-6);
  EXPECT_LT(relative_error(analytic.input, numeric), 1e-8);
}

TEST(SoftmaxXent, UniformIsLogN) {
  const std::vector<float> logits(5, 0.3f);
  const auto r = softmax_xent<float>(logits, 2);
  EXPECT_NEAR(r.loss, std::log(5.0), 1e-6);
  double s = 0;
  for (float v : r.grad) s += v;
  EXPECT_NEAR(s, 0.0, 1e-7);
}

TEST(SoftmaxXent, DominantLogitDrivesLossToZero) {
  double prev = 1e9;
  for (double big : {1.0, 5.0, 20.0, 80.0}) {
    const std::vector<double> logits{big, 0.0, 0.0};
    const double l = softmax_xent<double>(logits, 0).loss;
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(prev, 1e-30);
}

TEST(SoftmaxXent, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  const Tensor4d x = random_tensor({4, 1, 1, 1}, rng, -2, 2);
  const auto r = softmax_xent<double>(x.values(), 1);
  const auto numeric = finite_diff_grad_scalar(
      [](const Tensor4d& t) { return softmax_xent<double>(t.values(), 1).loss; }, x, 1e-6);
  EXPECT_LT(relative_error(r.grad, numeric), 1e-5);
}

TEST(SoftmaxXent, LabelOutOfRangeRejected) {
  const std::vector<float> logits(3, 0.f);
  EXPECT_THROW(softmax_xent<float>(logits, 3), std::exception);
  EXPECT_THROW(softmax_xent<float>(logits, -1), std::exception);
}

TEST(FiniteDiff, LinearOpIsExact) {
  std::mt19937_64 rng(15);
  const Tensor4d x = random_tensor({1, 1, 2, 3}, rng);
  const std::vector<double> a{1, -2, 3, 0.5, 4, -1};
  const auto g = finite_diff_grad_scalar(
      [&](const Tensor4d& t) {
        double s = 0;
        for (std::size_t i = 0; i < t.size(); ++i) s += a[i] * t[i];
        return s;
      },
      x, 1e-3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(g[i], a[i], 1e-9);
  EXPECT_THROW(finite_diff_grad_scalar([](const Tensor4d&) { return 0.0; }, x, 0.0),
               std::invalid_argument);
}

TEST(Sgd, Arithmetic) {
  std::vector<float> p{1.f};
  const std::vector<float> g{2.f};
  sgd_step<float>(p, g, 0.0);
  EXPECT_EQ(p[0], 1.f);
  sgd_step<float>(p, g, 0.1);
  EXPECT_FLOAT_EQ(p[0], 0.8f);
  std::vector<float> q(2);
  EXPECT_THROW(sgd_step<float>(q, g, 0.1), std::exception);
}

TEST(Sgd, QuadraticBowlDescendsMonotonically) {
  // f(p) = 0.5 * c * p^2, stable for lr < 2 / c.
  const double c = 4.0;
  std::vector<double> p{3.0};
  double prev = 0.5 * c * p[0] * p[0];
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> g{c * p[0]};
    sgd_step<double>(p, g, 0.2);
    const double f = 0.5 * c * p[0] * p[0];
    EXPECT_LT(f, prev);
    prev = f;
  }
}

TEST(Init, UniformWithinGlorotBound) {
  std::mt19937_64 rng(16);
  std::vector<float> w(1000);
  init_uniform(w, 30, 20, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  for (float v : w) EXPECT_LE(std::abs(v), bound);
}
