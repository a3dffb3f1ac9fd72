#include <gtest/gtest.h>

#include <random>

#include "pmri/kernels.hpp"

using namespace pmri;

namespace {

Tensor random_tensor(int c, int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Tensor t(c, h, w);
  for (auto& v : t.data) v = n(rng);
  return t;
}

std::vector<float> random_floats(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct Case {
  int in, out, kernel, stride, h, w;
};

}  // namespace

class ConvAgainstReference : public ::testing::TestWithParam<Case> {};

TEST_P(ConvAgainstReference, ForwardAndBackwardAgree) {
  const Case c = GetParam();
  std::mt19937_64 rng(c.in * 100 + c.out * 10 + c.kernel + c.stride);
  const ConvShape shape{c.in, c.out, c.kernel, c.stride};
  const Tensor x = random_tensor(c.in, c.h, c.w, rng);
  const auto weight = random_floats(shape.weight_count(), rng);
  const auto bias = random_floats(static_cast<std::size_t>(c.out), rng);

  const Tensor y = kernels::conv2d_forward(x, weight, bias, shape);
  const Tensor y_ref = kernels::reference::conv2d_forward(x, weight, bias, shape);
  ASSERT_TRUE(y.same_shape(y_ref));
  EXPECT_EQ(y.height, shape.out_size(c.h));
  EXPECT_LT(max_diff(y.data, y_ref.data), 1e-12);

  const Tensor g = random_tensor(c.out, y.height, y.width, rng);
  const Tensor gi = kernels::conv2d_backward_input(g, weight, shape, c.h, c.w);
  const Tensor gi_ref = kernels::reference::conv2d_backward_input(g, weight, shape, c.h, c.w);
  EXPECT_LT(max_diff(gi.data, gi_ref.data), 1e-12);

  std::vector<double> gw(shape.weight_count()), gb(c.out), gw_ref(gw.size()), gb_ref(gb.size());
  kernels::conv2d_backward_params(x, g, shape, gw, gb);
  kernels::reference::conv2d_backward_params(x, g, shape, gw_ref, gb_ref);
  EXPECT_LT(max_diff(gw, gw_ref), 1e-12);
  EXPECT_LT(max_diff(gb, gb_ref), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvAgainstReference,
                         ::testing::Values(Case{2, 3, 3, 1, 8, 8}, Case{3, 4, 3, 2, 9, 7}, Case{1, 1, 1, 1, 4, 5},
                                           Case{4, 2, 5, 2, 12, 10}, Case{2, 2, 3, 3, 7, 7}));

TEST(Conv, BackwardInputIsAdjointOfForward) {
  std::mt19937_64 rng(3);
  const ConvShape shape{3, 2, 3, 2};
  const Tensor x = random_tensor(3, 9, 8, rng);
  const auto weight = random_floats(shape.weight_count(), rng);
  const std::vector<float> zero_bias(2, 0.0f);
  const Tensor y = kernels::conv2d_forward(x, weight, zero_bias, shape);
  const Tensor g = random_tensor(2, y.height, y.width, rng);
  const Tensor gi = kernels::conv2d_backward_input(g, weight, shape, 9, 8);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) lhs += y.data[i] * g.data[i];
  for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * gi.data[i];
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(Conv, HandComputedThreeByThree) {
  Tensor x(1, 3, 3);
  for (int i = 0; i < 9; ++i) x.data[i] = i + 1;  // 1..9
  const ConvShape shape{1, 1, 3, 1};
  const std::vector<float> ones(9, 1.0f), bias{0.5f};
  const Tensor y = kernels::conv2d_forward(x, ones, bias, shape);
  // Zero-padded 3x3 box sums.
  const double expected[9] = {12, 21, 16, 27, 45, 33, 24, 39, 28};
  for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y.data[i], expected[i] + 0.5);
}

TEST(Conv, AccumulatesParameterGradients) {
  std::mt19937_64 rng(4);
  const ConvShape shape{1, 1, 1, 1};
  const Tensor x = random_tensor(1, 2, 2, rng);
  Tensor g(1, 2, 2, 1.0);
  std::vector<double> gw{10.0}, gb{20.0};
  kernels::conv2d_backward_params(x, g, shape, gw, gb);
  double sx = 0.0;
  for (double v : x.data) sx += v;
  EXPECT_DOUBLE_EQ(gw[0], 10.0 + sx);
  EXPECT_DOUBLE_EQ(gb[0], 24.0);
}

TEST(Upsample, NearestAndItsAdjoint) {
  Tensor x(1, 2, 2);
  x.data = {1, 2, 3, 4};
  const Tensor u = kernels::upsample_nearest(x, 2, 4, 4);
  const double expected[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (int i = 0; i < 16; ++i) EXPECT_EQ(u.data[i], expected[i]);

  std::mt19937_64 rng(5);
  const Tensor a = random_tensor(2, 3, 3, rng);
  const Tensor g = random_tensor(2, 5, 6, rng);
  const Tensor ua = kernels::upsample_nearest(a, 2, 5, 6);
  const Tensor gb = kernels::upsample_nearest_backward(g, 2, 3, 3);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < ua.data.size(); ++i) lhs += ua.data[i] * g.data[i];
  for (std::size_t i = 0; i < a.data.size(); ++i) rhs += a.data[i] * gb.data[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}
