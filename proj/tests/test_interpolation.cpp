#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "ple/image.hpp"
#include "ple/interpolation.hpp"

using namespace ple;

namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  Image img(w, h, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 255);
  for (double& v : img.data()) v = u(rng);
  return img;
}

using Zoom = Image (*)(const Image&, int, int, int);

}  // namespace

class Interpolator : public ::testing::TestWithParam<Zoom> {};

TEST_P(Interpolator, ReproducesSamples) {
  const Image low = random_image(9, 7, 1);
  for (int s : {2, 3}) {
    const Image fine = GetParam()(low, s, 9 * s, 7 * s);
    ASSERT_EQ(fine.width(), 9 * s);
    ASSERT_EQ(fine.height(), 7 * s);
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 9; ++c) EXPECT_NEAR(fine.at(s * r, s * c), low.at(r, c), 1e-9);
  }
}

TEST_P(Interpolator, KeepsConstants) {
  const Image low(6, 6, 1, 87.0);
  const Image fine = GetParam()(low, 2, 12, 12);
  for (double v : fine.data()) EXPECT_NEAR(v, 87.0, 1e-9);
}

// Away from the mirrored border; the spline prefilter's reach decays as
// (√3 − 2)^k.
TEST_P(Interpolator, ReproducesLinearRampsInside) {
  Image low(40, 40, 1);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c) low.at(r, c) = 3.0 * c + 2.0 * r;
  const Image fine = GetParam()(low, 2, 80, 80);
  for (int r = 30; r < 50; ++r)
    for (int c = 30; c < 50; ++c) EXPECT_NEAR(fine.at(r, c), 1.5 * c + 1.0 * r, 1e-6);
}

TEST_P(Interpolator, FactorOneIsIdentity) {
  const Image low = random_image(5, 4, 2);
  const Image out = GetParam()(low, 1, 5, 4);
  for (std::size_t i = 0; i < low.data().size(); ++i) EXPECT_NEAR(out.data()[i], low.data()[i], 1e-9);
}

TEST_P(Interpolator, ChannelsAreIndependent) {
  const Image gray = random_image(6, 5, 3);
  Image color(6, 5, 3);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 6; ++c)
      for (int ch = 0; ch < 3; ++ch) color.at(r, c, ch) = gray.at(r, c) + 10 * ch;
  const Image a = GetParam()(gray, 2, 12, 10);
  const Image b = GetParam()(color, 2, 12, 10);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 12; ++c)
      for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(b.at(r, c, ch), a.at(r, c) + 10 * ch, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Both, Interpolator, ::testing::Values(&zoom_bicubic, &zoom_spline),
                         [](const ::testing::TestParamInfo<Zoom>& info) {
                           return std::string(info.param == &zoom_bicubic ? "Bicubic" : "Spline");
                         });

// Keys kernel at the half-sample point: (−1, 9, 9, −1)/16.
TEST(Bicubic, HalfSampleWeights) {
  Image low(8, 1, 1);
  const double v[8] = {0, 0, 0, 16, 0, 0, 0, 0};
  for (int c = 0; c < 8; ++c) low.at(0, c) = v[c];
  const Image fine = zoom_bicubic(low, 2, 16, 1);
  EXPECT_NEAR(fine.at(0, 5), 9.0, 1e-12);
  EXPECT_NEAR(fine.at(0, 7), 9.0, 1e-12);
  EXPECT_NEAR(fine.at(0, 3), -1.0, 1e-12);
  EXPECT_NEAR(fine.at(0, 9), -1.0, 1e-12);
  EXPECT_NEAR(fine.at(0, 11), 0.0, 1e-12);
}

// Spline interpolation of an impulse on a long line: the half-sample value
// equals the cardinal cubic spline η(1/2), closed form via the pole.
TEST(Spline, HalfSampleOfImpulseMatchesCardinalSpline) {
  const int n = 64;
  Image low(n, 1, 1);
  low.at(0, n / 2) = 1.0;
  const Image fine = zoom_spline(low, 2, 2 * n, 1);
  const double z = std::sqrt(3.0) - 2.0;
  // Coefficients of the cardinal spline: c_k = (−6z/(1 − z²))·z^|k|.
  auto coeff = [&](int k) { return -6.0 * z / (1 - z * z) * std::pow(z, std::abs(k)); };
  // B-spline at ±1/2 is 23/48, at ±3/2 is 1/48.
  const double expect = 23.0 / 48 * (coeff(0) + coeff(1)) + 1.0 / 48 * (coeff(-1) + coeff(2));
  EXPECT_NEAR(fine.at(0, n + 1), expect, 1e-9);
  EXPECT_NEAR(fine.at(0, n - 1), expect, 1e-9);
}

TEST(Spline, DiffersFromBicubic) {
  const Image low = random_image(8, 8, 4);
  const Image a = zoom_bicubic(low, 2, 16, 16);
  const Image b = zoom_spline(low, 2, 16, 16);
  double diff = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) diff = std::max(diff, std::abs(a.data()[i] - b.data()[i]));
  EXPECT_GT(diff, 0.1);
}
