#include <cmath>

#include <gtest/gtest.h>

#include "ple/errors.hpp"
#include "ple/interpolation.hpp"
#include "ple/pipelines.hpp"

using namespace ple;

namespace {

Image head(int size = 64) { return read_image(PLE_TEST_DATA "/camera_head.pgm").crop(32, 32, size, size); }

// The image as stored in an 8-bit file.
Image quantized(const Image& img) { return decode_pnm(encode_pnm(img)); }

double max_abs_diff(const Image& a, const Image& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

TaskConfig quick(int iterations = 2) {
  TaskConfig cfg;
  cfg.em.iterations = iterations;
  return cfg;
}

}  // namespace

TEST(Defaults, SigmaAndPatchSide) {
  EXPECT_EQ(default_sigma(Task::Inpaint), 3.0);
  EXPECT_EQ(default_sigma(Task::Zoom), 3.0);
  EXPECT_EQ(default_sigma(Task::Denoise), 3.0);
  EXPECT_EQ(default_sigma(Task::Deblur, 5.0), 5.0);
  EXPECT_EQ(default_sigma(Task::ZoomDeblur), 1.0);
  EXPECT_EQ(default_patch_side(1), 8);
  EXPECT_EQ(default_patch_side(1, 0.2), 12);
  EXPECT_EQ(default_patch_side(3), 6);
}

TEST(Inpaint, FullMaskReturnsInput) {
  const Image img = head();
  const auto mask = DegradationOperator::random_mask(64, 64, 1.0, 1);
  TaskConfig cfg = quick(1);
  cfg.sigma = 1e-3;
  const auto out = inpaint(img, mask, cfg, &img);
  EXPECT_GT(psnr(out.image, img), 60.0);
}

TEST(Inpaint, KnownPixelsAreWrittenBack) {
  const Image img = head();
  const auto mask = DegradationOperator::random_mask(64, 64, 0.5, 2);
  const Image y = apply(mask, img);
  const auto out = inpaint(y, mask, quick(), &img);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      if (mask.observed(r, c)) EXPECT_EQ(out.image.at(r, c), img.at(r, c));
  ASSERT_EQ(out.report.iterations.size(), 2u);
  EXPECT_EQ(out.report.iterations[1].psnr_db, psnr(out.image, img));
  EXPECT_GT(out.report.iterations[1].psnr_db, out.report.input_psnr_db);
}

TEST(Inpaint, DirectionalModelsBeatDctOnly) {
  const Image img = read_image(PLE_TEST_DATA "/camera_tripod.pgm");
  const auto mask = DegradationOperator::random_mask(img.width(), img.height(), 0.5, 7);
  const Image y = apply(mask, img);
  TaskConfig full = quick(3);
  TaskConfig dct = quick(3);
  dct.em.num_models = 1;
  const double a = psnr(inpaint(y, mask, full).image, img);
  const double b = psnr(inpaint(y, mask, dct).image, img);
  EXPECT_GT(a, b);
}

TEST(Inpaint, RejectsMismatchedMask) {
  const Image img = head();
  EXPECT_THROW(inpaint(img, DegradationOperator::random_mask(32, 64, 0.5, 1), quick()), DimensionMismatch);
  std::vector<std::uint8_t> none(64 * 64, 0);
  EXPECT_THROW(inpaint(img, DegradationOperator::mask(64, 64, none), quick()), InvalidArgument);
  const Image other(10, 10, 1);
  EXPECT_THROW(inpaint(img, DegradationOperator::random_mask(64, 64, 0.5, 1), quick(), &other), DimensionMismatch);
}

TEST(Inpaint, SeveralRegionsCoverTheImage) {
  const Image img = read_image(PLE_TEST_DATA "/camera_head.pgm").crop(0, 0, 70, 100);
  const auto mask = DegradationOperator::random_mask(100, 70, 0.6, 3);
  TaskConfig cfg = quick(1);
  cfg.region_side = 48;
  const auto out = inpaint(apply(mask, img), mask, cfg, &img);
  EXPECT_EQ(out.image.width(), 100);
  EXPECT_EQ(out.image.height(), 70);
  EXPECT_GT(out.report.iterations[0].psnr_db, out.report.input_psnr_db + 10);
}

TEST(Zoom, FactorOneIsIdentity) {
  const Image img = head(32);
  const auto out = zoom(img, 1, quick());
  EXPECT_EQ(out.image.data(), img.data());
}

TEST(Zoom, ConstantImageIsRestored) {
  const Image low(24, 24, 1, 140.0);
  const auto out = zoom(low, 2, quick());
  ASSERT_EQ(out.image.width(), 48);
  EXPECT_LT(max_abs_diff(out.image, Image(48, 48, 1, 140.0)), 0.5);
  EXPECT_EQ(quantized(out.image).data(), Image(48, 48, 1, 140.0).data());
}

TEST(Zoom, KeepsLowResolutionSamples) {
  const Image img = head();
  const Image low = decimate(img, 2);
  const auto out = zoom(low, 2, quick(1), &img);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) EXPECT_EQ(out.image.at(2 * r, 2 * c), low.at(r, c));
  EXPECT_GT(out.report.iterations[0].psnr_db, 22.0);
}

TEST(Deblur, IdentityKernelKeepsInput) {
  const Image img = head();
  TaskConfig cfg = quick(1);
  const auto out = deblur(img, Kernel::box(1), 0.5, cfg, &img);
  EXPECT_GT(psnr(out.image, img), 45.0);
}

TEST(Deblur, ImprovesBlurredCrop) {
  const Image img = head();
  const auto blur = DegradationOperator::convolution(64, 64, Kernel::gaussian(1.0, 5));
  const Image y = degrade(blur.with_noise(5.0), img, 11);
  const auto out = deblur(y, Kernel::gaussian(1.0, 5), 5.0, quick(2), &img);
  EXPECT_GT(isnr(y, out.image, img), 0.0);
  EXPECT_EQ(out.models.position_count(), 18u * 12u);
}

TEST(Deblur, RejectsWideKernel) {
  EXPECT_THROW(deblur(head(), Kernel::gaussian(2.0, 7), 5.0, quick()), InvalidArgument);
}

TEST(ZoomDeblur, NearDeltaKernelFollowsSpline) {
  const Image low = head(32);
  const Image spline = zoom_spline(low, 2, 64, 64);
  const auto out = zoom_deblur(low, 1e-3, 2, quick(1));
  EXPECT_GT(psnr(out.image, spline), 40.0);
}

TEST(ZoomDeblur, ConstantStaysConstant) {
  const Image low(20, 20, 1, 90.0);
  const auto out = zoom_deblur(low, 1.0, 2, quick(1));
  EXPECT_EQ(quantized(out.image).data(), Image(40, 40, 1, 90.0).data());
}

TEST(Color, ReplicatedGrayMatchesGray) {
  const Image gray = head();
  Image color(64, 64, 3);
  for (int ch = 0; ch < 3; ++ch) color.set_channel(ch, gray);
  const auto mask = DegradationOperator::random_mask(64, 64, 0.5, 4);
  TaskConfig cfg = quick(1);
  cfg.patch_side = 6;
  const auto g = inpaint(apply(mask, gray), mask, cfg);
  const auto c = inpaint(apply(mask, color), mask, cfg);
  for (int ch = 0; ch < 3; ++ch) EXPECT_LT(max_abs_diff(c.image.channel(ch), g.image), 1e-9);
  EXPECT_EQ(c.models.models[0].dim(), 108);
  EXPECT_EQ(g.models.models[0].dim(), 36);
}

TEST(Color, InpaintsNaturalColorCrop) {
  const Image img = read_image(PLE_TEST_DATA "/astronaut_color.ppm").crop(0, 0, 48, 48);
  const auto mask = DegradationOperator::random_mask(48, 48, 0.5, 5);
  const auto out = inpaint(apply(mask, img), mask, quick(2), &img);
  EXPECT_GT(out.report.iterations[1].psnr_db, out.report.input_psnr_db + 10);
}

TEST(Denoise, ConstantImage) {
  const Image flat(40, 40, 1, 128.0);
  const auto out = denoise(flat, quick(2));
  EXPECT_LT(max_abs_diff(out.image, flat), 0.5);
}

TEST(Report, CsvHasOneRowPerIteration) {
  const Image img = head(32);
  const auto mask = DegradationOperator::random_mask(32, 32, 0.5, 6);
  const auto out = inpaint(apply(mask, img), mask, quick(3), &img);
  const std::string csv = out.report.csv();
  EXPECT_EQ(csv.rfind("iteration,total_energy,psnr_db,cluster_occupancy_json\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("\n3,"), std::string::npos);
}
