#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ple/image.hpp"

namespace ple {

struct ImageShape {
  int width = 0;
  int height = 0;
  int channels = 1;
};

/// A square patch vectorized channel-major: all of channel 0 (row-major),
/// then channel 1, then channel 2.
struct Patch {
  Eigen::VectorXd values;
  int row = 0;
  int col = 0;
  int side = 0;
  int channels = 1;
};

/// Placements along one axis: multiples of `stride` that fit, plus the last
/// offset `extent - side` so the border is always covered.
std::vector<int> patch_offsets(int extent, int side, int stride);

Eigen::VectorXd read_patch(const Image& img, int row, int col, int side);

std::vector<Patch> extract_patches(const Image& img, int side, int stride);

/// Sum/count accumulator behind `aggregate_patches`.
class PatchAccumulator {
 public:
  explicit PatchAccumulator(ImageShape shape);
  void add(const Eigen::Ref<const Eigen::VectorXd>& values, int row, int col, int side);
  /// Per-pixel mean; throws naming the first uncovered pixel.
  Image mean() const;

 private:
  ImageShape shape_;
  std::vector<double> sum_;
  std::vector<int> count_;
};

/// Each output pixel is the arithmetic mean of every patch covering it.
Image aggregate_patches(std::span<const Patch> patches, ImageShape shape);

struct Rect {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

struct RegionPlan {
  int region_side = 128;
  int overlap = 64;
  std::vector<Rect> regions;
};

/// Half-overlapped square regions (step region_side/2), clipped at the
/// image border.
RegionPlan plan_regions(int width, int height, int region_side);
RegionPlan plan_regions(const Image& img, int region_side);

/// Averages region images on their overlaps.
Image assemble_regions(const RegionPlan& plan, std::span<const Image> region_images,
                       ImageShape shape);

}  // namespace ple
