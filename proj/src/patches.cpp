#include "ple/patches.hpp"

#include <string>

#include "ple/errors.hpp"

namespace ple {

std::vector<int> patch_offsets(int extent, int side, int stride) {
  if (stride < 1) throw InvalidArgument("stride must be >= 1");
  if (side < 1 || side > extent)
    throw InvalidArgument("patch side " + std::to_string(side) + " exceeds image extent " +
                          std::to_string(extent));
  std::vector<int> offsets;
  const int last = extent - side;
  for (int o = 0; o <= last; o += stride) offsets.push_back(o);
  if (offsets.back() != last) offsets.push_back(last);
  return offsets;
}

Eigen::VectorXd read_patch(const Image& img, int row, int col, int side) {
  const int n = side * side;
  Eigen::VectorXd v(n * img.channels());
  for (int ch = 0; ch < img.channels(); ++ch)
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) v[ch * n + r * side + c] = img.at(row + r, col + c, ch);
  return v;
}

std::vector<Patch> extract_patches(const Image& img, int side, int stride) {
  const auto rows = patch_offsets(img.height(), side, stride);
  const auto cols = patch_offsets(img.width(), side, stride);
  std::vector<Patch> patches;
  patches.reserve(rows.size() * cols.size());
  for (int r : rows)
    for (int c : cols) patches.push_back({read_patch(img, r, c, side), r, c, side, img.channels()});
  return patches;
}

PatchAccumulator::PatchAccumulator(ImageShape shape)
    : shape_(shape),
      sum_(static_cast<std::size_t>(shape.width) * shape.height * shape.channels, 0.0),
      count_(static_cast<std::size_t>(shape.width) * shape.height, 0) {}

void PatchAccumulator::add(const Eigen::Ref<const Eigen::VectorXd>& values, int row, int col,
                           int side) {
  const int n = side * side;
  if (values.size() != n * shape_.channels)
    throw DimensionMismatch("patch length does not match side and channel count");
  if (row < 0 || col < 0 || row + side > shape_.height || col + side > shape_.width)
    throw InvalidArgument("patch outside aggregation canvas");
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const std::size_t pix = static_cast<std::size_t>(row + r) * shape_.width + (col + c);
      ++count_[pix];
      for (int ch = 0; ch < shape_.channels; ++ch)
        sum_[pix * shape_.channels + ch] += values[ch * n + r * side + c];
    }
}

Image PatchAccumulator::mean() const {
  Image out(shape_.width, shape_.height, shape_.channels);
  for (int r = 0; r < shape_.height; ++r)
    for (int c = 0; c < shape_.width; ++c) {
      const std::size_t pix = static_cast<std::size_t>(r) * shape_.width + c;
      if (count_[pix] == 0)
        throw InvalidArgument("pixel (" + std::to_string(r) + ", " + std::to_string(c) +
                              ") is not covered by any patch");
      for (int ch = 0; ch < shape_.channels; ++ch)
        out.at(r, c, ch) = sum_[pix * shape_.channels + ch] / count_[pix];
    }
  return out;
}

Image aggregate_patches(std::span<const Patch> patches, ImageShape shape) {
  PatchAccumulator acc(shape);
  for (const auto& p : patches) acc.add(p.values, p.row, p.col, p.side);
  return acc.mean();
}

namespace {

std::vector<int> region_offsets(int extent, int side, int step) {
  std::vector<int> offsets;
  for (int o = 0;; o += step) {
    offsets.push_back(o);
    if (o + side >= extent) break;
  }
  return offsets;
}

}  // namespace

RegionPlan plan_regions(int width, int height, int region_side) {
  if (region_side < 2) throw InvalidArgument("region side must be >= 2");
  RegionPlan plan;
  plan.region_side = region_side;
  plan.overlap = region_side / 2;
  const int step = region_side / 2;
  for (int r : region_offsets(height, region_side, step))
    for (int c : region_offsets(width, region_side, step))
      plan.regions.push_back(
          {r, c, std::min(region_side, height - r), std::min(region_side, width - c)});
  return plan;
}

RegionPlan plan_regions(const Image& img, int region_side) {
  return plan_regions(img.width(), img.height(), region_side);
}

Image assemble_regions(const RegionPlan& plan, std::span<const Image> region_images,
                       ImageShape shape) {
  if (region_images.size() != plan.regions.size())
    throw DimensionMismatch("one image per region expected");
  std::vector<double> sum(static_cast<std::size_t>(shape.width) * shape.height * shape.channels, 0.0);
  std::vector<int> count(static_cast<std::size_t>(shape.width) * shape.height, 0);
  for (std::size_t i = 0; i < plan.regions.size(); ++i) {
    const Rect& rect = plan.regions[i];
    const Image& img = region_images[i];
    if (img.width() != rect.width || img.height() != rect.height || img.channels() != shape.channels)
      throw DimensionMismatch("region image does not match its rectangle");
    for (int r = 0; r < rect.height; ++r)
      for (int c = 0; c < rect.width; ++c) {
        const std::size_t pix = static_cast<std::size_t>(rect.row + r) * shape.width + rect.col + c;
        ++count[pix];
        for (int ch = 0; ch < shape.channels; ++ch) sum[pix * shape.channels + ch] += img.at(r, c, ch);
      }
  }
  Image out(shape.width, shape.height, shape.channels);
  for (std::size_t pix = 0; pix < count.size(); ++pix) {
    if (count[pix] == 0) throw InvalidArgument("region plan leaves pixels uncovered");
    for (int ch = 0; ch < shape.channels; ++ch)
      out.data()[pix * shape.channels + ch] = sum[pix * shape.channels + ch] / count[pix];
  }
  return out;
}

}  // namespace ple
