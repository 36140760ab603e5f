#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace ple {

/// Real-valued pixel grid, row-major and channel-interleaved, nominal range
/// [0,255]. Values are never quantized until `write_image`.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int row, int col, int ch = 0) noexcept {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  double at(int row, int col, int ch = 0) const noexcept {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  /// Single channel `ch` as a one-channel image.
  Image channel(int ch) const;
  void set_channel(int ch, const Image& plane);

  /// Sub-rectangle copy; all channels.
  Image crop(int row, int col, int height, int width) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

/// Reads binary PGM (P5) or PPM (P6) with maxval 255.
Image read_image(const std::filesystem::path& path);
/// Parses an in-memory P5/P6 byte buffer.
Image decode_pnm(const std::vector<unsigned char>& bytes);

/// Clamps to [0,255], rounds half-up, and writes P5 (1 channel) or P6 (3).
void write_image(const Image& img, const std::filesystem::path& path);
std::vector<unsigned char> encode_pnm(const Image& img);

/// 10·log10(255²/MSE) over all samples; +infinity when the images are equal.
double psnr(const Image& a, const Image& b);

/// psnr(restored, reference) − psnr(degraded, reference).
double isnr(const Image& degraded, const Image& restored, const Image& reference);

}  // namespace ple
