#include "ple/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "ple/errors.hpp"

namespace ple {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) throw InvalidArgument("negative image dimensions");
  if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 0 || height < 0) throw InvalidArgument("negative image dimensions");
  if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw DimensionMismatch("pixel buffer length does not match width*height*channels");
}

Image Image::channel(int ch) const {
  Image out(width_, height_, 1);
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) out.at(r, c) = at(r, c, ch);
  return out;
}

void Image::set_channel(int ch, const Image& plane) {
  if (plane.width() != width_ || plane.height() != height_ || plane.channels() != 1)
    throw DimensionMismatch("channel plane shape mismatch");
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) at(r, c, ch) = plane.at(r, c);
}

Image Image::crop(int row, int col, int h, int w) const {
  if (row < 0 || col < 0 || row + h > height_ || col + w > width_)
    throw InvalidArgument("crop rectangle outside image");
  Image out(w, h, channels_);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < channels_; ++ch) out.at(r, c, ch) = at(row + r, col + c, ch);
  return out;
}

namespace {

class PnmReader {
 public:
  PnmReader(const std::vector<unsigned char>& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  int read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > std::numeric_limits<int>::max())
        throw ParseError(std::string(field) + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("expected ") + field, start);
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates maxval from the payload.
  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw ParseError("expected single whitespace after maxval", pos_);
    ++pos_;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_;
};

}  // namespace

Image decode_pnm(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ParseError("not a binary PGM/PPM file (magic P5 or P6 expected)", 0);
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmReader reader(bytes, 2);
  const int width = reader.read_uint("width");
  const int height = reader.read_uint("height");
  const std::size_t maxval_pos = reader.pos();
  const int maxval = reader.read_uint("maxval");
  if (maxval != 255)
    throw UnsupportedFormat("maxval " + std::to_string(maxval) + " at byte " +
                            std::to_string(maxval_pos) + " is unsupported (only 255)");
  reader.single_whitespace();
  const std::size_t payload = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - reader.pos() < payload)
    throw ParseError("truncated pixel payload: expected " + std::to_string(payload) + " bytes",
                     bytes.size());
  std::vector<double> data(payload);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos()), payload, data.begin());
  return Image(width, height, channels, std::move(data));
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

std::vector<unsigned char> encode_pnm(const Image& img) {
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.data()) {
    const double clamped = std::clamp(v, 0.0, 255.0);
    out.push_back(static_cast<unsigned char>(std::floor(clamped + 0.5)));
  }
  return out;
}

void write_image(const Image& img, const std::filesystem::path& path) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("psnr: images differ in shape");
  if (a.empty()) throw InvalidArgument("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double isnr(const Image& degraded, const Image& restored, const Image& reference) {
  const double after = psnr(restored, reference);
  const double before = psnr(degraded, reference);
  if (after == before) return 0.0;  // covers inf - inf
  return after - before;
}

}  // namespace ple
