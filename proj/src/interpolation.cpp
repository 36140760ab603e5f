#include "ple/interpolation.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "ple/errors.hpp"

namespace ple {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double keys(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < 2) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return 0.0;
}

double bspline3(double t) {
  t = std::abs(t);
  if (t < 1) return 2.0 / 3.0 - t * t + 0.5 * t * t * t;
  if (t < 2) {
    const double u = 2 - t;
    return u * u * u / 6.0;
  }
  return 0.0;
}

// In-place cubic B-spline coefficients of a 1-D signal, mirror boundary.
void prefilter(std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  if (n < 2) return;
  const double z = std::sqrt(3.0) - 2.0;
  const double gain = (1 - z) * (1 - 1 / z);
  for (double& v : c) v *= gain;

  const int horizon = static_cast<int>(std::ceil(std::log(1e-16) / std::log(std::abs(z))));
  if (horizon < n) {
    double sum = c[0];
    double zk = z;
    for (int k = 1; k < horizon; ++k) {
      sum += zk * c[k];
      zk *= z;
    }
    c[0] = sum;
  } else {
    // exact mirror sum for short signals
    double zn = z;
    const double iz = 1.0 / z;
    double z2n = std::pow(z, n - 1);
    double sum = c[0] + z2n * c[n - 1];
    z2n *= z2n * iz;
    for (int k = 1; k <= n - 2; ++k) {
      sum += (zn + z2n) * c[k];
      zn *= z;
      z2n *= iz;
    }
    c[0] = sum / (1.0 - zn * zn);
  }
  for (int k = 1; k < n; ++k) c[k] += z * c[k - 1];
  c[n - 1] = (z / (z * z - 1)) * (z * c[n - 2] + c[n - 1]);
  for (int k = n - 2; k >= 0; --k) c[k] = z * (c[k + 1] - c[k]);
}

using Weight = std::function<double(double)>;

// Resample one axis: out[j] = Σ_k in[k] w(j/s − k) over the 4 nearest k.
std::vector<double> resample(const std::vector<double>& in, int factor, int out_len, const Weight& w) {
  const int n = static_cast<int>(in.size());
  std::vector<double> out(static_cast<std::size_t>(out_len));
  for (int j = 0; j < out_len; ++j) {
    const double x = static_cast<double>(j) / factor;
    const int base = static_cast<int>(std::floor(x));
    double acc = 0.0;
    for (int k = base - 1; k <= base + 2; ++k) acc += in[static_cast<std::size_t>(reflect(k, n))] * w(x - k);
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

Image zoom_separable(const Image& low, int factor, int width, int height, const Weight& w, bool spline) {
  if (factor < 1) throw InvalidArgument("zoom factor must be >= 1");
  if (low.empty()) throw InvalidArgument("empty image");
  if (width < 1 || height < 1) throw InvalidArgument("output size must be positive");
  const int lw = low.width();
  const int lh = low.height();
  Image out(width, height, low.channels());
  for (int ch = 0; ch < low.channels(); ++ch) {
    // Rows first (lh × width), then columns.
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(lh));
    for (int r = 0; r < lh; ++r) {
      std::vector<double> line(static_cast<std::size_t>(lw));
      for (int c = 0; c < lw; ++c) line[static_cast<std::size_t>(c)] = low.at(r, c, ch);
      if (spline) prefilter(line);
      rows[static_cast<std::size_t>(r)] = resample(line, factor, width, w);
    }
    for (int c = 0; c < width; ++c) {
      std::vector<double> line(static_cast<std::size_t>(lh));
      for (int r = 0; r < lh; ++r) line[static_cast<std::size_t>(r)] = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (spline) prefilter(line);
      const auto col = resample(line, factor, height, w);
      for (int r = 0; r < height; ++r) out.at(r, c, ch) = col[static_cast<std::size_t>(r)];
    }
  }
  return out;
}

}  // namespace

Image zoom_bicubic(const Image& low_res, int factor, int width, int height) {
  return zoom_separable(low_res, factor, width, height, keys, false);
}

Image zoom_spline(const Image& low_res, int factor, int width, int height) {
  return zoom_separable(low_res, factor, width, height, bspline3, true);
}

}  // namespace ple
