#pragma once

#include "ple/image.hpp"

namespace ple {

/// Fine-grid pixel (R, C) sits at low-resolution coordinate (R/s, C/s), so
/// low-res samples land on multiples of s. Both interpolators use whole-
/// sample symmetric extension and reproduce the samples exactly.

/// Keys cubic convolution, a = −0.5.
Image zoom_bicubic(const Image& low_res, int factor, int width, int height);

/// Cubic B-spline interpolation: recursive prefilter (pole √3 − 2), then
/// sampling of the spline.
Image zoom_spline(const Image& low_res, int factor, int width, int height);

}  // namespace ple
