#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ple/em.hpp"
#include "ple/image.hpp"
#include "ple/init_bases.hpp"
#include "ple/operators.hpp"

namespace ple {

enum class Task { Inpaint, Zoom, Deblur, ZoomDeblur, Denoise };

struct TaskConfig {
  EmConfig em;
  /// Noise σ used by the estimator; unset means the task default (3 for
  /// inpainting, zooming and denoising, σ_n for deblurring, 1 for
  /// zooming-deblurring).
  std::optional<double> sigma;
  /// Patch side; unset means 8 for gray images (12 when at most 20% of the
  /// pixels are observed) and 6 per channel for color images.
  std::optional<int> patch_side;
  int region_side = 128;
  int margin = 2;  // deblurring: Ω̄ extends Ω by this many pixels per side
  InitMode init = InitMode::Directional;
  double edge_blur = 1.0;  // synthetic edge blur for the initial bases
  /// Zero-filled (or degraded) first estimates with a uniform random
  /// clustering instead of the directional initialization.
  bool random_init = false;
  std::uint64_t seed = 0;
  /// Warm start; replaces the synthetic initialization when set.
  std::optional<ModelSet> models;
};

struct IterationReport {
  int iteration = 0;
  double total_energy = 0.0;
  double psnr_db = 0.0;  // NaN without a reference
  std::vector<int> occupancy;
};

struct RestorationReport {
  std::vector<IterationReport> iterations;
  double input_psnr_db = 0.0;  // degraded (or interpolated) input, NaN without a reference
  /// CSV: iteration,total_energy,psnr_db,cluster_occupancy_json
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct Restoration {
  Image image;
  RestorationReport report;
  ModelSet models;  // final models (last region processed for multi-region runs)
};

/// Observed pixels are marked by the mask operator; missing pixels of
/// `degraded` are ignored.
Restoration inpaint(const Image& degraded, const DegradationOperator& mask, const TaskConfig& config,
                    const Image* reference = nullptr);

/// Fine image of size factor·width × factor·height.
Restoration zoom(const Image& low_res, int factor, const TaskConfig& config,
                 const Image* reference = nullptr);

Restoration deblur(const Image& blurred, const Kernel& kernel, double noise_sigma,
                   const TaskConfig& config, const Image* reference = nullptr);

/// Cubic-spline interpolation followed by deblurring with a Gaussian
/// σ_G kernel truncated to 5×5.
Restoration zoom_deblur(const Image& low_res, double sigma_g, int factor, const TaskConfig& config,
                        const Image* reference = nullptr);

/// U = Id; no write-back.
Restoration denoise(const Image& noisy, const TaskConfig& config, const Image* reference = nullptr);

double default_sigma(Task task, double noise_sigma = 0.0);
int default_patch_side(int channels, double keep_ratio = 1.0);

/// The kernel zooming-deblurring deconvolves.
Kernel zoom_deblur_kernel(double sigma_g);

}  // namespace ple
