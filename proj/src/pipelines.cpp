#include "ple/pipelines.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <utility>

#include "ple/errors.hpp"
#include "ple/interpolation.hpp"
#include "ple/patches.hpp"

namespace ple {

std::string RestorationReport::csv() const {
  std::string out = "iteration,total_energy,psnr_db,cluster_occupancy_json\n";
  char buf[96];
  for (const auto& it : iterations) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.6f,\"[", it.iteration, it.total_energy, it.psnr_db);
    out += buf;
    for (std::size_t k = 0; k < it.occupancy.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(it.occupancy[k]);
    }
    out += "]\"\n";
  }
  return out;
}

void RestorationReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << csv();
  if (!f) throw Error("failed writing " + path.string());
}

double default_sigma(Task task, double noise_sigma) {
  switch (task) {
    case Task::Deblur:
      return noise_sigma;
    case Task::ZoomDeblur:
      return 1.0;
    default:
      return 3.0;
  }
}

int default_patch_side(int channels, double keep_ratio) {
  if (channels == 3) return 6;
  return keep_ratio <= 0.2 ? 12 : 8;
}

Kernel zoom_deblur_kernel(double sigma_g) { return Kernel::gaussian(sigma_g, 5); }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RegionRun {
  std::vector<Image> iterations;
  std::vector<IterationTrace> trace;
  ModelSet models;
};

// Per-iteration full-image estimates and summed traces.
struct Run {
  std::vector<Image> iterations;
  std::vector<IterationTrace> trace;
  ModelSet models;
};

using RegionFn = std::function<RegionRun(const Rect&, std::size_t)>;

Run run_regions(int width, int height, int channels, int region_side, int patch_side,
                const RegionFn& fn) {
  if (width < patch_side || height < patch_side)
    throw InvalidArgument("image smaller than the patch side");
  RegionPlan plan = plan_regions(width, height, std::max(region_side, patch_side));
  // Clipped border regions narrower than a patch grow back inwards.
  for (Rect& r : plan.regions) {
    if (r.height < patch_side) {
      r.row = height - patch_side;
      r.height = patch_side;
    }
    if (r.width < patch_side) {
      r.col = width - patch_side;
      r.width = patch_side;
    }
  }

  std::vector<RegionRun> runs;
  runs.reserve(plan.regions.size());
  for (std::size_t i = 0; i < plan.regions.size(); ++i) {
    runs.push_back(fn(plan.regions[i], i));
    if (runs.back().iterations.size() != runs.front().iterations.size())
      throw Error("regions ran different iteration counts");
  }

  Run out;
  const std::size_t iterations = runs.front().iterations.size();
  for (std::size_t t = 0; t < iterations; ++t) {
    std::vector<Image> images;
    IterationTrace trace = runs.front().trace[t];
    trace.total_energy = 0.0;
    std::fill(trace.occupancy.begin(), trace.occupancy.end(), 0);
    for (auto& run : runs) {
      images.push_back(std::move(run.iterations[t]));
      trace.total_energy += run.trace[t].total_energy;
      for (std::size_t k = 0; k < trace.occupancy.size(); ++k) trace.occupancy[k] += run.trace[t].occupancy[k];
    }
    out.iterations.push_back(assemble_regions(plan, images, {width, height, channels}));
    out.trace.push_back(std::move(trace));
  }
  out.models = std::move(runs.back().models);
  return out;
}

struct PatchGrid {
  std::vector<std::pair<int, int>> origins;
};

PatchGrid patch_grid(int height, int width, int side, int stride) {
  PatchGrid g;
  for (int r : patch_offsets(height, side, stride))
    for (int c : patch_offsets(width, side, stride)) g.origins.emplace_back(r, c);
  return g;
}

// Records one aggregated image per E-step.
class Recorder {
 public:
  Recorder(const PatchGrid& grid, ImageShape shape, int side, int offset = 0, int support = 0)
      : grid_(grid), shape_(shape), side_(side), offset_(offset), support_(support == 0 ? side : support) {}

  IterationCallback callback(RegionRun& run, int first_iteration = 1) const {
    return [this, &run, first_iteration](int t, const EStepResult& e) {
      run.iterations.push_back(aggregate(e.estimates));
      run.trace.push_back({t + first_iteration - 1, e.total_energy, e.assignment.occupancy()});
    };
  }

  Image aggregate(const std::vector<Eigen::VectorXd>& estimates) const {
    PatchAccumulator acc(shape_);
    const int n = side_ * side_;
    const int ext = support_;
    Eigen::VectorXd inner(n * shape_.channels);
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto [r, c] = grid_.origins[i];
      if (ext == side_) {
        acc.add(estimates[i], r, c, side_);
        continue;
      }
      // Keep Ω, drop the extended border.
      for (int ch = 0; ch < shape_.channels; ++ch)
        for (int a = 0; a < side_; ++a)
          for (int b = 0; b < side_; ++b)
            inner[ch * n + a * side_ + b] = estimates[i][ch * ext * ext + (a + offset_) * ext + b + offset_];
      acc.add(inner, r, c, side_);
    }
    return acc.mean();
  }

 private:
  const PatchGrid& grid_;
  ImageShape shape_;
  int side_;
  int offset_;
  int support_;
};

ModelSet lift_models(const ModelSet& gray, int channels) {
  ModelSet out;
  for (const auto& m : gray.models) out.models.push_back(m.lifted(channels));
  return out;
}

// Random start: first estimates are the observations, clusters uniform.
ModelSet random_start(const PatchSet& set, const ModelSet& prior, const TaskConfig& config,
                      std::size_t region) {
  const Assignment a = random_assignment(set.size(), static_cast<int>(prior.models.size()),
                                         config.seed + 0x9e3779b97f4a7c15ULL * (region + 1));
  return m_step(set.observations, a, config.em.epsilon, prior);
}

// Inpainting, zooming and denoising: diagonal 0/1 patch operators.
struct DiagonalTask {
  const Image& observed;             // zero at missing pixels
  const std::vector<std::uint8_t>& known;  // per pixel
  bool identity = false;
  int factor = 0;  // zooming: regular grid, operators shared per phase
  int side = 8;
  const ModelSet& gray_models;
  const TaskConfig& config;
  EmConfig em;

  PatchOperatorMatrix patch_op(const Rect& rect, int r, int c) const {
    const int n = side * side;
    if (identity) return restrict_to_patch(DegradationOperator::identity(side, side), 0, 0, side);
    if (factor > 0)
      return restrict_to_patch(DegradationOperator::subsample(observed.width(), observed.height(), factor),
                               rect.row + r, rect.col + c, side);
    Eigen::VectorXd d(n);
    for (int a = 0; a < side; ++a)
      for (int b = 0; b < side; ++b)
        d[a * side + b] =
            known[static_cast<std::size_t>(rect.row + r + a) * observed.width() + rect.col + c + b] ? 1.0 : 0.0;
    return PatchOperatorMatrix::from_diagonal(std::move(d), false, 0);
  }

  RegionRun operator()(const Rect& rect, std::size_t index) const {
    const Image region = observed.crop(rect.row, rect.col, rect.height, rect.width);
    const int channels = observed.channels();
    const PatchGrid grid = patch_grid(rect.height, rect.width, side, em.stride);
    const Recorder recorder(grid, {rect.width, rect.height, channels}, side);

    std::vector<Image> planes;
    for (int ch = 0; ch < channels; ++ch) planes.push_back(region.channel(ch));

    // Gray sets per channel, one operator each patch (or one shared identity).
    std::vector<PatchSet> sets(static_cast<std::size_t>(channels));
    PatchSet joint;
    for (std::size_t i = 0; i < grid.origins.size(); ++i) {
      const auto [r, c] = grid.origins[i];
      PatchOperatorMatrix op = patch_op(rect, r, c);
      Eigen::VectorXd stacked(side * side * channels);
      for (int ch = 0; ch < channels; ++ch) {
        Eigen::VectorXd y = read_patch(planes[static_cast<std::size_t>(ch)], r, c, side);
        stacked.segment(ch * side * side, side * side) = y;
        auto& set = sets[static_cast<std::size_t>(ch)];
        if (identity && !set.operators.empty())
          set.add_shared(std::move(y), 0);
        else
          set.add(std::move(y), op);
      }
      if (channels > 1) {
        if (identity && !joint.operators.empty())
          joint.add_shared(std::move(stacked), 0);
        else
          joint.add(std::move(stacked), op.block_diagonal(channels));
      }
    }

    RegionRun run;
    if (channels == 1) {
      ModelSet start = config.random_init ? random_start(sets[0], gray_models, config, index) : gray_models;
      EmResult r = map_em(sets[0], start, em, recorder.callback(run));
      run.models = std::move(r.models);
      return run;
    }

    const ModelSet lifted = lift_models(gray_models, channels);
    if (config.random_init) {
      EmResult r = map_em(joint, random_start(joint, lifted, config, index), em, recorder.callback(run));
      run.models = std::move(r.models);
      return run;
    }
    // Iteration 1 on gray patches with one selection across channels.
    EStepResult first = e_step_joint(sets, gray_models, em.sigma);
    recorder.callback(run)(1, first);
    ModelSet models = m_step(first.estimates, first.assignment, em.epsilon, lifted);
    if (em.iterations > 1) {
      EmConfig rest = em;
      rest.iterations = em.iterations - 1;
      EmResult r = map_em(joint, models, rest, recorder.callback(run, 2));
      models = std::move(r.models);
    }
    run.models = std::move(models);
    return run;
  }
};

struct DeblurTask {
  const Image& blurred;  // one channel
  const Kernel& kernel;
  int side = 8;
  int margin = 2;
  const ModelSet& models;
  const TaskConfig& config;
  EmConfig em;

  RegionRun operator()(const Rect& rect, std::size_t index) const {
    const int m = margin;
    const int ext = side + 2 * m;
    // Region plus margin; pixels beyond the image are mirrored.
    Image padded(rect.width + 2 * m, rect.height + 2 * m, 1);
    for (int r = 0; r < padded.height(); ++r)
      for (int c = 0; c < padded.width(); ++c)
        padded.at(r, c) = blurred.at(mirror_index(rect.row - m + r, blurred.height()),
                                     mirror_index(rect.col - m + c, blurred.width()));
    const auto op = DegradationOperator::masked_convolution(padded.width(), padded.height(), kernel, m);
    const PatchGrid grid = patch_grid(rect.height, rect.width, side, em.stride);
    PatchSet set;
    set.operators.push_back(restrict_to_patch(op, m, m, side));
    for (const auto& [r, c] : grid.origins) set.add_shared(read_patch(padded, r, c, ext), 0);

    const Recorder recorder(grid, {rect.width, rect.height, 1}, side, m, ext);
    RegionRun run;
    ModelSet start = config.random_init ? random_start(set, models, config, index) : models;
    EmResult r = map_em(set, start, em, recorder.callback(run));
    run.models = std::move(r.models);
    return run;
  }
};

Restoration finish(Run run, const Image& input, const Image* reference,
                   const Image* known_values = nullptr, const std::vector<std::uint8_t>* known = nullptr) {
  Restoration out;
  out.report.input_psnr_db = reference ? psnr(input, *reference) : kNaN;
  for (std::size_t t = 0; t < run.iterations.size(); ++t) {
    Image& img = run.iterations[t];
    if (known_values) {
      const int ch = img.channels();
      for (std::size_t p = 0; p < known->size(); ++p)
        if ((*known)[p])
          for (int c = 0; c < ch; ++c) img.data()[p * ch + c] = known_values->data()[p * ch + c];
    }
    IterationReport rep;
    rep.iteration = run.trace[t].iteration;
    rep.total_energy = run.trace[t].total_energy;
    rep.occupancy = run.trace[t].occupancy;
    rep.psnr_db = reference ? psnr(img, *reference) : kNaN;
    out.report.iterations.push_back(std::move(rep));
  }
  out.image = std::move(run.iterations.back());
  out.models = std::move(run.models);
  return out;
}

void check_reference(const Image& img, const Image* reference) {
  if (reference && !reference->same_shape(img))
    throw DimensionMismatch("reference image shape differs from the restored image");
}

void check_channels(const Image& img) {
  if (img.empty()) throw InvalidArgument("empty image");
  if (img.channels() != 1 && img.channels() != 3) throw InvalidArgument("images must have 1 or 3 channels");
}

EmConfig em_for(const TaskConfig& config, double sigma) {
  EmConfig em = config.em;
  em.sigma = sigma;
  if (em.iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (em.stride < 1) throw InvalidArgument("stride must be >= 1");
  if (!(em.epsilon > 0)) throw InvalidArgument("epsilon must be > 0");
  if (!(sigma >= 0)) throw InvalidArgument("sigma must be >= 0");
  return em;
}

ModelSet models_for(const TaskConfig& config, int support_side, bool hierarchical, InitMode mode) {
  if (config.models) {
    if (config.models->models.empty() || config.models->models.front().dim() != support_side * support_side)
      throw DimensionMismatch("initial models do not match the patch support");
    return *config.models;
  }
  InitConfig init;
  init.num_models = config.em.num_models;
  init.patch_side = support_side;
  init.positions = config.em.positions;
  init.hierarchical = hierarchical;
  init.epsilon = config.em.epsilon;
  init.edge_blur = config.edge_blur;
  return init_models(init, mode);
}

Restoration restore_diagonal(const Image& observed, const std::vector<std::uint8_t>& known, bool identity,
                             int factor, int side, double sigma, const TaskConfig& config, const Image& input,
                             const Image* reference, bool write_back) {
  check_reference(observed, reference);
  const EmConfig em = em_for(config, sigma);
  const ModelSet models = models_for(config, side, false, InitMode::DirectionalOnly);
  const DiagonalTask task{observed, known, identity, factor, side, models, config, em};
  Run run = run_regions(observed.width(), observed.height(), observed.channels(), config.region_side, side,
                        [&task](const Rect& r, std::size_t i) { return task(r, i); });
  if (write_back) return finish(std::move(run), input, reference, &observed, &known);
  return finish(std::move(run), input, reference);
}

}  // namespace

Restoration inpaint(const Image& degraded, const DegradationOperator& mask, const TaskConfig& config,
                    const Image* reference) {
  check_channels(degraded);
  if (mask.width() != degraded.width() || mask.height() != degraded.height())
    throw DimensionMismatch("mask size differs from the image");
  std::vector<std::uint8_t> known(static_cast<std::size_t>(degraded.width()) * degraded.height());
  std::size_t kept = 0;
  for (int r = 0; r < degraded.height(); ++r)
    for (int c = 0; c < degraded.width(); ++c) {
      const bool k = mask.observed(r, c);
      known[static_cast<std::size_t>(r) * degraded.width() + c] = k;
      kept += k;
    }
  if (kept == 0) throw InvalidArgument("mask observes no pixel");
  Image observed = degraded;
  for (std::size_t p = 0; p < known.size(); ++p)
    if (!known[p])
      for (int c = 0; c < degraded.channels(); ++c) observed.data()[p * degraded.channels() + c] = 0.0;

  const double keep = static_cast<double>(kept) / known.size();
  const int side = config.patch_side.value_or(default_patch_side(degraded.channels(), keep));
  return restore_diagonal(observed, known, false, 0, side, config.sigma.value_or(default_sigma(Task::Inpaint)),
                          config, observed, reference, true);
}

Restoration zoom(const Image& low_res, int factor, const TaskConfig& config, const Image* reference) {
  check_channels(low_res);
  if (factor < 1) throw InvalidArgument("zoom factor must be >= 1");
  const int w = low_res.width() * factor;
  const int h = low_res.height() * factor;
  if (factor == 1) {
    check_reference(low_res, reference);
    Restoration out;
    out.image = low_res;
    out.report.input_psnr_db = reference ? psnr(low_res, *reference) : kNaN;
    return out;
  }
  const Image observed = embed_on_grid(low_res, factor, w, h);
  std::vector<std::uint8_t> known(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) known[static_cast<std::size_t>(r) * w + c] = r % factor == 0 && c % factor == 0;
  const int side = config.patch_side.value_or(low_res.channels() == 3 ? 6 : 8);
  return restore_diagonal(observed, known, false, factor, side, config.sigma.value_or(default_sigma(Task::Zoom)), config,
                          observed, reference, true);
}

Restoration denoise(const Image& noisy, const TaskConfig& config, const Image* reference) {
  check_channels(noisy);
  std::vector<std::uint8_t> known(static_cast<std::size_t>(noisy.width()) * noisy.height(), 1);
  const int side = config.patch_side.value_or(default_patch_side(noisy.channels()));
  return restore_diagonal(noisy, known, true, 0, side, config.sigma.value_or(default_sigma(Task::Denoise)), config,
                          noisy, reference, false);
}

Restoration deblur(const Image& blurred, const Kernel& kernel, double noise_sigma, const TaskConfig& config,
                   const Image* reference) {
  check_channels(blurred);
  check_reference(blurred, reference);
  if (kernel.radius() > config.margin)
    throw InvalidArgument("kernel radius " + std::to_string(kernel.radius()) + " exceeds the margin " +
                          std::to_string(config.margin));
  const int side = config.patch_side.value_or(8);
  const int support = side + 2 * config.margin;
  const EmConfig em = em_for(config, config.sigma.value_or(default_sigma(Task::Deblur, noise_sigma)));
  const bool hierarchical = config.init == InitMode::Directional && !config.random_init;
  const ModelSet models = models_for(config, support, hierarchical, hierarchical ? InitMode::Directional
                                                                               : InitMode::DirectionalOnly);

  // Color images are deblurred channel by channel.
  Run total;
  for (int ch = 0; ch < blurred.channels(); ++ch) {
    const Image plane = blurred.channel(ch);
    const DeblurTask task{plane, kernel, side, config.margin, models, config, em};
    Run run = run_regions(plane.width(), plane.height(), 1, config.region_side, side,
                          [&task](const Rect& r, std::size_t i) { return task(r, i); });
    if (ch == 0) {
      total.trace = run.trace;
      for (auto& img : run.iterations) {
        Image full(blurred.width(), blurred.height(), blurred.channels());
        full.set_channel(0, img);
        total.iterations.push_back(std::move(full));
      }
    } else {
      for (std::size_t t = 0; t < run.iterations.size(); ++t) {
        total.iterations[t].set_channel(ch, run.iterations[t]);
        total.trace[t].total_energy += run.trace[t].total_energy;
        for (std::size_t k = 0; k < total.trace[t].occupancy.size(); ++k)
          total.trace[t].occupancy[k] += run.trace[t].occupancy[k];
      }
    }
    total.models = std::move(run.models);
  }
  return finish(std::move(total), blurred, reference);
}

Restoration zoom_deblur(const Image& low_res, double sigma_g, int factor, const TaskConfig& config,
                        const Image* reference) {
  check_channels(low_res);
  if (factor < 1) throw InvalidArgument("zoom factor must be >= 1");
  if (sigma_g < 0) throw InvalidArgument("sigma_G must be >= 0");
  const Image interpolated = zoom_spline(low_res, factor, low_res.width() * factor, low_res.height() * factor);
  TaskConfig cfg = config;
  cfg.sigma = config.sigma.value_or(default_sigma(Task::ZoomDeblur));
  return deblur(interpolated, zoom_deblur_kernel(sigma_g), *cfg.sigma, cfg, reference);
}

}  // namespace ple
