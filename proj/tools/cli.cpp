#include "cli.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "ple/errors.hpp"
#include "ple/init_bases.hpp"
#include "ple/interpolation.hpp"

namespace ple::cli {

namespace {

const std::vector<std::string> kTasks{"inpaint", "zoom", "deblur", "zoom-deblur"};

// Flags shared by every restoration subcommand (and eval).
void add_restoration_options(CLI::App* app, RunSpec& spec, std::optional<double>& sigma, int& patch) {
  auto& cfg = spec.config;
  app->add_option("--reference", spec.reference, "Clean image; enables per-iteration PSNR in the report");
  app->add_option("--report", spec.report, "Write the per-iteration report CSV here");
  app->add_option("--sigma", sigma,
                  "Noise std assumed by the estimator [task default: 3 inpaint/zoom, --noise for deblur, 1 zoom-deblur]");
  app->add_option("--epsilon", cfg.em.epsilon, "Covariance regularization added to every refit")
      ->check(CLI::PositiveNumber);
  app->add_option("--iterations", cfg.em.iterations, "MAP-EM iterations")->check(CLI::Range(1, 1000));
  app->add_option("--stride", cfg.em.stride, "Patch stride")->check(CLI::Range(1, 1024));
  app->add_option("--region", cfg.region_side, "Region side; regions overlap by half")->check(CLI::Range(2, 1 << 20));
  app->add_option("--patch", patch, "Patch side, 0 = task default (8 gray, 12 when keep <= 0.2, 6 color)")
      ->check(CLI::Range(0, 64));
  app->add_option("--num-models", cfg.em.num_models, "Models: directions + 1 DCT")->check(CLI::Range(1, 1000));
  app->add_option("--edge-blur", cfg.edge_blur, "Gaussian std of the synthetic edges behind the initial bases, 0 = sharp")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--threads", spec.threads, "Worker threads, 0 = OpenMP default")->check(CLI::NonNegativeNumber);
  app->add_option("--init-models", spec.init_models, "Start from a saved model set instead of synthetic bases")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", spec.seed, "Seed for masks, noise and random initialization");
  app->add_flag("--random-init", cfg.random_init,
                "Testing only: observations as first estimates with a uniform random clustering");
}

void add_task_parameters(CLI::App* app, RunSpec& spec, const std::string& task, bool& directional_only) {
  if (task == "inpaint" || task == "eval") {
    app->add_option("--keep", spec.keep, "Observed pixel ratio of the random mask")->check(CLI::Range(0.0, 1.0));
  }
  if (task == "inpaint") app->add_option("--mask", spec.mask_path, "Mask PGM (255 observed, 0 missing)")->check(CLI::ExistingFile);
  if (task == "zoom" || task == "zoom-deblur" || task == "eval")
    app->add_option("--factor", spec.factor, "Zoom factor per axis")->check(CLI::Range(1, 16));
  if (task == "deblur" || task == "eval") {
    app->add_option("--kernel", spec.kernel, "Blur kernel: gauss:STD:SIDE, box:SIDE or a kernel file");
    app->add_option("--noise", spec.noise, "Noise std sigma_n of the observation")->check(CLI::NonNegativeNumber);
  }
  if (task == "zoom-deblur" || task == "eval")
    app->add_option("--sigma-g", spec.sigma_g, "Std of the Gaussian anti-aliasing kernel (5x5)")
        ->check(CLI::NonNegativeNumber);
  if (task == "deblur" || task == "zoom-deblur" || task == "eval") {
    app->add_option("--positions", spec.config.em.positions, "Position models per direction")
        ->check(CLI::Range(1, 1000));
    app->add_flag("--directional-only", directional_only,
                  "Directional and DCT models only, without position models");
  }
}

}  // namespace

Kernel parse_kernel(const std::string& text) {
  auto fields = [&text] {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) out.push_back(item);
    return out;
  }();
  try {
    if (fields.size() == 3 && fields[0] == "gauss") return Kernel::gaussian(std::stod(fields[1]), std::stoi(fields[2]));
    if (fields.size() == 2 && fields[0] == "box") return Kernel::box(std::stoi(fields[1]));
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad kernel spec '" + text + "'");
  }
  if (!fields.empty() && (fields[0] == "gauss" || fields[0] == "box"))
    throw InvalidArgument("bad kernel spec '" + text + "'");
  return Kernel::read_text(text);
}

ParseResult parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunSpec spec;
  std::optional<double> sigma;
  int patch = 0;
  bool directional_only = false;
  std::filesystem::path input;

  CLI::App app{"Piecewise linear estimation: Gaussian-mixture MAP-EM image restoration", "ple"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  auto* degrade = app.add_subcommand("degrade", "Generate a degraded observation from a clean image");
  degrade->add_option("--mode", spec.mode, "mask | zoom | blur | zoom-blur")
      ->check(CLI::IsMember({"mask", "zoom", "blur", "zoom-blur"}));
  degrade->add_option("--keep", spec.keep, "Observed pixel ratio (mask)")->check(CLI::Range(0.0, 1.0));
  degrade->add_option("--seed", spec.seed, "Seed for the mask and the noise");
  degrade->add_option("--factor", spec.factor, "Subsampling factor (zoom, zoom-blur)")->check(CLI::Range(1, 16));
  degrade->add_option("--kernel", spec.kernel, "Blur kernel (blur)");
  degrade->add_option("--noise", spec.noise, "Noise std on observed pixels")->check(CLI::NonNegativeNumber);
  degrade->add_option("--sigma-g", spec.sigma_g, "Gaussian std of the 5x5 pre-filter (zoom-blur)")
      ->check(CLI::NonNegativeNumber);
  degrade->add_option("--mask-out", spec.mask_out, "Also write the mask as PGM (mask)");

  std::vector<CLI::App*> tasks;
  for (const auto& name : kTasks) {
    const std::string what = name == "inpaint"   ? "Fill missing pixels"
                             : name == "zoom"    ? "Interpolate a low-resolution image"
                             : name == "deblur"  ? "Deconvolve a blurred, noisy image"
                                                 : "Spline zoom followed by deblurring";
    auto* sub = app.add_subcommand(name, what);
    add_restoration_options(sub, spec, sigma, patch);
    add_task_parameters(sub, spec, name, directional_only);
    tasks.push_back(sub);
  }
  for (auto* sub : tasks) {
    sub->add_option("input", input, "Degraded input image")->required()->check(CLI::ExistingFile);
    sub->add_option("output", spec.output, "Restored image")->required();
  }

  degrade->add_option("input", input, "Clean image")->required()->check(CLI::ExistingFile);
  degrade->add_option("output", spec.output, "Degraded image")->required();

  auto* dump = app.add_subcommand("dump-bases", "Write the initial model set and atom images");
  dump->add_option("--patch", spec.config.em.patch_side, "Model support side")->check(CLI::Range(2, 64));
  dump->add_option("--num-models", spec.config.em.num_models, "Models: directions + 1 DCT")->check(CLI::Range(1, 1000));
  dump->add_option("--positions", spec.config.em.positions, "Position models per direction")->check(CLI::Range(1, 1000));
  dump->add_option("--epsilon", spec.config.em.epsilon, "Eigenvalue floor")->check(CLI::PositiveNumber);
  dump->add_option("--edge-blur", spec.config.edge_blur, "Gaussian std of the synthetic edges, 0 = sharp")
      ->check(CLI::NonNegativeNumber);
  dump->add_flag("--hierarchical", spec.hierarchical, "Include position models");
  dump->add_option("output", spec.output, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Degrade, restore and score every clean image; prints a summary CSV");
  eval->add_option("--task", spec.task, "inpaint | zoom | deblur | zoom-deblur")->check(CLI::IsMember(kTasks));
  add_restoration_options(eval, spec, sigma, patch);
  add_task_parameters(eval, spec, "eval", directional_only);
  eval->remove_option(eval->get_option("--reference"));
  eval->remove_option(eval->get_option("--report"));
  eval->add_option("--output", spec.report, "Write the summary CSV here instead of stdout");
  eval->add_option("images", spec.inputs, "Clean images")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return {std::nullopt, 0};
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return {std::nullopt, 0};
  } catch (const CLI::ParseError& e) {
    // Subcommand help arrives as CallForHelp thrown from the subcommand.
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return {std::nullopt, 2};
  }

  for (auto* sub : app.get_subcommands()) spec.command = sub->get_name();
  if (!input.empty()) spec.inputs = {input};
  if (spec.command == "dump-bases") spec.config.patch_side = spec.config.em.patch_side;
  if (spec.command != "dump-bases") {
    spec.config.sigma = sigma;
    if (patch > 0) spec.config.patch_side = patch;
    spec.config.seed = spec.seed;
    if (directional_only) spec.config.init = InitMode::DirectionalOnly;
  }
  return {spec, 0};
}

namespace {

void write_csv(const std::optional<std::filesystem::path>& path, const std::string& text, std::ostream& out) {
  if (!path) {
    out << text;
    return;
  }
  std::ofstream f(*path, std::ios::binary);
  if (!f) throw Error("cannot open " + path->string() + " for writing");
  f << text;
}

Restoration restore(const RunSpec& spec, const Image& input, const Image* reference) {
  const TaskConfig& cfg = spec.config;
  const std::string& cmd = spec.command == "eval" ? spec.task : spec.command;
  if (cmd == "inpaint") {
    const DegradationOperator mask = spec.mask_path
                                         ? DegradationOperator::mask_from_file(*spec.mask_path)
                                         : DegradationOperator::random_mask(input.width(), input.height(), spec.keep, spec.seed);
    return inpaint(input, mask, cfg, reference);
  }
  if (cmd == "zoom") return zoom(input, spec.factor, cfg, reference);
  if (cmd == "deblur") return deblur(input, parse_kernel(spec.kernel), spec.noise, cfg, reference);
  return zoom_deblur(input, spec.sigma_g, spec.factor, cfg, reference);
}

Image make_degraded(const RunSpec& spec, const std::string& mode, const Image& clean) {
  if (mode == "mask") {
    const auto op = DegradationOperator::random_mask(clean.width(), clean.height(), spec.keep, spec.seed)
                        .with_noise(spec.noise);
    return degrade(op, clean, spec.seed + 1);
  }
  if (mode == "zoom") {
    if (spec.noise > 0) {
      const auto op = DegradationOperator::identity(clean.width(), clean.height()).with_noise(spec.noise);
      return decimate(degrade(op, clean, spec.seed), spec.factor);
    }
    return decimate(clean, spec.factor);
  }
  if (mode == "blur") {
    const auto op = DegradationOperator::convolution(clean.width(), clean.height(), parse_kernel(spec.kernel))
                        .with_noise(spec.noise);
    return degrade(op, clean, spec.seed);
  }
  // zoom-blur
  const auto op = DegradationOperator::convolution(clean.width(), clean.height(), zoom_deblur_kernel(spec.sigma_g))
                      .with_noise(spec.noise);
  return decimate(degrade(op, clean, spec.seed), spec.factor);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int run_eval(const RunSpec& spec, std::ostream& out) {
  static const std::map<std::string, std::string> mode_of{
      {"inpaint", "mask"}, {"zoom", "zoom"}, {"deblur", "blur"}, {"zoom-deblur", "zoom-blur"}};
  std::string csv = "image,input_psnr_db,output_psnr_db,isnr_db\n";
  double sum_in = 0, sum_out = 0;
  for (const auto& path : spec.inputs) {
    const Image clean = read_image(path);
    if ((spec.task == "zoom" || spec.task == "zoom-deblur") &&
        (clean.width() % spec.factor != 0 || clean.height() % spec.factor != 0))
      throw InvalidArgument(path.string() + ": size is not a multiple of the zoom factor");
    const Image degraded = make_degraded(spec, mode_of.at(spec.task), clean);
    const Restoration r = restore(spec, degraded, &clean);
    const double in = r.report.input_psnr_db;
    const double outp = psnr(r.image, clean);
    sum_in += in;
    sum_out += outp;
    csv += path.filename().string() + "," + fmt(in) + "," + fmt(outp) + "," + fmt(outp - in) + "\n";
  }
  const double n = static_cast<double>(spec.inputs.size());
  csv += "Average," + fmt(sum_in / n) + "," + fmt(sum_out / n) + "," + fmt((sum_out - sum_in) / n) + "\n";
  write_csv(spec.report, csv, out);
  return 0;
}

int run_dump(const RunSpec& spec) {
  std::filesystem::create_directories(spec.output);
  InitConfig init;
  init.num_models = spec.config.em.num_models;
  init.patch_side = spec.config.em.patch_side;
  init.positions = spec.config.em.positions;
  init.hierarchical = spec.hierarchical;
  init.epsilon = spec.config.em.epsilon;
  init.edge_blur = spec.config.edge_blur;
  const ModelSet set = init_models(init);
  write_model_set(set, spec.output / "models.plemset");
  char name[64];
  for (std::size_t k = 0; k < set.models.size(); ++k) {
    std::snprintf(name, sizeof name, "model_%02zu.pgm", k);
    write_image(atom_grid(set.models[k], init.patch_side), spec.output / name);
    if (!set.hierarchical()) continue;
    for (std::size_t p = 0; p < set.positions[k].size(); ++p) {
      std::snprintf(name, sizeof name, "model_%02zu_position_%02zu.pgm", k, p);
      write_image(atom_grid(set.positions[k][p], init.patch_side), spec.output / name);
    }
  }
  return 0;
}

}  // namespace

int run(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    if (spec.threads > 0) omp_set_num_threads(spec.threads);
    if (spec.command == "dump-bases") return run_dump(spec);
    if (spec.command == "eval") return run_eval(spec, out);
    const Image input = read_image(spec.inputs.at(0));
    if (spec.command == "degrade") {
      write_image(make_degraded(spec, spec.mode, input), spec.output);
      if (spec.mask_out && spec.mode == "mask") {
        const auto op = DegradationOperator::random_mask(input.width(), input.height(), spec.keep, spec.seed);
        Image bitmap = op.observation_mask();
        for (double& v : bitmap.data()) v *= 255.0;
        write_image(bitmap, *spec.mask_out);
      }
      return 0;
    }
    RunSpec task = spec;
    if (spec.init_models) task.config.models = read_model_set(*spec.init_models);
    std::optional<Image> reference;
    if (spec.reference) reference = read_image(*spec.reference);
    const Restoration r = restore(task, input, reference ? &*reference : nullptr);
    write_image(r.image, spec.output);
    if (spec.report) r.report.write_csv(*spec.report);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const ParseResult parsed = parse_args(argc, argv, out, err);
  if (!parsed.spec) return parsed.exit_code;
  return run(*parsed.spec, out, err);
}

}  // namespace ple::cli
