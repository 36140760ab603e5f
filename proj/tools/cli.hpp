#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ple/pipelines.hpp"

namespace ple::cli {

struct RunSpec {
  std::string command;  // degrade, inpaint, zoom, deblur, zoom-deblur, dump-bases, eval
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output;
  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> mask_path;
  std::optional<std::filesystem::path> mask_out;
  std::optional<std::filesystem::path> init_models;

  std::string mode = "mask";  // degrade: mask, zoom, blur, zoom-blur
  std::string task = "inpaint";  // eval
  double keep = 0.5;
  std::uint64_t seed = 0;
  int factor = 2;
  std::string kernel = "gauss:1.0:5";
  double noise = 0.0;
  double sigma_g = 1.0;
  int threads = 0;
  bool hierarchical = false;  // dump-bases
  TaskConfig config;
};

struct ParseResult {
  std::optional<RunSpec> spec;  // empty when help was printed or parsing failed
  int exit_code = 0;
};

/// Help goes to `out`, usage errors to `err` (exit code 2).
ParseResult parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "gauss:STD:SIDE", "box:SIDE", or a kernel text file.
Kernel parse_kernel(const std::string& text);

/// Exit 0 on success, 1 on failure (message on `err`).
int run(const RunSpec& spec, std::ostream& out, std::ostream& err);

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ple::cli
