#pragma once

#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nplmmd/experiments.hpp"

namespace nplmmd::cli {

/// Invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "NPLMMD_OUTPUT_DIR";

struct RunConfig {
  ExperimentConfig experiment;
  std::string output_dir;
  std::string parameter;       // sweep: alpha, T or lengthscale
  std::vector<double> grid;    // sweep values, or bound-check sample sizes
  std::size_t runs = 10;       // bound-check repetitions per n
  std::size_t model_mmd_samples = 0;  // run: 0 skips the model MMD estimate
};

/// Keys accepted in config files and as --key flags.
const std::vector<std::string>& setting_keys();

/// Applies one setting. `where` prefixes error messages, e.g. "run.cfg:3".
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::string& where);

/// Reads a flat `key = value` file ('#' starts a comment) into cfg.
void load_config_file(RunConfig& cfg, const std::string& path);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nplmmd::cli
