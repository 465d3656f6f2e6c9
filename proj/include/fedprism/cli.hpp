#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedprism/harness.hpp"

namespace fedprism::cli {

enum class SweepKind { Alpha, InferenceWeight };

// Everything one config file describes.
struct CliConfig {
    ExperimentConfig experiment;
    std::optional<std::filesystem::path> output_dir;  // resolved against the config's directory
    std::vector<std::uint64_t> seeds;                 // empty -> experiment.seed
    std::vector<Algorithm> compare_algorithms;
    bool has_compare = false;
    SweepKind sweep_kind = SweepKind::Alpha;
    std::vector<double> sweep_values;
    bool has_sweep = false;
};

// Reads a YAML config, applies dotted key=value overrides, rejects unknown
// keys. Throws ConfigError (exit code 2 at the CLI).
CliConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

struct CommandOptions {
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out;
    std::vector<std::string> overrides;
    std::optional<std::string> seeds;  // "1,2,3"
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

// compare runs this many seeds (config seed, seed+1, ...) unless given a list
inline constexpr std::size_t kDefaultCompareSeeds = 3;

int cmd_run(const CommandOptions& opts);
int cmd_compare(const CommandOptions& opts);
int cmd_sweep(const CommandOptions& opts);

// Output directory precedence: --out, config output_dir, $FEDPRISM_OUT, ./fedprism_out.
std::filesystem::path resolve_output_dir(const CommandOptions& opts, const CliConfig& cfg);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Full command line entry point (subcommands run | compare | sweep).
int main(int argc, char** argv);

}  // namespace fedprism::cli
