#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqnat/run_config.hpp"

namespace seqnat {

inline constexpr std::string_view kVersion = "1.0.0";

/// Command-line overrides applied on top of a RunConfig.
struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool force = false;
};

/// Each command writes into <output_dir>/<command>/: the echoed config
/// (config.txt), a manifest (manifest.json) and its declared outputs.
void cmd_gen_data(const RunConfig& cfg, const CommandOptions& opts);
void cmd_train(const RunConfig& cfg, const CommandOptions& opts);
void cmd_eval(const RunConfig& cfg, const CommandOptions& opts);
void cmd_estimator_bench(const RunConfig& cfg, const CommandOptions& opts);
void cmd_complexity_bench(const RunConfig& cfg, const CommandOptions& opts);
void cmd_correlate(const RunConfig& cfg, const CommandOptions& opts);

/// Runs a subcommand by name ("gen-data", "train", "eval", "estimator-bench",
/// "complexity-bench", "correlate").
void run_command(std::string_view name, const RunConfig& cfg, const CommandOptions& opts);

/// Single-line `error: <kind>: <message>` for an in-flight exception.
std::string describe_error(const std::exception& e);

}  // namespace seqnat
