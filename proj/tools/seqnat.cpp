// Command-line driver: `seqnat <command> --config FILE [--seed N] [--threads N] [--force]`.

#include <iostream>

#include "CLI11.hpp"
#include "seqnat/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sequence-level training for non-autoregressive translation models", "seqnat"};
  app.set_version_flag("--version", std::string(seqnat::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool force = false;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "generate a synthetic parallel corpus"},
      {"train", "run a staged training schedule"},
      {"eval", "decode a split and score it"},
      {"estimator-bench", "compare gradient estimator variance"},
      {"complexity-bench", "count reward calls against the closed forms"},
      {"correlate", "correlate CE and BoN losses with GLEU"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "run config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "override the worker count")->check(CLI::PositiveNumber);
    sub->add_flag("--force", force, "overwrite existing outputs");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const seqnat::RunConfig cfg = seqnat::RunConfig::load(config_path);
    seqnat::CommandOptions opts{seed, threads, force};
    seqnat::run_command(app.get_subcommands().front()->get_name(), cfg, opts);
  } catch (const std::exception& e) {
    std::cerr << seqnat::describe_error(e) << '\n';
    return 1;
  }
  return 0;
}
