#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "selfcheck/app.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitMissingInput = 4;
constexpr int kExitInterrupted = 130;

extern "C" void on_sigint(int) {
  selfcheck::interrupt_requested().store(true);
  // A second Ctrl-C kills the process outright.
  std::signal(SIGINT, SIG_DFL);
}

struct Options {
  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  std::optional<std::string> dataset;
  std::optional<std::string> output_dir;
  std::optional<std::string> replay_dir;
  std::optional<std::string> mode;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::string input;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("-c,--config", opt.config_file, "JSON config file");
  cmd->add_option("-s,--set", opt.overrides,
                  "Override a config key, e.g. --set eval.resamples=200")
      ->allow_extra_args(false);
  cmd->add_option("--dataset", opt.dataset, "Dataset JSON-lines file");
  cmd->add_option("-o,--output-dir", opt.output_dir, "Output directory");
  cmd->add_option("-j,--workers", opt.workers, "Concurrent workers");
  cmd->add_flag("-v,--verbose", opt.verbose, "Debug logging");
}

selfcheck::RunConfig resolve(const Options& opt, const std::string& command) {
  // Named flags are sugar for overrides and win over the config file.
  std::vector<std::string> overrides = opt.overrides;
  auto quoted = [](const std::string& s) { return nlohmann::json(s).dump(); };
  if (opt.dataset) overrides.push_back("dataset.path=" + quoted(*opt.dataset));
  if (opt.output_dir) overrides.push_back("output_dir=" + quoted(*opt.output_dir));
  if (opt.replay_dir) overrides.push_back("replay_dir=" + quoted(*opt.replay_dir));
  if (opt.mode) overrides.push_back("checker.mode=" + quoted(*opt.mode));
  if (opt.workers) overrides.push_back("workers=" + std::to_string(*opt.workers));
  if (opt.seed) {
    const std::string key = command == "simulate" ? "simulate.seed" : "eval.seed";
    overrides.push_back(key + "=" + std::to_string(*opt.seed));
  }
  std::optional<fs::path> file;
  if (opt.config_file) file = *opt.config_file;
  return selfcheck::resolve_config(file, overrides);
}

struct Backends {
  std::unique_ptr<selfcheck::Backend> inner;
  std::unique_ptr<selfcheck::Backend> outer;

  selfcheck::Backend& get() { return outer ? *outer : *inner; }
};

Backends make_backend(const selfcheck::RunConfig& config) {
  Backends b;
  if (config.replay_dir) {
    b.inner = std::make_unique<selfcheck::ReplayBackend>(*config.replay_dir);
    return b;
  }
  b.inner = std::make_unique<selfcheck::HttpBackend>(config.provider);
  const fs::path cache = config.cache_dir ? fs::path(*config.cache_dir)
                                          : fs::path(config.output_dir) / "cache";
  b.outer = std::make_unique<selfcheck::CachingBackend>(*b.inner, cache);
  return b;
}

std::string input_or(const Options& opt, const selfcheck::RunConfig& config,
                     const char* default_name) {
  if (!opt.input.empty()) return opt.input;
  return (fs::path(config.output_dir) / default_name).string();
}

int run(const std::string& command, const Options& opt) {
  const selfcheck::RunConfig config = resolve(opt, command);
  fs::path out;
  if (command == "generate") {
    Backends b = make_backend(config);
    out = selfcheck::cmd_generate(config, b.get());
  } else if (command == "check") {
    Backends b = make_backend(config);
    out = selfcheck::cmd_check(config, b.get(), input_or(opt, config, "solutions.jsonl"));
  } else if (command == "vote") {
    out = selfcheck::cmd_vote(config, input_or(opt, config, "checked.jsonl"));
  } else if (command == "eval") {
    out = selfcheck::cmd_eval(config, input_or(opt, config, "checked.jsonl"));
  } else if (command == "simulate") {
    out = selfcheck::cmd_simulate(config);
  } else if (command == "grid-search") {
    out = selfcheck::cmd_grid_search(config, input_or(opt, config, "checked.jsonl"));
  }
  spdlog::info("wrote {}", out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Step-by-step self-checking of sampled math solutions"};
  app.require_subcommand(1);
  Options opt;

  auto* generate = app.add_subcommand("generate", "Sample solutions for every question");
  auto* check = app.add_subcommand("check", "Check every step of every solution");
  auto* vote = app.add_subcommand("vote", "Weighted and majority votes, threshold sweep");
  auto* eval = app.add_subcommand("eval", "Accuracy vs. number of samples");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo voting simulation");
  auto* grid = app.add_subcommand("grid-search", "Pick integration weights on labeled data");
  for (CLI::App* cmd : {generate, check, vote, eval, simulate, grid}) add_common(cmd, opt);
  for (CLI::App* cmd : {generate, check}) {
    cmd->add_option("--replay-dir", opt.replay_dir, "Serve completions from recorded files");
  }
  check->add_option("--mode", opt.mode,
                    "selfcheck, global, single_stage, regen_verify_zero_shot, regen_verify_one_shot");
  check->add_option("input", opt.input, "Solutions file (default <output-dir>/solutions.jsonl)");
  for (CLI::App* cmd : {vote, eval, grid}) {
    cmd->add_option("input", opt.input, "Checked file (default <output-dir>/checked.jsonl)");
  }
  for (CLI::App* cmd : {eval, simulate}) {
    cmd->add_option("--seed", opt.seed, "Random seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  auto logger = spdlog::stderr_color_mt("selfcheck");
  spdlog::set_default_logger(logger);
  spdlog::set_level(opt.verbose ? spdlog::level::debug : spdlog::level::info);
  std::signal(SIGINT, on_sigint);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opt);
  } catch (const selfcheck::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const selfcheck::MissingInput& e) {
    spdlog::error("missing input: {}", e.what());
    return kExitMissingInput;
  } catch (const selfcheck::ProviderError& e) {
    spdlog::error("provider failure: {}", e.what());
    return kExitProvider;
  } catch (const selfcheck::ProviderFailure& e) {
    spdlog::error("provider failure at step {}: {}", e.step_index, e.what());
    return kExitProvider;
  } catch (const selfcheck::Interrupted& e) {
    spdlog::warn("{}", e.what());
    return kExitInterrupted;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
