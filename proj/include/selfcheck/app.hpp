#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfcheck/checker.hpp"
#include "selfcheck/errors.hpp"
#include "selfcheck/provider.hpp"
#include "selfcheck/sim.hpp"

namespace selfcheck {

struct DatasetConfig {
  std::optional<std::string> path;
  DatasetKind kind = DatasetKind::numeric;
  std::optional<std::string> name;  // CSV label; defaults to the file stem
};

struct SamplingConfig {
  std::string model = "gpt-3.5-turbo";
  int num_solutions = 10;
  double temperature = 1.0;
  int max_tokens = 1024;
};

struct EvalConfig {
  std::vector<int> n_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int resamples = 100;
  std::uint64_t seed = 0;
  // Threshold sweep for vote/eval reports.
  std::vector<double> thresholds{0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                 0.6, 0.7, 0.8, 0.9, 1.0};
};

struct GridConfig {
  std::vector<double> lambda_neg{0.5, 1.0, 2.0};
  std::vector<double> lambda_zero{0.0, 0.1, 0.3, 0.5, 1.0};
};

struct PopulationConfig {
  bool enabled = false;
  int draws = 40;
  std::int64_t trials_per_question = 200;
  PopulationModel model;
};

struct SimulateConfig {
  AnswerDistribution dist{0.35, 0.45, 3};
  CheckerModel checker;
  std::vector<int> n_values{1, 3, 5, 7, 9, 11, 21, 31, 41, 51};
  std::int64_t trials = 100000;
  std::uint64_t seed = 0;
  PopulationConfig population;
};

struct RunConfig {
  DatasetConfig dataset;
  ProviderConfig provider;
  CheckerConfig checker;
  double threshold = 0.5;  // t used for Acc_c / Acc_w / Acc_m
  std::optional<std::string> templates_dir;
  SamplingConfig sampling;
  EvalConfig eval;
  GridConfig grid_search;
  SimulateConfig simulate;
  std::string output_dir = "out";
  std::optional<std::string> cache_dir;  // defaults to <output_dir>/cache
  std::optional<std::string> replay_dir;
  int workers = 4;
};

nlohmann::json config_to_json(const RunConfig& config);
// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j);

// Defaults, then the config file (if any), then each "a.b.c=value" override
// in order. Values parse as JSON when possible and as strings otherwise.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::string>& overrides);

// SHA-256 of the resolved configuration's canonical JSON.
std::string config_hash(const RunConfig& config);

// Writes `path` atomically and a `<path>.meta.json` sidecar holding the
// resolved config, its hash, and the seed.
void write_artifact(const std::filesystem::path& path, std::string_view contents,
                    const RunConfig& config, std::optional<std::uint64_t> seed);
void write_sidecar(const std::filesystem::path& path, const RunConfig& config,
                   std::optional<std::uint64_t> seed);

// Set from a signal handler; long-running commands stop at the next chunk
// boundary after flushing finished records.
std::atomic<bool>& interrupt_requested();

class Interrupted : public Error {
 public:
  using Error::Error;
};

// Each command returns the path of its main output file.
std::filesystem::path cmd_generate(const RunConfig& config, Backend& backend);
std::filesystem::path cmd_check(const RunConfig& config, Backend& backend,
                                const std::filesystem::path& solutions);
std::filesystem::path cmd_vote(const RunConfig& config,
                               const std::filesystem::path& checked);
std::filesystem::path cmd_eval(const RunConfig& config,
                               const std::filesystem::path& checked);
std::filesystem::path cmd_simulate(const RunConfig& config);
std::filesystem::path cmd_grid_search(const RunConfig& config,
                                      const std::filesystem::path& checked);

// Number formatting shared by the CSV writers: shortest round-trip form.
std::string format_number(double value);

}  // namespace selfcheck
