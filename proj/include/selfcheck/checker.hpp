#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfcheck/errors.hpp"
#include "selfcheck/model.hpp"
#include "selfcheck/prompts.hpp"
#include "selfcheck/provider.hpp"

namespace selfcheck {

enum class CheckMode {
  selfcheck,
  global,
  single_stage,
  regen_verify_zero_shot,
  regen_verify_one_shot,
};

std::string_view to_string(CheckMode mode);
CheckMode check_mode_from_string(std::string_view name);

struct StageParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

struct CheckerConfig {
  CheckMode mode = CheckMode::selfcheck;
  IntegrationParams integration;
  std::string model = "gpt-3.5-turbo";
  StageParams target{0.0, 128};
  StageParams collect{0.0, 256};
  StageParams regenerate{0.0, 512};
  StageParams compare{0.0, 512};
  StageParams variant{0.0, 1024};
  // Required by regen_verify_one_shot; the file text is prepended verbatim.
  std::optional<std::string> exemplar_path;
  // Record a neutral verdict instead of aborting when a stage call fails.
  bool tolerate_failures = false;
  int workers = 4;
  const TemplateSet* templates = nullptr;  // nullptr: built-in prompts
};

struct CheckedSolution {
  Solution solution;
  std::vector<StepVerdict> verdicts;
  ConfidenceScore confidence;
  CheckMode mode = CheckMode::selfcheck;
};

// A stage call failed; `transcript` holds the records completed before it.
class ProviderFailure : public Error {
 public:
  ProviderFailure(const std::string& what, int step_index,
                  std::vector<CompletionRecord> transcript)
      : Error(what), step_index(step_index), transcript(std::move(transcript)) {}

  int step_index;
  std::vector<CompletionRecord> transcript;
};

// 2 * sigmoid(-lambda_neg * #contradict - lambda_zero * #unrelated).
double integrate(std::span<const Verdict> verdicts,
                 const IntegrationParams& params);
double integrate(std::span<const StepVerdict> verdicts,
                 const IntegrationParams& params);

// Four stages for step `step_index`: target extraction, information
// collection, regeneration from the collected context, comparison.
StepVerdict check_step(const Question& question, const Solution& solution,
                       int step_index, Backend& backend,
                       const CheckerConfig& config);

CheckedSolution check_solution(const Question& question,
                               const Solution& solution, Backend& backend,
                               const CheckerConfig& config);

struct CheckJob {
  const Question* question;
  const Solution* solution;
};

// Checks many solutions with up to config.workers concurrent stage chains.
// Results come back in job order; a failure aborts the whole batch unless
// tolerate_failures is set.
std::vector<CheckedSolution> check_solutions(std::span<const CheckJob> jobs,
                                             Backend& backend,
                                             const CheckerConfig& config);

// Full form carries every stage record (audit log); compact form keeps only
// what voting and evaluation need.
nlohmann::ordered_json checked_to_json(const CheckedSolution& checked,
                                       bool with_transcripts);
CheckedSolution checked_from_json(const nlohmann::json& j);

}  // namespace selfcheck
