#include "selfcheck/checker.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

#include <omp.h>

#include "selfcheck/errors.hpp"
#include "selfcheck/io.hpp"
#include "selfcheck/parsing.hpp"
#include "selfcheck/text.hpp"

namespace selfcheck {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(CheckMode mode) {
  switch (mode) {
    case CheckMode::selfcheck: return "selfcheck";
    case CheckMode::global: return "global";
    case CheckMode::single_stage: return "single_stage";
    case CheckMode::regen_verify_zero_shot: return "regen_verify_zero_shot";
    case CheckMode::regen_verify_one_shot: return "regen_verify_one_shot";
  }
  return "selfcheck";
}

CheckMode check_mode_from_string(std::string_view name) {
  for (CheckMode m :
       {CheckMode::selfcheck, CheckMode::global, CheckMode::single_stage,
        CheckMode::regen_verify_zero_shot, CheckMode::regen_verify_one_shot}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown check mode: " + std::string(name));
}

double integrate(std::span<const Verdict> verdicts,
                 const IntegrationParams& params) {
  const auto contradictions =
      std::count(verdicts.begin(), verdicts.end(), Verdict::contradict);
  const auto undecided =
      std::count(verdicts.begin(), verdicts.end(), Verdict::unrelated);
  // Same value as lambda_neg * #(-1) + lambda_zero * #0, but grouped so that
  // downgrading one verdict can never lower the rounded penalty.
  const double penalty =
      params.lambda_zero * static_cast<double>(contradictions + undecided) +
      (params.lambda_neg - params.lambda_zero) * static_cast<double>(contradictions);
  // 2 * sigmoid(-x) == 2 / (1 + e^x); stays positive even when e^x overflows.
  const double value = 2.0 / (1.0 + std::exp(penalty));
  return std::max(value, std::numeric_limits<double>::denorm_min());
}

double integrate(std::span<const StepVerdict> verdicts,
                 const IntegrationParams& params) {
  std::vector<Verdict> values;
  values.reserve(verdicts.size());
  for (const StepVerdict& v : verdicts) values.push_back(v.value);
  return integrate(values, params);
}

namespace {

struct StageRunner {
  Backend& backend;
  const CheckerConfig& config;
  int step_index;
  std::vector<CompletionRecord> transcript;

  const std::string& call(std::string prompt, RoleTag role,
                          const StageParams& params) {
    CompletionRequest request;
    request.model = config.model;
    request.prompt = std::move(prompt);
    request.temperature = params.temperature;
    request.max_tokens = params.max_tokens;
    request.role_tag = role;
    try {
      transcript.push_back(backend.complete(request));
    } catch (const ProviderError& e) {
      throw ProviderFailure(e.what(), step_index, transcript);
    }
    return transcript.back().response_text;
  }
};

const TemplateSet& templates_of(const CheckerConfig& config) {
  return config.templates ? *config.templates : TemplateSet::builtin();
}

StageContext base_context(const Question& question, const Solution& solution,
                          int step_index) {
  if (step_index < 0 ||
      step_index >= static_cast<int>(solution.steps.size())) {
    throw std::out_of_range("step index out of range");
  }
  StageContext ctx;
  ctx.question = question;
  ctx.information = split_into_information(question);
  ctx.prior_steps.assign(solution.steps.begin(),
                         solution.steps.begin() + step_index);
  ctx.current_step = solution.steps[step_index];
  return ctx;
}

// Keeps only the referenced items, in index order.
void restrict_to(StageContext& ctx, const CollectedRefs& refs) {
  std::vector<InformationItem> info;
  for (int id : refs.info_ids) info.push_back(ctx.information.at(id));
  std::vector<Step> steps;
  for (int id : refs.step_ids) steps.push_back(ctx.prior_steps.at(id));
  ctx.information = std::move(info);
  ctx.prior_steps = std::move(steps);
}

StepVerdict run_selfcheck_step(const Question& question,
                               const Solution& solution, int i,
                               Backend& backend, const CheckerConfig& config) {
  const TemplateSet& templates = templates_of(config);
  StageRunner run{backend, config, i, {}};
  StageContext ctx = base_context(question, solution, i);

  const std::string target =
      run.call(render_target_extraction(ctx, templates), RoleTag::check_target,
               config.target);
  const std::string collected =
      run.call(render_information_collection(ctx, templates),
               RoleTag::check_collect, config.collect);
  const CollectedRefs refs =
      extract_ids(collected, static_cast<int>(ctx.prior_steps.size()),
                  static_cast<int>(ctx.information.size()));

  restrict_to(ctx, refs);
  ctx.target = target;
  const std::string regenerated = run.call(
      render_regeneration(ctx, templates), RoleTag::check_regen,
      config.regenerate);
  if (text::trim(regenerated).empty()) {
    throw ProviderFailure("empty regeneration output", i, run.transcript);
  }

  const std::string comparison =
      run.call(render_comparison(regenerated, solution.steps[i], templates),
               RoleTag::check_compare, config.compare);
  return {i, extract_verdict(comparison).value, std::move(run.transcript)};
}

StepVerdict run_single_stage_step(const Question& question,
                                  const Solution& solution, int i,
                                  Backend& backend,
                                  const CheckerConfig& config) {
  StageRunner run{backend, config, i, {}};
  const StageContext ctx = base_context(question, solution, i);
  const std::string answer = run.call(
      render_variant(VariantKind::single_stage, ctx, templates_of(config)),
      RoleTag::check_variant, config.variant);
  return {i, to_verdict(extract_conclusion(answer)), std::move(run.transcript)};
}

StepVerdict run_regen_verify_step(const Question& question,
                                  const Solution& solution, int i,
                                  Backend& backend, const CheckerConfig& config,
                                  const std::optional<std::string>& exemplar) {
  const TemplateSet& templates = templates_of(config);
  StageRunner run{backend, config, i, {}};
  StageContext ctx = base_context(question, solution, i);
  const std::string collected =
      run.call(render_information_collection(ctx, templates),
               RoleTag::check_collect, config.collect);
  restrict_to(ctx, extract_ids(collected,
                               static_cast<int>(ctx.prior_steps.size()),
                               static_cast<int>(ctx.information.size())));
  const VariantKind kind = config.mode == CheckMode::regen_verify_one_shot
                               ? VariantKind::regen_verify_one_shot
                               : VariantKind::regen_verify_zero_shot;
  std::optional<std::string_view> exemplar_view;
  if (exemplar) exemplar_view = *exemplar;
  const std::string answer =
      run.call(render_variant(kind, ctx, templates, exemplar_view),
               RoleTag::check_variant, config.variant);
  return {i, to_verdict(extract_conclusion(answer)), std::move(run.transcript)};
}

StepVerdict run_global(const Question& question, const Solution& solution,
                       Backend& backend, const CheckerConfig& config) {
  StageRunner run{backend, config, 0, {}};
  StageContext ctx;
  ctx.question = question;
  ctx.prior_steps = solution.steps;
  const std::string answer = run.call(
      render_variant(VariantKind::global, ctx, templates_of(config)),
      RoleTag::check_variant, config.variant);
  return {0, to_verdict(extract_conclusion(answer)), std::move(run.transcript)};
}

std::optional<std::string> load_exemplar(const CheckerConfig& config) {
  if (config.mode != CheckMode::regen_verify_one_shot) return std::nullopt;
  if (!config.exemplar_path) {
    throw UnsupportedVariant(
        "regen_verify_one_shot needs checker.exemplar_path");
  }
  std::ifstream in(*config.exemplar_path, std::ios::binary);
  if (!in) throw MissingInput("exemplar file not found: " + *config.exemplar_path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

StepVerdict run_task(const Question& question, const Solution& solution,
                     int step, Backend& backend, const CheckerConfig& config,
                     const std::optional<std::string>& exemplar) {
  switch (config.mode) {
    case CheckMode::selfcheck:
      return run_selfcheck_step(question, solution, step, backend, config);
    case CheckMode::single_stage:
      return run_single_stage_step(question, solution, step, backend, config);
    case CheckMode::regen_verify_zero_shot:
    case CheckMode::regen_verify_one_shot:
      return run_regen_verify_step(question, solution, step, backend, config,
                                   exemplar);
    case CheckMode::global:
      return run_global(question, solution, backend, config);
  }
  throw UnsupportedVariant("unknown check mode");
}

}  // namespace

StepVerdict check_step(const Question& question, const Solution& solution,
                       int step_index, Backend& backend,
                       const CheckerConfig& config) {
  if (config.mode == CheckMode::global) {
    throw UnsupportedVariant("global mode has no per-step check");
  }
  return run_task(question, solution, step_index, backend, config,
                  load_exemplar(config));
}

std::vector<CheckedSolution> check_solutions(std::span<const CheckJob> jobs,
                                             Backend& backend,
                                             const CheckerConfig& config) {
  const std::optional<std::string> exemplar = load_exemplar(config);

  struct Task {
    std::size_t job;
    int step;
  };
  std::vector<Task> tasks;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Solution& s = *jobs[j].solution;
    if (s.steps.empty()) throw EmptySolution("solution has no steps to check");
    if (config.mode == CheckMode::global) {
      tasks.push_back({j, 0});
      continue;
    }
    for (int i = 0; i < static_cast<int>(s.steps.size()); ++i) {
      tasks.push_back({j, i});
    }
  }

  std::vector<StepVerdict> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  const int n_tasks = static_cast<int>(tasks.size());
  const int workers = std::max(1, config.workers);
  // Each task is an independent chain of blocking provider calls; dynamic
  // scheduling keeps slow chains from stalling a whole block.
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (int t = 0; t < n_tasks; ++t) {
    const Task& task = tasks[t];
    try {
      results[t] = run_task(*jobs[task.job].question, *jobs[task.job].solution,
                            task.step, backend, config, exemplar);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }

  std::vector<CheckedSolution> out(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    out[j].solution = *jobs[j].solution;
    out[j].mode = config.mode;
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (errors[t]) {
      try {
        std::rethrow_exception(errors[t]);
      } catch (ProviderFailure& failure) {
        if (!config.tolerate_failures) throw;
        results[t] = {tasks[t].step, Verdict::unrelated,
                      std::move(failure.transcript)};
      }
    }
    out[tasks[t].job].verdicts.push_back(std::move(results[t]));
  }
  for (CheckedSolution& c : out) {
    c.confidence.value = integrate(c.verdicts, config.integration);
    for (const StepVerdict& v : c.verdicts) {
      c.confidence.verdicts.push_back(v.value);
    }
  }
  return out;
}

CheckedSolution check_solution(const Question& question,
                               const Solution& solution, Backend& backend,
                               const CheckerConfig& config) {
  const CheckJob job{&question, &solution};
  return std::move(check_solutions({&job, 1}, backend, config).front());
}

ordered_json checked_to_json(const CheckedSolution& checked,
                             bool with_transcripts) {
  ordered_json j;
  j["question_id"] = checked.solution.question_id;
  j["sample_index"] = checked.solution.sample_index;
  j["mode"] = std::string(to_string(checked.mode));
  j["confidence"] = checked.confidence.value;
  j["answer"] = answer_to_json(checked.solution.extracted_answer);
  ordered_json verdicts = ordered_json::array();
  for (const StepVerdict& v : checked.verdicts) {
    if (!with_transcripts) {
      verdicts.push_back(to_int(v.value));
      continue;
    }
    ordered_json entry;
    entry["step_index"] = v.step_index;
    entry["value"] = to_int(v.value);
    ordered_json transcript = ordered_json::array();
    for (const CompletionRecord& r : v.stage_transcript) {
      transcript.push_back(record_to_json(r));
    }
    entry["transcript"] = std::move(transcript);
    verdicts.push_back(std::move(entry));
  }
  j["verdicts"] = std::move(verdicts);
  if (with_transcripts) {
    j["raw_text"] = checked.solution.raw_text;
    ordered_json steps = ordered_json::array();
    for (const Step& s : checked.solution.steps) steps.push_back(s.text);
    j["steps"] = std::move(steps);
  }
  return j;
}

CheckedSolution checked_from_json(const json& j) {
  CheckedSolution c;
  c.solution.question_id = j.at("question_id").get<std::string>();
  c.solution.sample_index = j.at("sample_index").get<int>();
  c.solution.extracted_answer = answer_from_json(j.at("answer"));
  c.mode = check_mode_from_string(j.at("mode").get<std::string>());
  c.confidence.value = j.at("confidence").get<double>();
  if (j.contains("raw_text")) c.solution.raw_text = j.at("raw_text");
  if (j.contains("steps")) {
    int index = 0;
    for (const json& s : j.at("steps")) {
      c.solution.steps.push_back({index++, s.get<std::string>()});
    }
  }
  int step = 0;
  for (const json& v : j.at("verdicts")) {
    StepVerdict sv;
    if (v.is_object()) {
      sv.step_index = v.at("step_index").get<int>();
      sv.value = verdict_from_int(v.at("value").get<int>());
      for (const json& r : v.at("transcript")) {
        sv.stage_transcript.push_back(record_from_json(r));
      }
    } else {
      sv.step_index = step;
      sv.value = verdict_from_int(v.get<int>());
    }
    ++step;
    c.confidence.verdicts.push_back(sv.value);
    c.verdicts.push_back(std::move(sv));
  }
  return c;
}

}  // namespace selfcheck
