#include "selfcheck/app.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

#include <omp.h>
#include <spdlog/spdlog.h>

#include "selfcheck/io.hpp"
#include "selfcheck/parsing.hpp"
#include "selfcheck/prompts.hpp"
#include "selfcheck/stats.hpp"
#include "selfcheck/vote.hpp"

namespace selfcheck {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// --- config ---------------------------------------------------------------------

namespace {

template <typename T>
json optional_json(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

json stage_json(const StageParams& s) {
  return {{"temperature", s.temperature}, {"max_tokens", s.max_tokens}};
}

StageParams stage_from(const json& j) {
  return {j.at("temperature").get<double>(), j.at("max_tokens").get<int>()};
}

template <typename T>
std::optional<T> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

// Every key in `given` must also exist in `reference`, recursively.
void check_keys(const json& given, const json& reference, const std::string& where) {
  if (!reference.is_object()) return;
  if (!given.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!reference.contains(it.key())) throw ConfigError("unknown config key: " + key);
    check_keys(it.value(), reference.at(it.key()), key);
  }
}

// Like a JSON merge patch, except that null is stored instead of deleting.
void deep_merge(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key())) {
      deep_merge(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

json config_to_json(const RunConfig& c) {
  json j;
  j["dataset"] = {{"path", optional_json(c.dataset.path)},
                  {"kind", std::string(to_string(c.dataset.kind))},
                  {"name", optional_json(c.dataset.name)}};
  j["provider"] = {{"endpoint_url", c.provider.endpoint_url},
                   {"api_key_env", c.provider.api_key_env_var_name},
                   {"max_retries", c.provider.max_retries},
                   {"backoff_base_ms", c.provider.backoff_base_ms},
                   {"requests_per_minute", c.provider.requests_per_minute_cap},
                   {"jitter", c.provider.jitter},
                   {"timeout_seconds", c.provider.timeout_seconds}};
  j["checker"] = {{"mode", std::string(to_string(c.checker.mode))},
                  {"model", c.checker.model},
                  {"lambda_neg", c.checker.integration.lambda_neg},
                  {"lambda_zero", c.checker.integration.lambda_zero},
                  {"threshold", c.threshold},
                  {"exemplar_path", optional_json(c.checker.exemplar_path)},
                  {"templates_dir", optional_json(c.templates_dir)},
                  {"tolerate_failures", c.checker.tolerate_failures},
                  {"stages",
                   {{"target", stage_json(c.checker.target)},
                    {"collect", stage_json(c.checker.collect)},
                    {"regenerate", stage_json(c.checker.regenerate)},
                    {"compare", stage_json(c.checker.compare)},
                    {"variant", stage_json(c.checker.variant)}}}};
  j["sampling"] = {{"model", c.sampling.model},
                   {"num_solutions", c.sampling.num_solutions},
                   {"temperature", c.sampling.temperature},
                   {"max_tokens", c.sampling.max_tokens}};
  j["eval"] = {{"n_values", c.eval.n_values},
               {"resamples", c.eval.resamples},
               {"seed", c.eval.seed},
               {"thresholds", c.eval.thresholds}};
  j["grid_search"] = {{"lambda_neg", c.grid_search.lambda_neg},
                      {"lambda_zero", c.grid_search.lambda_zero}};
  const SimulateConfig& s = c.simulate;
  const PopulationModel& m = s.population.model;
  j["simulate"] = {
      {"p", s.dist.p},
      {"q", s.dist.q},
      {"k", s.dist.k},
      {"n_values", s.n_values},
      {"trials", s.trials},
      {"seed", s.seed},
      {"tpr", s.checker.tpr},
      {"tnr", s.checker.tnr},
      {"high", s.checker.high},
      {"low", s.checker.low},
      {"population",
       {{"enabled", s.population.enabled},
        {"draws", s.population.draws},
        {"trials_per_question", s.population.trials_per_question},
        {"questions", m.questions},
        {"biased_fraction", m.biased_fraction},
        {"biased_p", {m.biased_p_lo, m.biased_p_hi}},
        {"biased_ratio", {m.biased_ratio_lo, m.biased_ratio_hi}},
        {"unbiased_p", {m.unbiased_p_lo, m.unbiased_p_hi}},
        {"unbiased_q_fraction", {m.unbiased_q_frac_lo, m.unbiased_q_frac_hi}}}}};
  j["output_dir"] = c.output_dir;
  j["cache_dir"] = optional_json(c.cache_dir);
  j["replay_dir"] = optional_json(c.replay_dir);
  j["workers"] = c.workers;
  return j;
}

RunConfig config_from_json(const json& given) {
  json j = config_to_json(RunConfig{});
  check_keys(given, j, "");
  deep_merge(j, given);

  RunConfig c;
  try {
    const json& d = j.at("dataset");
    c.dataset.path = optional_from<std::string>(d.at("path"));
    c.dataset.kind = dataset_kind_from_string(d.at("kind").get<std::string>());
    c.dataset.name = optional_from<std::string>(d.at("name"));

    const json& p = j.at("provider");
    c.provider.endpoint_url = p.at("endpoint_url");
    c.provider.api_key_env_var_name = p.at("api_key_env");
    c.provider.max_retries = p.at("max_retries");
    c.provider.backoff_base_ms = p.at("backoff_base_ms");
    c.provider.requests_per_minute_cap = p.at("requests_per_minute");
    c.provider.jitter = p.at("jitter");
    c.provider.timeout_seconds = p.at("timeout_seconds");

    const json& k = j.at("checker");
    c.checker.mode = check_mode_from_string(k.at("mode").get<std::string>());
    c.checker.model = k.at("model");
    c.checker.integration.lambda_neg = k.at("lambda_neg");
    c.checker.integration.lambda_zero = k.at("lambda_zero");
    c.threshold = k.at("threshold");
    c.checker.exemplar_path = optional_from<std::string>(k.at("exemplar_path"));
    c.templates_dir = optional_from<std::string>(k.at("templates_dir"));
    c.checker.tolerate_failures = k.at("tolerate_failures");
    const json& st = k.at("stages");
    c.checker.target = stage_from(st.at("target"));
    c.checker.collect = stage_from(st.at("collect"));
    c.checker.regenerate = stage_from(st.at("regenerate"));
    c.checker.compare = stage_from(st.at("compare"));
    c.checker.variant = stage_from(st.at("variant"));

    const json& sm = j.at("sampling");
    c.sampling.model = sm.at("model");
    c.sampling.num_solutions = sm.at("num_solutions");
    c.sampling.temperature = sm.at("temperature");
    c.sampling.max_tokens = sm.at("max_tokens");

    const json& e = j.at("eval");
    c.eval.n_values = e.at("n_values").get<std::vector<int>>();
    c.eval.resamples = e.at("resamples");
    c.eval.seed = e.at("seed");
    c.eval.thresholds = e.at("thresholds").get<std::vector<double>>();

    const json& g = j.at("grid_search");
    c.grid_search.lambda_neg = g.at("lambda_neg").get<std::vector<double>>();
    c.grid_search.lambda_zero = g.at("lambda_zero").get<std::vector<double>>();

    const json& s = j.at("simulate");
    c.simulate.dist.p = s.at("p");
    c.simulate.dist.q = s.at("q");
    c.simulate.dist.k = s.at("k");
    c.simulate.n_values = s.at("n_values").get<std::vector<int>>();
    c.simulate.trials = s.at("trials");
    c.simulate.seed = s.at("seed");
    c.simulate.checker.tpr = s.at("tpr");
    c.simulate.checker.tnr = s.at("tnr");
    c.simulate.checker.high = s.at("high");
    c.simulate.checker.low = s.at("low");
    const json& pop = s.at("population");
    c.simulate.population.enabled = pop.at("enabled");
    c.simulate.population.draws = pop.at("draws");
    c.simulate.population.trials_per_question = pop.at("trials_per_question");
    PopulationModel& m = c.simulate.population.model;
    m.questions = pop.at("questions");
    m.biased_fraction = pop.at("biased_fraction");
    auto range = [&](const char* key, double& lo, double& hi) {
      const auto v = pop.at(key).get<std::vector<double>>();
      require(v.size() == 2 && v[0] <= v[1],
              std::string("simulate.population.") + key + " must be [lo, hi]");
      lo = v[0];
      hi = v[1];
    };
    range("biased_p", m.biased_p_lo, m.biased_p_hi);
    range("biased_ratio", m.biased_ratio_lo, m.biased_ratio_hi);
    range("unbiased_p", m.unbiased_p_lo, m.unbiased_p_hi);
    range("unbiased_q_fraction", m.unbiased_q_frac_lo, m.unbiased_q_frac_hi);
    m.k = c.simulate.dist.k;

    c.output_dir = j.at("output_dir");
    c.cache_dir = optional_from<std::string>(j.at("cache_dir"));
    c.replay_dir = optional_from<std::string>(j.at("replay_dir"));
    c.workers = j.at("workers");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  require(c.sampling.num_solutions >= 1, "sampling.num_solutions must be >= 1");
  require(c.workers >= 1, "workers must be >= 1");
  require(c.eval.resamples >= 1, "eval.resamples must be >= 1");
  require(!c.eval.n_values.empty(), "eval.n_values must not be empty");
  for (int n : c.eval.n_values) require(n >= 1, "eval.n_values must be >= 1");
  require(c.threshold >= 0.0 && c.threshold <= 1.0, "checker.threshold must lie in [0, 1]");
  for (double t : c.eval.thresholds) {
    require(t >= 0.0 && t <= 1.0, "eval.thresholds must lie in [0, 1]");
  }
  require(c.simulate.trials >= 1, "simulate.trials must be >= 1");
  for (int n : c.simulate.n_values) require(n >= 1, "simulate.n_values must be >= 1");
  require(c.simulate.population.draws >= 1, "simulate.population.draws must be >= 1");
  require(c.provider.max_retries >= 0, "provider.max_retries must be >= 0");
  require(c.provider.requests_per_minute_cap >= 1,
          "provider.requests_per_minute must be >= 1");
  try {
    c.simulate.dist.validate();
    c.simulate.checker.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("simulate: ") + e.what());
  }
  return c;
}

RunConfig resolve_config(const std::optional<fs::path>& file,
                         const std::vector<std::string>& overrides) {
  json merged = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw MissingInput("config file not found: " + file->string());
    try {
      merged = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + file->string() + ": " + e.what());
    }
    if (!merged.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override must look like key.path=value: " + item);
    }
    const std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json patch = value;
    std::string_view rest = key;
    std::vector<std::string> parts;
    while (true) {
      const auto dot = rest.find('.');
      parts.emplace_back(rest.substr(0, dot));
      if (dot == std::string_view::npos) break;
      rest.remove_prefix(dot + 1);
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      patch = json{{*it, patch}};
    }
    deep_merge(merged, patch);
  }
  RunConfig config = config_from_json(merged);

  auto must_exist = [](const std::optional<std::string>& path, const char* what) {
    if (path && !fs::exists(*path)) {
      throw MissingInput(std::string(what) + " not found: " + *path);
    }
  };
  must_exist(config.dataset.path, "dataset");
  must_exist(config.templates_dir, "templates directory");
  must_exist(config.checker.exemplar_path, "exemplar file");
  must_exist(config.replay_dir, "replay directory");
  return config;
}

std::string config_hash(const RunConfig& config) {
  return sha256_hex(config_to_json(config).dump());
}

// --- artifacts ------------------------------------------------------------------

namespace {

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path temp = path.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + temp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed: " + temp.string());
  }
  fs::rename(temp, path);
}

ordered_json provenance(const RunConfig& config, std::optional<std::uint64_t> seed) {
  ordered_json j;
  j["config_hash"] = config_hash(config);
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["config"] = config_to_json(config);
  return j;
}

}  // namespace

void write_sidecar(const fs::path& path, const RunConfig& config,
                   std::optional<std::uint64_t> seed) {
  write_file_atomic(path.string() + ".meta.json",
                    provenance(config, seed).dump(2) + "\n");
}

void write_artifact(const fs::path& path, std::string_view contents,
                    const RunConfig& config, std::optional<std::uint64_t> seed) {
  write_file_atomic(path, contents);
  write_sidecar(path, config, seed);
}

std::atomic<bool>& interrupt_requested() {
  static std::atomic<bool> flag{false};
  return flag;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  return canonical_number(value);
}

// --- shared helpers ---------------------------------------------------------------

namespace {

std::vector<Question> load_dataset(const RunConfig& config) {
  if (!config.dataset.path) throw ConfigError("dataset.path is required");
  std::vector<Question> questions;
  for (json j : read_jsonl(*config.dataset.path)) {
    // Lines without their own kind take the configured dataset kind.
    if (!j.contains("kind")) j["kind"] = std::string(to_string(config.dataset.kind));
    try {
      questions.push_back(question_from_json(j));
    } catch (const json::exception& e) {
      throw ConfigError("malformed question in " + *config.dataset.path + ": " + e.what());
    }
  }
  return questions;
}

std::string dataset_name(const RunConfig& config) {
  if (config.dataset.name) return *config.dataset.name;
  if (config.dataset.path) return fs::path(*config.dataset.path).stem().string();
  return "dataset";
}

std::optional<TemplateSet> load_templates(const RunConfig& config) {
  if (!config.templates_dir) return std::nullopt;
  return TemplateSet::load_directory(*config.templates_dir);
}

std::vector<CheckedSolution> load_checked(const fs::path& path) {
  std::vector<CheckedSolution> out;
  for (const json& j : read_jsonl(path)) {
    try {
      out.push_back(checked_from_json(j));
    } catch (const json::exception& e) {
      throw ConfigError("malformed checked record in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, Question> index_questions(const std::vector<Question>& questions) {
  std::map<std::string, Question> by_id;
  for (const Question& q : questions) by_id.emplace(q.id, q);
  return by_id;
}

void append_line(std::ofstream& out, const std::string& line) {
  out << line << '\n';
}

// Reads the longest prefix of complete, well-formed lines and truncates
// anything after it (a line cut short by an interrupted run).
std::vector<json> recover_jsonl_prefix(const fs::path& path) {
  std::vector<json> lines;
  if (!fs::exists(path)) return lines;
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t good = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;
    try {
      lines.push_back(json::parse(content.substr(pos, nl - pos)));
    } catch (const json::parse_error&) {
      break;
    }
    pos = nl + 1;
    good = pos;
  }
  if (good != content.size()) {
    spdlog::warn("dropping {} trailing bytes of {}", content.size() - good, path.string());
    fs::resize_file(path, good);
  }
  return lines;
}

}  // namespace

// --- generate ---------------------------------------------------------------------

fs::path cmd_generate(const RunConfig& config, Backend& backend) {
  const std::vector<Question> questions = load_dataset(config);
  const std::optional<TemplateSet> custom = load_templates(config);
  const TemplateSet& templates = custom ? *custom : TemplateSet::builtin();

  struct Task {
    const Question* question;
    int sample_index;
  };
  std::vector<Task> tasks;
  for (const Question& q : questions) {
    for (int s = 0; s < config.sampling.num_solutions; ++s) tasks.push_back({&q, s});
  }

  const fs::path out_path = fs::path(config.output_dir) / "solutions.jsonl";
  fs::create_directories(config.output_dir);
  write_sidecar(out_path, config, std::nullopt);

  const std::vector<json> existing = recover_jsonl_prefix(out_path);
  if (existing.size() > tasks.size()) {
    throw ConfigError(out_path.string() + " holds more solutions than the dataset asks for");
  }
  for (std::size_t i = 0; i < existing.size(); ++i) {
    const SolutionLine line = solution_line_from_json(existing[i]);
    if (line.question_id != tasks[i].question->id ||
        line.sample_index != tasks[i].sample_index) {
      throw ConfigError(out_path.string() +
                        " does not match the dataset and sampling settings; move it away");
    }
  }
  if (!existing.empty()) {
    spdlog::info("resuming after {} of {} solutions", existing.size(), tasks.size());
  }

  std::ofstream out(out_path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot write " + out_path.string());
  const std::size_t chunk = static_cast<std::size_t>(config.workers) * 4;
  for (std::size_t start = existing.size(); start < tasks.size(); start += chunk) {
    if (interrupt_requested().load()) {
      throw Interrupted("interrupted after " + std::to_string(start) + " solutions");
    }
    const std::size_t end = std::min(tasks.size(), start + chunk);
    const int count = static_cast<int>(end - start);
    std::vector<std::string> texts(count);
    std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for num_threads(config.workers) schedule(dynamic, 1)
    for (int i = 0; i < count; ++i) {
      const Task& task = tasks[start + i];
      CompletionRequest request;
      request.model = config.sampling.model;
      request.prompt = render_generator(*task.question, templates);
      request.temperature = config.sampling.temperature;
      request.max_tokens = config.sampling.max_tokens;
      request.seed = task.sample_index;
      request.role_tag = RoleTag::generate;
      try {
        texts[i] = backend.complete(request).response_text;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    // Keep the file an ordered prefix: stop at the first failure.
    for (int i = 0; i < count; ++i) {
      if (errors[i]) {
        out.flush();
        std::rethrow_exception(errors[i]);
      }
      const Task& task = tasks[start + i];
      append_line(out, solution_line_to_json({task.question->id, task.sample_index, texts[i]}).dump());
    }
    out.flush();
  }
  return out_path;
}

// --- check ----------------------------------------------------------------------

fs::path cmd_check(const RunConfig& config, Backend& backend, const fs::path& solutions_path) {
  const std::vector<Question> questions = load_dataset(config);
  const auto by_id = index_questions(questions);
  const std::vector<SolutionLine> lines = read_solution_lines(solutions_path);
  const std::optional<TemplateSet> custom = load_templates(config);

  std::vector<Solution> solutions;
  std::vector<const Question*> owners;
  for (const SolutionLine& line : lines) {
    auto it = by_id.find(line.question_id);
    if (it == by_id.end()) {
      throw MissingInput("solution refers to unknown question " + line.question_id);
    }
    try {
      solutions.push_back(make_solution(line, it->second.dataset_kind));
      owners.push_back(&it->second);
    } catch (const EmptySolution&) {
      spdlog::warn("skipping empty solution {}#{}", line.question_id, line.sample_index);
    }
  }

  CheckerConfig checker = config.checker;
  checker.workers = config.workers;
  if (custom) checker.templates = &*custom;

  const fs::path out_path = fs::path(config.output_dir) / "checked.jsonl";
  const fs::path audit_path = fs::path(config.output_dir) / "audit" / "transcripts.jsonl";
  fs::create_directories(audit_path.parent_path());
  write_sidecar(out_path, config, std::nullopt);
  write_sidecar(audit_path, config, std::nullopt);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  std::ofstream audit(audit_path, std::ios::binary | std::ios::trunc);
  if (!out || !audit) throw Error("cannot write check outputs under " + config.output_dir);

  const std::size_t batch = static_cast<std::size_t>(config.workers) * 8;
  for (std::size_t start = 0; start < solutions.size(); start += batch) {
    if (interrupt_requested().load()) {
      throw Interrupted("interrupted after " + std::to_string(start) + " solutions");
    }
    const std::size_t end = std::min(solutions.size(), start + batch);
    std::vector<CheckJob> jobs;
    for (std::size_t i = start; i < end; ++i) jobs.push_back({owners[i], &solutions[i]});
    for (const CheckedSolution& c : check_solutions(jobs, backend, checker)) {
      append_line(out, checked_to_json(c, false).dump());
      append_line(audit, checked_to_json(c, true).dump());
    }
    out.flush();
    audit.flush();
  }
  return out_path;
}

// --- vote -----------------------------------------------------------------------

namespace {

struct Grouped {
  const Question* question;
  std::vector<CheckedSolution> samples;
};

// Checked solutions grouped per question, in dataset order.
std::vector<Grouped> group_by_question(const std::vector<Question>& questions,
                                       std::vector<CheckedSolution> checked) {
  std::map<std::string, std::size_t> slot;
  std::vector<Grouped> groups;
  for (const Question& q : questions) {
    slot.emplace(q.id, groups.size());
    groups.push_back({&q, {}});
  }
  for (CheckedSolution& c : checked) {
    auto it = slot.find(c.solution.question_id);
    if (it == slot.end()) {
      throw MissingInput("checked solution refers to unknown question " + c.solution.question_id);
    }
    groups[it->second].samples.push_back(std::move(c));
  }
  return groups;
}

std::vector<LabeledConfidence> labeled(const std::vector<Grouped>& groups) {
  std::vector<LabeledConfidence> items;
  for (const Grouped& g : groups) {
    for (const CheckedSolution& c : g.samples) {
      const auto& gold = g.question->gold_answer;
      const auto& got = c.solution.extracted_answer;
      items.push_back({c.confidence.value, gold && got && *gold == *got});
    }
  }
  return items;
}

std::string threshold_sweep_csv(const std::string& dataset,
                                std::span<const LabeledConfidence> items,
                                std::span<const double> thresholds) {
  std::ostringstream csv;
  csv << "dataset,t,acc_c,acc_w,acc_m,precision\n";
  for (double t : thresholds) {
    csv << dataset << ',' << format_number(t) << ',';
    try {
      const CheckingAccuracies acc = checking_accuracies(items, t);
      csv << format_number(acc.acc_correct) << ',' << format_number(acc.acc_wrong) << ','
          << format_number(acc.acc_mean) << ',';
    } catch (const DegenerateSplit&) {
      csv << ",,,";
    }
    const auto precision = precision_at_t(items, t);
    csv << (precision ? format_number(*precision) : std::string()) << '\n';
  }
  return csv.str();
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

fs::path cmd_vote(const RunConfig& config, const fs::path& checked_path) {
  const std::vector<Question> questions = load_dataset(config);
  const auto groups = group_by_question(questions, load_checked(checked_path));
  const std::string dataset = dataset_name(config);

  std::ostringstream votes;
  std::int64_t voted = 0, weighted_hits = 0, majority_hits = 0;
  for (const Grouped& g : groups) {
    if (g.samples.empty()) continue;
    ++voted;
    ordered_json line;
    line["question_id"] = g.question->id;
    line["gold"] = answer_to_json(g.question->gold_answer);
    for (VoteMethod method : {VoteMethod::weighted, VoteMethod::majority}) {
      const std::string name(to_string(method));
      try {
        const VoteResult r = method == VoteMethod::weighted ? weighted_vote(g.samples)
                                                            : majority_vote(g.samples);
        const bool hit = g.question->gold_answer && r.chosen == *g.question->gold_answer;
        (method == VoteMethod::weighted ? weighted_hits : majority_hits) += hit;
        line[name] = vote_to_json(r);
        line[name + "_correct"] = hit;
      } catch (const NoVotableSolutions&) {
        line[name] = nullptr;
        line[name + "_correct"] = false;
      }
    }
    votes << line.dump() << '\n';
  }
  const fs::path out_path = fs::path(config.output_dir) / "votes.jsonl";
  write_artifact(out_path, votes.str(), config, std::nullopt);

  const auto items = labeled(groups);
  write_artifact(fs::path(config.output_dir) / "threshold_sweep.csv",
                 threshold_sweep_csv(dataset, items, config.eval.thresholds), config,
                 std::nullopt);

  ordered_json summary = provenance(config, std::nullopt);
  summary["dataset"] = dataset;
  summary["questions_voted"] = voted;
  summary["weighted_accuracy"] =
      voted ? json(static_cast<double>(weighted_hits) / voted) : json(nullptr);
  summary["majority_accuracy"] =
      voted ? json(static_cast<double>(majority_hits) / voted) : json(nullptr);
  write_artifact(fs::path(config.output_dir) / "vote_summary.json", summary.dump(2) + "\n",
                 config, std::nullopt);
  return out_path;
}

// --- eval -----------------------------------------------------------------------

fs::path cmd_eval(const RunConfig& config, const fs::path& checked_path) {
  const std::vector<Question> questions = load_dataset(config);
  const auto groups = group_by_question(questions, load_checked(checked_path));
  const std::string dataset = dataset_name(config);

  std::vector<QuestionPool> pools;
  for (const Grouped& g : groups) pools.push_back({g.question->gold_answer, g.samples});
  const std::vector<CurvePoint> curve =
      accuracy_vs_samples(pools, config.eval.n_values, config.eval.resamples,
                          config.eval.seed, Execution::parallel, config.workers);

  std::ostringstream csv;
  csv << "dataset,method,n,mean,stderr,pvalue\n";
  for (const CurvePoint& p : curve) {
    csv << dataset << ",majority," << p.n << ',' << format_number(p.majority_mean) << ','
        << format_number(p.majority_stderr) << ",\n";
    csv << dataset << ",weighted," << p.n << ',' << format_number(p.weighted_mean) << ','
        << format_number(p.weighted_stderr) << ',' << format_number(p.sign_test_p) << '\n';
  }
  const fs::path out_path = fs::path(config.output_dir) / "accuracy.csv";
  write_artifact(out_path, csv.str(), config, config.eval.seed);

  ordered_json summary = provenance(config, config.eval.seed);
  summary["dataset"] = dataset;
  ordered_json by_n = ordered_json::array();
  ordered_json delta = ordered_json::object();
  for (const CurvePoint& p : curve) {
    by_n.push_back({{"n", p.n},
                    {"weighted", {{"mean", p.weighted_mean}, {"stderr", p.weighted_stderr}}},
                    {"majority", {{"mean", p.majority_mean}, {"stderr", p.majority_stderr}}},
                    {"delta", p.delta},
                    {"questions_better", p.questions_better},
                    {"questions_worse", p.questions_worse},
                    {"sign_test_p", p.sign_test_p}});
    delta[std::to_string(p.n)] = p.delta;
  }
  summary["accuracy_by_n"] = std::move(by_n);
  summary["delta_accuracy_by_n"] = std::move(delta);

  const auto items = labeled(groups);
  try {
    const CheckingAccuracies acc = checking_accuracies(items, config.threshold);
    summary["checking"] = {{"threshold", config.threshold},
                           {"acc_correct", acc.acc_correct},
                           {"acc_wrong", acc.acc_wrong},
                           {"acc_mean", acc.acc_mean}};
  } catch (const DegenerateSplit&) {
    summary["checking"] = nullptr;
  }
  ordered_json precision = ordered_json::array();
  for (double t : config.eval.thresholds) {
    precision.push_back({{"t", t}, {"precision", optional_number(precision_at_t(items, t))}});
  }
  summary["precision_at_t"] = std::move(precision);
  write_artifact(fs::path(config.output_dir) / "eval_summary.json", summary.dump(2) + "\n",
                 config, config.eval.seed);
  return out_path;
}

// --- simulate -------------------------------------------------------------------

namespace {

fs::path simulate_population_run(const RunConfig& config) {
  const SimulateConfig& s = config.simulate;
  const PopulationConfig& pc = s.population;
  const std::size_t count = s.n_values.size();
  std::vector<std::vector<PopulationPoint>> per_draw;
  for (int d = 0; d < pc.draws; ++d) {
    Rng rng(derive_seed(s.seed, 0x706f70, static_cast<std::uint64_t>(d)));
    const auto population = pc.model.sample(rng);
    per_draw.push_back(simulate_population(population, s.checker, s.n_values,
                                           pc.trials_per_question,
                                           derive_seed(s.seed, 0x73696d, d),
                                           Execution::parallel, config.workers));
  }
  std::ostringstream csv;
  csv << "n,method,accuracy,stderr,bound\n";
  std::vector<double> mean_gap(count);
  for (std::size_t j = 0; j < count; ++j) {
    std::vector<double> maj, wt, gap;
    for (const auto& draw : per_draw) {
      maj.push_back(draw[j].acc_majority);
      wt.push_back(draw[j].acc_weighted);
      gap.push_back(draw[j].gap);
    }
    const MeanStderr m = mean_stderr(maj), w = mean_stderr(wt), g = mean_stderr(gap);
    mean_gap[j] = g.mean;
    const std::string n = std::to_string(s.n_values[j]);
    csv << n << ",majority," << format_number(m.mean) << ',' << format_number(m.stderr_) << ",\n";
    csv << n << ",weighted," << format_number(w.mean) << ',' << format_number(w.stderr_) << ",\n";
    csv << n << ",gap," << format_number(g.mean) << ',' << format_number(g.stderr_) << ",\n";
  }
  const fs::path out_path = fs::path(config.output_dir) / "simulate_population.csv";
  write_artifact(out_path, csv.str(), config, s.seed);

  ordered_json summary = provenance(config, s.seed);
  std::int64_t plus = 0, minus = 0;
  for (const auto& draw : per_draw) {
    if (draw.back().gap > 0) ++plus;
    if (draw.back().gap < 0) ++minus;
  }
  summary["largest_n"] = s.n_values.back();
  summary["draws_weighted_better"] = plus;
  summary["draws_weighted_worse"] = minus;
  summary["sign_test_p"] = sign_test_p_value(plus, minus);
  summary["smoothed_gap_sign_changes"] = sign_changes(moving_average(mean_gap, 3));
  write_artifact(fs::path(config.output_dir) / "simulate_summary.json",
                 summary.dump(2) + "\n", config, s.seed);
  return out_path;
}

}  // namespace

fs::path cmd_simulate(const RunConfig& config) {
  if (config.simulate.population.enabled) return simulate_population_run(config);
  const SimulateConfig& s = config.simulate;
  std::ostringstream csv;
  csv << "n,method,accuracy,stderr,bound\n";
  const bool bounded = s.dist.q > 0.0 && s.dist.q < s.dist.p;
  for (int n : s.n_values) {
    const SimResult r = simulate_weighted(s.dist, s.checker, n, s.trials,
                                          derive_seed(s.seed, static_cast<std::uint64_t>(n)),
                                          Execution::parallel, config.workers);
    const std::string bound = bounded ? format_number(theoretical_bound(s.dist.p, s.dist.q, n)) : "";
    csv << n << ",majority," << format_number(r.acc_majority) << ','
        << format_number(r.acc_majority_stderr) << ",\n";
    // Ties scored as wrong: 1 - accuracy here is the error the bound covers.
    csv << n << ",majority_ties_wrong," << format_number(1.0 - r.p_wrong_majority) << ','
        << format_number(r.p_wrong_stderr) << ',' << bound << '\n';
    csv << n << ",weighted," << format_number(r.acc_weighted) << ','
        << format_number(r.acc_weighted_stderr) << ",\n";
  }
  const fs::path out_path = fs::path(config.output_dir) / "simulate.csv";
  write_artifact(out_path, csv.str(), config, s.seed);
  return out_path;
}

// --- grid search ----------------------------------------------------------------

fs::path cmd_grid_search(const RunConfig& config, const fs::path& checked_path) {
  const std::vector<Question> questions = load_dataset(config);
  const auto groups = group_by_question(questions, load_checked(checked_path));
  std::vector<LabeledVerdicts> validation;
  for (const Grouped& g : groups) {
    for (const CheckedSolution& c : g.samples) {
      const auto& gold = g.question->gold_answer;
      const auto& got = c.solution.extracted_answer;
      validation.push_back({c.confidence.verdicts, gold && got && *gold == *got});
    }
  }
  std::vector<IntegrationParams> grid;
  for (double neg : config.grid_search.lambda_neg) {
    for (double zero : config.grid_search.lambda_zero) grid.push_back({neg, zero});
  }
  const GridSearchResult best = grid_search_lambdas(validation, grid);
  ordered_json out = provenance(config, std::nullopt);
  out["lambda_neg"] = best.params.lambda_neg;
  out["lambda_zero"] = best.params.lambda_zero;
  out["threshold"] = best.threshold;
  out["acc_mean"] = best.acc_mean;
  const fs::path out_path = fs::path(config.output_dir) / "grid_search.json";
  write_artifact(out_path, out.dump(2) + "\n", config, std::nullopt);
  return out_path;
}

}  // namespace selfcheck
