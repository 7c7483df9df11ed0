#include "selfcheck/io.hpp"

#include <fstream>

#include "selfcheck/errors.hpp"
#include "selfcheck/parsing.hpp"

namespace selfcheck {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json answer_to_json(const std::optional<NormalizedAnswer>& a) {
  if (!a) return nullptr;
  ordered_json j;
  j["kind"] = std::string(to_string(a->kind));
  j["canonical"] = a->canonical;
  if (a->numeric_value) j["value"] = *a->numeric_value;
  return j;
}

std::optional<NormalizedAnswer> answer_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  NormalizedAnswer a;
  a.kind = answer_kind_from_string(j.at("kind").get<std::string>());
  a.canonical = j.at("canonical").get<std::string>();
  if (j.contains("value")) a.numeric_value = j.at("value").get<double>();
  return a;
}

Question question_from_json(const json& j) {
  Question q;
  q.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                : j.at("id").dump();
  q.text = j.at("question").get<std::string>();
  q.dataset_kind = dataset_kind_from_string(j.value("kind", "numeric"));
  if (j.contains("answer") && !j.at("answer").is_null()) {
    const json& raw = j.at("answer");
    const std::string text =
        raw.is_string() ? raw.get<std::string>() : raw.dump();
    q.gold_answer = try_normalize_answer(text, q.dataset_kind);
  }
  return q;
}

ordered_json question_to_json(const Question& q, const std::string& raw_answer) {
  ordered_json j;
  j["id"] = q.id;
  j["question"] = q.text;
  j["answer"] = raw_answer;
  j["kind"] = std::string(to_string(q.dataset_kind));
  return j;
}

ordered_json solution_line_to_json(const SolutionLine& line) {
  ordered_json j;
  j["question_id"] = line.question_id;
  j["sample_index"] = line.sample_index;
  j["text"] = line.text;
  return j;
}

SolutionLine solution_line_from_json(const json& j) {
  return {j.at("question_id").get<std::string>(),
          j.at("sample_index").get<int>(), j.at("text").get<std::string>()};
}

Solution make_solution(const SolutionLine& line, DatasetKind kind) {
  Solution s;
  s.question_id = line.question_id;
  s.sample_index = line.sample_index;
  s.raw_text = line.text;
  const std::string body = strip_answer_lines(line.text);
  try {
    s.steps = parse_solution_steps(body);
  } catch (const EmptySolution&) {
    // Nothing but an "Answer:" line; keep it as the only step.
    s.steps = parse_solution_steps(line.text);
  }
  s.extracted_answer = extract_final_answer(line.text, kind);
  return s;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": invalid JSON: " + e.what());
    }
  }
  return rows;
}

std::vector<Question> read_questions(const std::filesystem::path& path) {
  std::vector<Question> out;
  for (const json& row : read_jsonl(path)) out.push_back(question_from_json(row));
  return out;
}

std::vector<SolutionLine> read_solution_lines(const std::filesystem::path& path) {
  std::vector<SolutionLine> out;
  for (const json& row : read_jsonl(path)) {
    out.push_back(solution_line_from_json(row));
  }
  return out;
}

}  // namespace selfcheck
