#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfcheck/model.hpp"

namespace selfcheck {

nlohmann::ordered_json answer_to_json(const std::optional<NormalizedAnswer>& a);
std::optional<NormalizedAnswer> answer_from_json(const nlohmann::json& j);

// Dataset line: {"id", "question", "answer", "kind"}; "answer" may be a
// string or a number and is normalized for the given kind.
Question question_from_json(const nlohmann::json& j);
nlohmann::ordered_json question_to_json(const Question& q,
                                        const std::string& raw_answer);

struct SolutionLine {
  std::string question_id;
  int sample_index = 0;
  std::string text;
};

nlohmann::ordered_json solution_line_to_json(const SolutionLine& line);
SolutionLine solution_line_from_json(const nlohmann::json& j);

// Parses steps (answer lines removed) and extracts the final answer.
// Throws EmptySolution when the text has no steps.
Solution make_solution(const SolutionLine& line, DatasetKind kind);

// JSON-lines readers; blank lines are skipped. Throw MissingInput when the
// file cannot be opened.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::vector<Question> read_questions(const std::filesystem::path& path);
std::vector<SolutionLine> read_solution_lines(const std::filesystem::path& path);

}  // namespace selfcheck
