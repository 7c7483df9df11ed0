#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfcheck/completion.hpp"

namespace selfcheck {

enum class DatasetKind { numeric, multiple_choice, freeform_math };

std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);

enum class AnswerKind { number, option_letter, text };

std::string_view to_string(AnswerKind kind);
AnswerKind answer_kind_from_string(std::string_view name);

// An answer in canonical form. Numbers compare with a relative tolerance of
// 1e-6 (absolute 1e-9 near zero); everything else compares by canonical text.
struct NormalizedAnswer {
  AnswerKind kind = AnswerKind::text;
  std::string canonical;
  std::optional<double> numeric_value;  // present iff kind == number

  friend bool operator==(const NormalizedAnswer& a, const NormalizedAnswer& b);
};

bool numbers_match(double a, double b);

struct Question {
  std::string id;
  std::string text;
  std::optional<NormalizedAnswer> gold_answer;
  DatasetKind dataset_kind = DatasetKind::numeric;
};

struct InformationItem {
  int index = 0;
  std::string sentence;

  bool operator==(const InformationItem&) const = default;
};

struct Step {
  int index = 0;
  std::string text;

  bool operator==(const Step&) const = default;
};

struct Solution {
  std::string question_id;
  std::vector<Step> steps;
  std::string raw_text;
  std::optional<NormalizedAnswer> extracted_answer;
  int sample_index = 0;
};

// Outcome of comparing a regenerated step with the original one. No other
// value is representable.
enum class Verdict : int { contradict = -1, unrelated = 0, support = 1 };

constexpr int to_int(Verdict v) { return static_cast<int>(v); }
// Throws std::invalid_argument outside {-1, 0, 1}.
Verdict verdict_from_int(int value);

struct StepVerdict {
  int step_index = 0;
  Verdict value = Verdict::unrelated;
  std::vector<CompletionRecord> stage_transcript;
};

struct IntegrationParams {
  double lambda_neg = 1.0;   // weight of contradicted steps
  double lambda_zero = 0.3;  // weight of undecided steps

  bool operator==(const IntegrationParams&) const = default;
};

struct ConfidenceScore {
  double value = 1.0;  // in (0, 1]
  std::vector<Verdict> verdicts;
};

// Splits question text into sentences on '.', '?' or '!' followed by
// whitespace and an uppercase letter or digit. Abbreviations (Mr., Mrs., Dr.,
// e.g., i.e.) and decimal points never end a sentence.
std::vector<InformationItem> split_into_information(std::string_view text);
std::vector<InformationItem> split_into_information(const Question& question);

// One step per non-empty line, with "Step k:" / "k." / "k)" prefixes removed.
// Throws EmptySolution when there is no non-empty line.
std::vector<Step> parse_solution_steps(std::string_view raw_text);

}  // namespace selfcheck
