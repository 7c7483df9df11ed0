#include "selfcheck/model.hpp"

#include <array>
#include <cmath>
#include <regex>
#include <stdexcept>

#include "selfcheck/errors.hpp"
#include "selfcheck/text.hpp"

namespace selfcheck {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::numeric: return "numeric";
    case DatasetKind::multiple_choice: return "multiple_choice";
    case DatasetKind::freeform_math: return "freeform_math";
  }
  return "numeric";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
  if (name == "numeric") return DatasetKind::numeric;
  if (name == "multiple_choice") return DatasetKind::multiple_choice;
  if (name == "freeform_math") return DatasetKind::freeform_math;
  throw std::invalid_argument("unknown dataset kind: " + std::string(name));
}

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::number: return "number";
    case AnswerKind::option_letter: return "option_letter";
    case AnswerKind::text: return "text";
  }
  return "text";
}

AnswerKind answer_kind_from_string(std::string_view name) {
  if (name == "number") return AnswerKind::number;
  if (name == "option_letter") return AnswerKind::option_letter;
  if (name == "text") return AnswerKind::text;
  throw std::invalid_argument("unknown answer kind: " + std::string(name));
}

bool numbers_match(double a, double b) {
  const double diff = std::fabs(a - b);
  if (diff <= 1e-9) return true;
  return diff <= 1e-6 * std::max(std::fabs(a), std::fabs(b));
}

bool operator==(const NormalizedAnswer& a, const NormalizedAnswer& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == AnswerKind::number && a.numeric_value && b.numeric_value) {
    return a.canonical == b.canonical ||
           numbers_match(*a.numeric_value, *b.numeric_value);
  }
  return a.canonical == b.canonical;
}

Verdict verdict_from_int(int value) {
  switch (value) {
    case -1: return Verdict::contradict;
    case 0: return Verdict::unrelated;
    case 1: return Verdict::support;
  }
  throw std::invalid_argument("verdict out of range: " +
                              std::to_string(value));
}

std::string_view to_string(RoleTag tag) {
  switch (tag) {
    case RoleTag::generate: return "generate";
    case RoleTag::check_target: return "check_target";
    case RoleTag::check_collect: return "check_collect";
    case RoleTag::check_regen: return "check_regen";
    case RoleTag::check_compare: return "check_compare";
    case RoleTag::check_variant: return "check_variant";
  }
  return "generate";
}

RoleTag role_tag_from_string(std::string_view name) {
  static constexpr std::array<RoleTag, 6> kAll = {
      RoleTag::generate,      RoleTag::check_target, RoleTag::check_collect,
      RoleTag::check_regen,   RoleTag::check_compare, RoleTag::check_variant};
  for (RoleTag tag : kAll) {
    if (to_string(tag) == name) return tag;
  }
  throw std::invalid_argument("unknown role tag: " + std::string(name));
}

namespace {

bool is_abbreviation(std::string_view text, std::size_t period) {
  static constexpr std::array<std::string_view, 5> kAbbreviations = {
      "mr", "mrs", "dr", "e.g", "i.e"};
  std::size_t begin = period;
  while (begin > 0 && !text::is_space(text[begin - 1])) --begin;
  std::string_view word = text.substr(begin, period - begin);
  while (!word.empty() && !text::is_alpha(word.front())) word.remove_prefix(1);
  const std::string lowered = text::to_lower(word);
  for (std::string_view abbr : kAbbreviations) {
    if (lowered == abbr) return true;
  }
  return false;
}

}  // namespace

std::vector<InformationItem> split_into_information(std::string_view text) {
  std::vector<InformationItem> items;
  auto emit = [&](std::string_view piece) {
    piece = text::trim(piece);
    if (piece.empty()) return;
    items.push_back({static_cast<int>(items.size()), std::string(piece)});
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    // A boundary needs whitespace right after the mark, so "3.50" (digit on
    // both sides) is never split.
    if (i + 1 >= text.size() || !text::is_space(text[i + 1])) continue;
    std::size_t next = i + 1;
    while (next < text.size() && text::is_space(text[next])) ++next;
    if (next >= text.size()) continue;
    if (!text::is_upper(text[next]) && !text::is_digit(text[next])) continue;
    if (c == '.' && is_abbreviation(text, i)) continue;
    emit(text.substr(start, i + 1 - start));
    start = next;
    i = next - 1;
  }
  emit(text.substr(start));
  return items;
}

std::vector<InformationItem> split_into_information(const Question& question) {
  return split_into_information(question.text);
}

std::vector<Step> parse_solution_steps(std::string_view raw_text) {
  static const std::regex kPrefix(
      R"(^\s*(?:step\s*\d+\s*[:.)]|\d+\s*[.)](?=\s))\s*)",
      std::regex::ECMAScript | std::regex::icase);
  std::vector<Step> steps;
  for (std::string_view line : text::split_lines(raw_text)) {
    std::string stripped = std::regex_replace(
        std::string(text::trim(line)), kPrefix, "",
        std::regex_constants::format_first_only);
    std::string_view body = text::trim(stripped);
    if (body.empty()) continue;
    steps.push_back({static_cast<int>(steps.size()), std::string(body)});
  }
  if (steps.empty()) throw EmptySolution("solution text has no steps");
  return steps;
}

}  // namespace selfcheck
