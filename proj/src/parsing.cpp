#include "selfcheck/parsing.hpp"

#include <charconv>
#include <cmath>
#include <regex>

#include <spdlog/spdlog.h>

#include "selfcheck/errors.hpp"
#include "selfcheck/text.hpp"

namespace selfcheck {

namespace {

constexpr auto kIcase = std::regex::ECMAScript | std::regex::icase;

// One id or an inclusive range "a-b" / "a to b".
const std::string kIdItem = R"(\d+(?:\s*(?:-|–|to|through)\s*\d+)?)";
const std::string kIdSeparator = R"(\s*(?:,\s*(?:and\s+|or\s+)?|and\s+|or\s+|&\s*))";

void add_ids(std::string_view list, int limit, std::set<int>& out,
             bool& dropped) {
  static const std::regex kItem(R"((\d+)(?:\s*(?:-|–|to|through)\s*(\d+))?)",
                                kIcase);
  const std::string owned(list);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), kItem);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    // Ids beyond `limit` are discarded anyway, so clamp before parsing to
    // keep absurd numbers from overflowing.
    auto parse = [&](const std::string& digits) {
      if (digits.size() > 6) return limit + 1;
      return std::stoi(digits);
    };
    int lo = parse(m[1].str());
    int hi = m[2].matched ? parse(m[2].str()) : lo;
    if (lo > hi) std::swap(lo, hi);
    if (hi >= limit) dropped = true;
    for (int id = lo; id <= std::min(hi, limit - 1); ++id) out.insert(id);
  }
}

std::string remove_thousands_separators(std::string_view raw) {
  static const std::regex kComma(R"((\d),(?=\d))");
  return std::regex_replace(std::string(raw), kComma, "$1");
}

std::string strip_currency(std::string s) {
  for (std::string_view symbol : {"$", "€", "£", "¥"}) {
    for (auto pos = s.find(symbol); pos != std::string::npos;
         pos = s.find(symbol, pos)) {
      s.erase(pos, symbol.size());
    }
  }
  return s;
}

const std::regex& number_regex() {
  static const std::regex kNumber(
      R"((-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)(?:\s*/\s*(\d+(?:\.\d+)?))?)");
  return kNumber;
}

std::optional<double> parse_double(std::string token) {
  while (!token.empty() && token.back() == '.') token.pop_back();
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    return std::nullopt;
  }
  return value;
}

std::optional<double> number_from_match(const std::smatch& m) {
  auto value = parse_double(m[1].str());
  if (!value) return std::nullopt;
  if (m[2].matched) {
    auto denominator = parse_double(m[2].str());
    if (denominator && *denominator != 0.0) return *value / *denominator;
  }
  return value;
}

NormalizedAnswer number_answer(double value) {
  if (!std::isfinite(value)) throw Unparseable("number is not finite");
  return {AnswerKind::number, canonical_number(value), value};
}

NormalizedAnswer normalize_numeric(std::string_view raw) {
  const std::string cleaned =
      strip_currency(remove_thousands_separators(raw));
  std::smatch m;
  if (!std::regex_search(cleaned, m, number_regex())) {
    throw Unparseable("no number in answer: " + std::string(raw));
  }
  auto value = number_from_match(m);
  if (!value) throw Unparseable("bad number in answer: " + std::string(raw));
  return number_answer(*value);
}

NormalizedAnswer normalize_option(std::string_view raw) {
  static const std::regex kParenthesized(R"(\(\s*([a-e])\s*\))", kIcase);
  static const std::regex kStandalone(R"(\b([a-e])\b)", kIcase);
  const std::string s(raw);
  std::smatch m;
  if (std::regex_search(s, m, kParenthesized) ||
      std::regex_search(s, m, kStandalone)) {
    return {AnswerKind::option_letter, text::to_lower(m[1].str()),
            std::nullopt};
  }
  throw Unparseable("no option letter in answer: " + s);
}

// Index of the brace closing the one at `open`, or npos.
std::size_t matching_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

NormalizedAnswer normalize_freeform(std::string_view raw) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  std::string s = text::collapse_whitespace(raw);
  for (bool changed = true; changed;) {
    changed = false;
    std::string_view v = s;
    if (v.size() >= 4 && v.starts_with("$$") && v.ends_with("$$")) {
      v = v.substr(2, v.size() - 4);
      changed = true;
    } else if (v.size() >= 2 && v.front() == '$' && v.back() == '$') {
      v = v.substr(1, v.size() - 2);
      changed = true;
    } else if (v.starts_with(kBoxed) &&
               matching_brace(v, kBoxed.size() - 1) == v.size() - 1) {
      v = v.substr(kBoxed.size(), v.size() - kBoxed.size() - 1);
      changed = true;
    }
    if (changed) s = text::collapse_whitespace(v);
  }
  if (s.empty()) throw Unparseable("empty answer");
  return {AnswerKind::text, s, std::nullopt};
}

const std::regex& answer_line_regex() {
  static const std::regex kAnswerLine(
      R"(^\s*(?:the\s+)?(?:final\s+)?answer\s*(?:is)?\s*:\s*(.*)$)", kIcase);
  return kAnswerLine;
}

std::optional<std::string> last_boxed(std::string_view s) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  const auto pos = s.rfind(kBoxed);
  if (pos == std::string_view::npos) return std::nullopt;
  const auto close = matching_brace(s, pos + kBoxed.size() - 1);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(s.substr(pos + kBoxed.size(), close - pos - kBoxed.size()));
}

}  // namespace

CollectedRefs extract_ids(std::string_view text, int n_steps, int n_info) {
  static const std::regex kReference(
      R"(\b(steps?|information|info)\s*()" + kIdItem + "(?:" + kIdSeparator +
          kIdItem + ")*)",
      kIcase);
  CollectedRefs refs;
  bool dropped = false;
  const std::string owned(text);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), kReference);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const bool is_step = text::to_lower(m[1].str()).starts_with("step");
    add_ids(m[2].str(), is_step ? n_steps : n_info,
            is_step ? refs.step_ids : refs.info_ids, dropped);
  }
  if (dropped) {
    spdlog::warn("dropped out-of-range ids (steps < {}, information < {})",
                 n_steps, n_info);
  }
  return refs;
}

VerdictMatch extract_verdict(std::string_view text) {
  static const std::regex kPhrase(
      R"(\b(supports?|contradicts?|(?:is\s+)?not\s+directly\s+related(?:\s+to)?)\b)",
      kIcase);
  VerdictMatch result;
  const std::string owned(text);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), kPhrase);
       it != std::sregex_iterator(); ++it) {
    result.matched_phrase = (*it)[1].str();
  }
  const std::string lowered = text::to_lower(result.matched_phrase);
  if (lowered.starts_with("support")) {
    result.value = Verdict::support;
  } else if (lowered.starts_with("contradict")) {
    result.value = Verdict::contradict;
  } else {
    result.value = Verdict::unrelated;
  }
  return result;
}

std::string_view to_string(Conclusion c) {
  switch (c) {
    case Conclusion::correct: return "correct";
    case Conclusion::wrong: return "wrong";
    case Conclusion::not_sure: return "not_sure";
  }
  return "not_sure";
}

Verdict to_verdict(Conclusion c) {
  switch (c) {
    case Conclusion::correct: return Verdict::support;
    case Conclusion::wrong: return Verdict::contradict;
    case Conclusion::not_sure: return Verdict::unrelated;
  }
  return Verdict::unrelated;
}

Conclusion extract_conclusion(std::string_view text) {
  static const std::regex kWord(R"(\b(correct|wrong|not\s+sure)\b)", kIcase);
  Conclusion result = Conclusion::not_sure;
  const std::string owned(text);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), kWord);
       it != std::sregex_iterator(); ++it) {
    const std::string word = text::to_lower((*it)[1].str());
    if (word == "correct") {
      result = Conclusion::correct;
    } else if (word == "wrong") {
      result = Conclusion::wrong;
    } else {
      result = Conclusion::not_sure;
    }
  }
  return result;
}

std::string canonical_number(double value) {
  if (value == 0.0) value = 0.0;  // folds -0
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw Unparseable("cannot format number");
  return std::string(buffer, ptr);
}

NormalizedAnswer normalize_answer(std::string_view raw, DatasetKind kind) {
  switch (kind) {
    case DatasetKind::numeric: return normalize_numeric(raw);
    case DatasetKind::multiple_choice: return normalize_option(raw);
    case DatasetKind::freeform_math: return normalize_freeform(raw);
  }
  throw Unparseable("unknown dataset kind");
}

std::optional<NormalizedAnswer> try_normalize_answer(std::string_view raw,
                                                     DatasetKind kind) {
  try {
    return normalize_answer(raw, kind);
  } catch (const Unparseable&) {
    return std::nullopt;
  }
}

std::string strip_answer_lines(std::string_view raw_text) {
  std::string out;
  for (std::string_view line : text::split_lines(raw_text)) {
    if (std::regex_match(std::string(line), answer_line_regex())) continue;
    if (!out.empty()) out.push_back('\n');
    out += line;
  }
  return out;
}

std::optional<NormalizedAnswer> extract_final_answer(std::string_view raw_text,
                                                     DatasetKind kind) {
  const auto lines = text::split_lines(raw_text);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::smatch m;
    const std::string line(*it);
    if (std::regex_match(line, m, answer_line_regex())) {
      return try_normalize_answer(m[1].str(), kind);
    }
  }

  switch (kind) {
    case DatasetKind::numeric: {
      const std::string cleaned =
          strip_currency(remove_thousands_separators(raw_text));
      std::optional<double> last;
      for (auto it = std::sregex_iterator(cleaned.begin(), cleaned.end(),
                                          number_regex());
           it != std::sregex_iterator(); ++it) {
        if (auto v = number_from_match(*it)) last = v;
      }
      if (!last || !std::isfinite(*last)) return std::nullopt;
      return number_answer(*last);
    }
    case DatasetKind::multiple_choice: {
      static const std::regex kLetter(R"(\(\s*([a-e])\s*\))", kIcase);
      const std::string owned(raw_text);
      std::optional<NormalizedAnswer> last;
      for (auto it = std::sregex_iterator(owned.begin(), owned.end(), kLetter);
           it != std::sregex_iterator(); ++it) {
        last = NormalizedAnswer{AnswerKind::option_letter,
                                text::to_lower((*it)[1].str()), std::nullopt};
      }
      if (last) return last;
      break;
    }
    case DatasetKind::freeform_math:
      if (auto boxed = last_boxed(raw_text)) {
        return try_normalize_answer(*boxed, kind);
      }
      break;
  }
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!text::trim(*it).empty()) return try_normalize_answer(*it, kind);
  }
  return std::nullopt;
}

}  // namespace selfcheck
