#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "selfcheck/model.hpp"

namespace selfcheck {

struct CollectedRefs {
  std::set<int> step_ids;
  std::set<int> info_ids;

  bool operator==(const CollectedRefs&) const = default;
};

// Finds "step 3", "steps 1, 2 and 4", "Steps 1-3", "information 0" (and
// "info 0") references, case-insensitively. Ids >= n_steps / n_info are
// dropped with a warning.
CollectedRefs extract_ids(std::string_view text, int n_steps, int n_info);

struct VerdictMatch {
  Verdict value = Verdict::unrelated;
  std::string matched_phrase;  // empty when nothing matched
};

// Last of "support(s)", "contradict(s)", "(is) not directly related (to)"
// wins; no phrase at all means Verdict::unrelated.
VerdictMatch extract_verdict(std::string_view text);

enum class Conclusion { correct, wrong, not_sure };

std::string_view to_string(Conclusion c);
Verdict to_verdict(Conclusion c);

// Last standalone "Correct" / "Wrong" / "Not Sure"; not_sure when absent.
Conclusion extract_conclusion(std::string_view text);

// Canonical answer for a dataset kind. Throws Unparseable when nothing
// usable is found.
NormalizedAnswer normalize_answer(std::string_view raw, DatasetKind kind);
std::optional<NormalizedAnswer> try_normalize_answer(std::string_view raw,
                                                     DatasetKind kind);

// Shortest decimal string that round-trips to `value` ("1200", "0.5").
std::string canonical_number(double value);

// Pulls the final answer out of a generated solution: the last "Answer:" line
// if present, otherwise the last number (numeric), the last option letter
// (multiple choice) or the last \boxed{...} / last line (freeform).
std::optional<NormalizedAnswer> extract_final_answer(std::string_view raw_text,
                                                     DatasetKind kind);

// Solution text with any "Answer:" line removed; what the steps are parsed
// from.
std::string strip_answer_lines(std::string_view raw_text);

}  // namespace selfcheck
