// Records the tan^2 x replay fixture used by the checker tests: a dataset
// line, one solution, and a completion record for every stage call the
// four-stage checker makes on it. Rerun after changing any prompt template.
//
//   make_replay_fixture <output-dir>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "selfcheck/checker.hpp"
#include "selfcheck/io.hpp"
#include "selfcheck/provider.hpp"

namespace fs = std::filesystem;
using namespace selfcheck;

namespace {

constexpr const char* kQuestion =
    "The angle x satisfies 3 sin x = 3 cos x. The value cos x is not zero. Compute tan^2 x.";

constexpr const char* kSolution =
    "Step 0: Divide both sides of 3 sin x = 3 cos x by 3 to get sin x = cos x.\n"
    "Step 1: Since cos x is not zero, we may divide by cos x.\n"
    "Step 2: Dividing sin x = cos x by cos x gives tan x = 1.\n"
    "Step 3: Squaring a number equal to 1 gives 1, so (tan x)^2 = 1^2.\n"
    "Step 4: Combining the results from steps 2 and 3, tan^2 x = 1.\n"
    "Answer: 1";

// Scripted model answers, keyed on which step the prompt is about.
class ScriptedModel : public Backend {
 public:
  CompletionRecord complete(const CompletionRequest& request) override {
    CompletionRecord record;
    record.request = request;
    record.response_text = reply(request);
    record.cache_key = cache_key(request);
    return record;
  }

 private:
  // The regeneration prompt carries the extracted target instead of the step.
  static bool about_last_step(const CompletionRequest& r) {
    return r.prompt.find("Combining the results") != std::string::npos ||
           r.prompt.find("concludes the value of tan^2 x") != std::string::npos;
  }

  static std::string reply(const CompletionRequest& r) {
    const bool last = about_last_step(r);
    switch (r.role_tag) {
      case RoleTag::check_target:
        return last ? "The step concludes the value of tan^2 x from tan x = 1 and the squaring."
                    : "The step rewrites the given relation.";
      case RoleTag::check_collect:
        return last ? "The next step directly follows from Step 2 and Step 3."
                    : "The next step directly follows from Information 0 and Information 1.";
      case RoleTag::check_regen:
        return last ? "From Step 2 we have tan x = 1. Squaring as in Step 3, tan^2 x = 1^2 = 1."
                    : "Rewriting the relation gives the same statement.";
      case RoleTag::check_compare:
        return last ? "Both solutions reach tan^2 x = 1 from tan x = 1. Therefore, Solution 1 supports "
                      "the conclusion in Solution 2."
                    : "The key points agree, so Solution 1 supports the conclusion in Solution 2.";
      default:
        throw std::runtime_error("unexpected stage call");
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_replay_fixture <output-dir>\n";
    return 2;
  }
  const fs::path out = argv[1];
  fs::create_directories(out / "records");
  for (const auto& entry : fs::directory_iterator(out / "records")) fs::remove(entry.path());

  std::ofstream(out / "questions.jsonl")
      << nlohmann::json{{"id", "tan_squared"}, {"question", kQuestion}, {"answer", "1"}, {"kind", "freeform_math"}}
             .dump()
      << '\n';
  const SolutionLine line{"tan_squared", 0, kSolution};
  std::ofstream(out / "solutions.jsonl") << solution_line_to_json(line).dump() << '\n';

  const Question question = question_from_json(read_jsonl(out / "questions.jsonl").front());
  const Solution solution = make_solution(line, question.dataset_kind);
  ScriptedModel model;
  CachingBackend recorder(model, out / "records");
  const CheckedSolution checked = check_solution(question, solution, recorder, CheckerConfig{});
  std::cout << "recorded " << recorder.keys().size() << " completions; confidence "
            << checked.confidence.value << '\n';
  return 0;
}
