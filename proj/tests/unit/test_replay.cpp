#include <doctest.h>

#include "selfcheck/checker.hpp"
#include "selfcheck/io.hpp"

using namespace selfcheck;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(SELFCHECK_TEST_DATA) / "tan_replay";

struct Fixture {
  Question question;
  Solution solution;
};

Fixture load_fixture() {
  const Question q = read_questions(kFixture / "questions.jsonl").front();
  const SolutionLine line = read_solution_lines(kFixture / "solutions.jsonl").front();
  return {q, make_solution(line, q.dataset_kind)};
}

}  // namespace

TEST_CASE("replayed check of the combining step") {
  const Fixture f = load_fixture();
  REQUIRE(f.solution.steps.size() == 5);
  CHECK(f.solution.steps[4].text == "Combining the results from steps 2 and 3, tan^2 x = 1.");

  ReplayBackend replay(kFixture / "records");
  const StepVerdict v = check_step(f.question, f.solution, 4, replay, CheckerConfig{});
  CHECK(v.value == Verdict::support);
  REQUIRE(v.stage_transcript.size() == 4);

  // Collection cites steps 2 and 3; regeneration sees only those, renumbered.
  const std::string& regen = v.stage_transcript[2].request.prompt;
  CHECK(regen.find("Step 0: " + f.solution.steps[2].text) != std::string::npos);
  CHECK(regen.find("Step 1: " + f.solution.steps[3].text) != std::string::npos);
  CHECK(regen.find(f.solution.steps[0].text) == std::string::npos);
  CHECK(regen.find(f.solution.steps[1].text) == std::string::npos);
  CHECK(regen.find("Information") == std::string::npos);
  CHECK(v.stage_transcript[3].response_text.find("supports") != std::string::npos);
}

TEST_CASE("replaying the whole solution is deterministic and offline") {
  const Fixture f = load_fixture();
  ReplayBackend replay(kFixture / "records");
  const CheckedSolution a = check_solution(f.question, f.solution, replay, CheckerConfig{});
  const CheckedSolution b = check_solution(f.question, f.solution, replay, CheckerConfig{});
  CHECK(a.confidence.value == 1.0);
  CHECK(checked_to_json(a, true).dump() == checked_to_json(b, true).dump());
  CHECK(f.solution.extracted_answer->canonical == f.question.gold_answer->canonical);

  CheckerConfig other;
  other.mode = CheckMode::single_stage;
  CHECK_THROWS_AS(check_solution(f.question, f.solution, replay, other), ProviderFailure);
}
