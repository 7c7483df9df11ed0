#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "selfcheck/checker.hpp"
#include "selfcheck/parsing.hpp"
#include "test_support.hpp"

using namespace selfcheck;
using testing_support::FunctionBackend;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

double oracle(double lambda_neg, double lambda_zero, int n_neg, int n_zero) {
  const Big x = -Big(lambda_neg) * n_neg - Big(lambda_zero) * n_zero;
  return static_cast<double>(Big(2) / (Big(1) + exp(-x)));
}

std::vector<Verdict> verdicts_of(int n_pos, int n_neg, int n_zero) {
  std::vector<Verdict> v;
  v.insert(v.end(), n_pos, Verdict::support);
  v.insert(v.end(), n_neg, Verdict::contradict);
  v.insert(v.end(), n_zero, Verdict::unrelated);
  return v;
}

Question tan_question() {
  return Question{"q1", "Let x be an angle with sin x = cos x. Find tan^2 x.", std::nullopt,
                  DatasetKind::freeform_math};
}

// Each step names the verdict the comparison stage should return for it.
Solution scripted_solution(const std::vector<std::string>& verdict_words) {
  Solution s;
  s.question_id = "q1";
  for (std::size_t i = 0; i < verdict_words.size(); ++i) {
    s.steps.push_back({static_cast<int>(i), "step " + std::to_string(i) + " " + verdict_words[i]});
  }
  s.raw_text = "scripted";
  return s;
}

// Plays all four stages. The comparison answer is read off the step text
// quoted in the prompt; the collection answer always cites step 0 and
// information 0.
std::string scripted_reply(const CompletionRequest& r) {
  switch (r.role_tag) {
    case RoleTag::check_target:
      return "The step works out the value.";
    case RoleTag::check_collect:
      return "The next step directly follows from Step 0 and Information 0.";
    case RoleTag::check_regen:
      return "Regenerated: the value follows.";
    case RoleTag::check_compare: {
      if (r.prompt.find("supportive") != std::string::npos) return "Solution 1 supports Solution 2.";
      if (r.prompt.find("contradictory") != std::string::npos) return "So it contradicts Solution 2.";
      return "Solution 1 is not directly related to Solution 2.";
    }
    case RoleTag::check_variant: {
      // Per-step variants judge the text after "next step"; global judges all.
      const auto from = r.prompt.rfind("next step");
      if (r.prompt.find("contradictory", from == std::string::npos ? 0 : from) != std::string::npos) {
        return "There is an error. Wrong";
      }
      return "Everything checks out. Correct";
    }
    default:
      return "";
  }
}

}  // namespace

TEST_CASE("integration matches a 50-digit oracle") {
  for (double ln : {0.0, 0.3, 1.0, 5.0}) {
    for (double lz : {0.0, 0.3, 1.0, 5.0}) {
      for (int neg = 0; neg <= 20; ++neg) {
        for (int zero = 0; zero <= 20; ++zero) {
          const double got = integrate(verdicts_of(3, neg, zero), IntegrationParams{ln, lz});
          REQUIRE(std::abs(got - oracle(ln, lz, neg, zero)) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("integration reference values") {
  const IntegrationParams defaults;
  CHECK(integrate(verdicts_of(4, 0, 0), defaults) == 1.0);
  CHECK(integrate(verdicts_of(0, 1, 0), defaults) == doctest::Approx(0.5378828427399902).epsilon(1e-12));
  CHECK(integrate(verdicts_of(2, 0, 2), defaults) == doctest::Approx(0.7086873875484091).epsilon(1e-12));
  CHECK(integrate(verdicts_of(0, 2, 0), defaults) == doctest::Approx(0.2384058440442351).epsilon(1e-12));
  // Extreme counts stay strictly positive.
  CHECK(integrate(verdicts_of(0, 100000, 0), IntegrationParams{5.0, 5.0}) > 0.0);
}

TEST_CASE("four-stage check issues one call per stage and restricts context") {
  std::vector<CompletionRequest> seen;
  std::mutex mutex;
  FunctionBackend backend([&](const CompletionRequest& r) {
    std::lock_guard lock(mutex);
    seen.push_back(r);
    return scripted_reply(r);
  });
  const Question q = tan_question();
  const Solution s = scripted_solution({"supportive", "filler", "contradictory"});
  CheckerConfig config;
  config.workers = 1;
  const StepVerdict v = check_step(q, s, 2, backend, config);
  CHECK(v.value == Verdict::contradict);
  REQUIRE(v.stage_transcript.size() == 4);
  CHECK(v.stage_transcript[0].request.role_tag == RoleTag::check_target);
  CHECK(v.stage_transcript[3].request.role_tag == RoleTag::check_compare);
  const std::string& regen_prompt = v.stage_transcript[2].request.prompt;
  CHECK(regen_prompt.find("step 0 supportive") != std::string::npos);
  CHECK(regen_prompt.find("step 1 filler") == std::string::npos);
  CHECK(regen_prompt.find("Let x be an angle") != std::string::npos);
  CHECK(seen.size() == 4);
}

TEST_CASE("confidence follows the verdict counts") {
  FunctionBackend backend(scripted_reply);
  const Question q = tan_question();
  const Solution s = scripted_solution({"supportive", "contradictory", "filler", "supportive"});
  CheckerConfig config;
  const CheckedSolution c = check_solution(q, s, backend, config);
  REQUIRE(c.verdicts.size() == 4);
  CHECK(c.confidence.verdicts ==
        std::vector<Verdict>{Verdict::support, Verdict::contradict, Verdict::unrelated, Verdict::support});
  CHECK(c.confidence.value == doctest::Approx(oracle(1.0, 0.3, 1, 1)).epsilon(1e-12));
  CHECK(backend.calls() == 16);
}

TEST_CASE("ablation modes") {
  const Question q = tan_question();
  const Solution s = scripted_solution({"supportive", "contradictory", "supportive"});
  SUBCASE("global issues one call and yields one verdict") {
    FunctionBackend backend(scripted_reply);
    CheckerConfig config;
    config.mode = CheckMode::global;
    const CheckedSolution c = check_solution(q, s, backend, config);
    CHECK(backend.calls() == 1);
    REQUIRE(c.verdicts.size() == 1);
    CHECK(c.verdicts[0].value == Verdict::contradict);
    CHECK_THROWS_AS(check_step(q, s, 0, backend, config), UnsupportedVariant);
  }
  SUBCASE("single stage issues one call per step") {
    FunctionBackend backend(scripted_reply);
    CheckerConfig config;
    config.mode = CheckMode::single_stage;
    const CheckedSolution c = check_solution(q, s, backend, config);
    CHECK(backend.calls() == 3);
    CHECK(c.confidence.verdicts == std::vector<Verdict>{Verdict::support, Verdict::contradict, Verdict::support});
  }
  SUBCASE("regenerate-and-verify collects then verifies") {
    FunctionBackend backend(scripted_reply);
    CheckerConfig config;
    config.mode = CheckMode::regen_verify_zero_shot;
    const CheckedSolution c = check_solution(q, s, backend, config);
    CHECK(backend.calls() == 6);
    CHECK(c.verdicts[1].value == Verdict::contradict);
  }
  SUBCASE("one-shot needs an exemplar file") {
    FunctionBackend backend(scripted_reply);
    CheckerConfig config;
    config.mode = CheckMode::regen_verify_one_shot;
    CHECK_THROWS_AS(check_solution(q, s, backend, config), UnsupportedVariant);
    TempDir dir("exemplar");
    write_file(dir / "ex.txt", "WORKED EXAMPLE\n");
    config.exemplar_path = (dir / "ex.txt").string();
    const CheckedSolution c = check_solution(q, s, backend, config);
    CHECK(c.verdicts[0].stage_transcript.back().request.prompt.rfind("WORKED EXAMPLE", 0) == 0);
    config.exemplar_path = (dir / "missing.txt").string();
    CHECK_THROWS_AS(check_solution(q, s, backend, config), MissingInput);
  }
}

TEST_CASE("stage failures") {
  const Question q = tan_question();
  const Solution s = scripted_solution({"supportive", "supportive", "supportive"});
  auto failing = [](const CompletionRequest& r) -> std::string {
    if (r.role_tag == RoleTag::check_collect && r.prompt.find("next step step 1") != std::string::npos) {
      throw TransportError("connection reset");
    }
    return scripted_reply(r);
  };
  SUBCASE("abort with the partial transcript") {
    FunctionBackend backend(failing);
    CheckerConfig config;
    config.workers = 1;
    try {
      check_solution(q, s, backend, config);
      FAIL("expected ProviderFailure");
    } catch (const ProviderFailure& e) {
      CHECK(e.step_index == 1);
      CHECK(e.transcript.size() == 1);
    }
  }
  SUBCASE("tolerated failures become neutral verdicts") {
    FunctionBackend backend(failing);
    CheckerConfig config;
    config.tolerate_failures = true;
    const CheckedSolution c = check_solution(q, s, backend, config);
    CHECK(c.confidence.verdicts == std::vector<Verdict>{Verdict::support, Verdict::unrelated, Verdict::support});
    CHECK(c.verdicts[1].stage_transcript.size() == 1);
  }
  SUBCASE("empty regeneration is a failure") {
    FunctionBackend backend([](const CompletionRequest& r) {
      return r.role_tag == RoleTag::check_regen ? std::string("  \n") : scripted_reply(r);
    });
    CHECK_THROWS_AS(check_solution(q, s, backend, CheckerConfig{}), ProviderFailure);
  }
  SUBCASE("solution without steps") {
    FunctionBackend backend(scripted_reply);
    Solution empty = s;
    empty.steps.clear();
    CHECK_THROWS_AS(check_solution(q, empty, backend, CheckerConfig{}), EmptySolution);
  }
}

TEST_CASE("batch results keep job order under concurrency") {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  FunctionBackend backend([&](const CompletionRequest& r) {
    const int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
    --in_flight;
    return scripted_reply(r);
  });
  const Question q = tan_question();
  std::vector<Solution> solutions;
  for (int i = 0; i < 12; ++i) {
    solutions.push_back(scripted_solution({i % 2 ? "contradictory" : "supportive", "supportive"}));
    solutions.back().sample_index = i;
  }
  std::vector<CheckJob> jobs;
  for (const auto& s : solutions) jobs.push_back({&q, &s});
  CheckerConfig config;
  config.workers = 4;
  const auto results = check_solutions(jobs, backend, config);
  REQUIRE(results.size() == 12);
  for (int i = 0; i < 12; ++i) {
    CHECK(results[i].solution.sample_index == i);
    CHECK(results[i].verdicts[0].value == (i % 2 ? Verdict::contradict : Verdict::support));
  }
  CHECK(peak.load() <= 4);
}

TEST_CASE("checked solutions round trip through json") {
  FunctionBackend backend(scripted_reply);
  const Question q = tan_question();
  Solution s = scripted_solution({"supportive", "contradictory"});
  s.extracted_answer = normalize_answer("1", DatasetKind::freeform_math);
  s.sample_index = 7;
  const CheckedSolution c = check_solution(q, s, backend, CheckerConfig{});
  for (bool full : {false, true}) {
    const CheckedSolution back = checked_from_json(nlohmann::json::parse(checked_to_json(c, full).dump()));
    CHECK(back.solution.question_id == "q1");
    CHECK(back.solution.sample_index == 7);
    CHECK(back.confidence.value == c.confidence.value);
    CHECK(back.confidence.verdicts == c.confidence.verdicts);
    CHECK(back.mode == c.mode);
    REQUIRE(back.solution.extracted_answer);
    CHECK(back.solution.extracted_answer->canonical == "1");
    if (full) {
      CHECK(back.verdicts[1].stage_transcript == c.verdicts[1].stage_transcript);
      CHECK(back.solution.steps == c.solution.steps);
    }
  }
}

TEST_CASE("check mode names") {
  for (auto m : {CheckMode::selfcheck, CheckMode::global, CheckMode::single_stage,
                 CheckMode::regen_verify_zero_shot, CheckMode::regen_verify_one_shot}) {
    CHECK(check_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(check_mode_from_string("bogus"), ConfigError);
}
