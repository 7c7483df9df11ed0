#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "selfcheck/errors.hpp"
#include "selfcheck/prompts.hpp"
#include "fixtures.hpp"
#include "test_support.hpp"

using namespace selfcheck;
using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

const std::filesystem::path kGoldenDir = std::filesystem::path(SELFCHECK_TEST_DATA) / "golden";

StageContext placeholder_context() {
  StageContext ctx;
  ctx.question = Question{"q", "[Q]", std::nullopt, DatasetKind::freeform_math};
  ctx.information = {{0, "[I0]"}, {1, "[I1]"}};
  ctx.prior_steps = {{0, "[S0]"}, {1, "[S1]"}};
  ctx.current_step = Step{2, "[S2]"};
  ctx.target = "[T]";
  ctx.regeneration_output = "[R]";
  return ctx;
}

// Set SELFCHECK_UPDATE_GOLDEN=1 to rewrite the files after an intended change.
void check_golden(const std::string& name, const std::string& rendered) {
  const auto path = kGoldenDir / (name + ".txt");
  if (std::getenv("SELFCHECK_UPDATE_GOLDEN") != nullptr) write_file(path, rendered);
  REQUIRE_MESSAGE(std::filesystem::exists(path), "missing golden " << path);
  CHECK_MESSAGE(read_file(path) == rendered, "golden mismatch for " << name);
}

}  // namespace

TEST_CASE("rendered prompts match the golden files") {
  const auto rendered = testing_support::render_placeholder_prompts();
  CHECK(rendered.size() == kTemplateCount);
  for (const auto& [name, text] : rendered) check_golden(name, text);
}

TEST_CASE("step and information lines are numbered by position") {
  const std::vector<Step> steps = {{4, "a"}, {9, "b"}};
  CHECK(format_step_lines(steps) == "Step 0: a\nStep 1: b");
  const std::vector<InformationItem> info = {{3, "x"}};
  CHECK(format_information_lines(info) == "Information 0: x");
}

TEST_CASE("substitute is a single pass") {
  CHECK(substitute("{a}-{b}", {{"a", "{b}"}, {"b", "2"}}) == "{b}-2");
  CHECK(substitute("set {1, 2} and {}", {}) == "set {1, 2} and {}");
  CHECK_THROWS_AS(substitute("{missing}", {}), TemplateError);
}

TEST_CASE("regeneration collapses a multi-line target") {
  StageContext ctx = placeholder_context();
  ctx.target = "line one\nline two";
  const std::string prompt = render_regeneration(ctx);
  CHECK(prompt.find("line one line two") != std::string::npos);
}

TEST_CASE("one-shot variant needs an exemplar") {
  const StageContext ctx = placeholder_context();
  CHECK_THROWS_AS(render_variant(VariantKind::regen_verify_one_shot, ctx), UnsupportedVariant);
  const std::string zero = render_variant(VariantKind::regen_verify_zero_shot, ctx);
  const std::string one =
      render_variant(VariantKind::regen_verify_one_shot, ctx, TemplateSet::builtin(), "EXAMPLE");
  CHECK(one.rfind("EXAMPLE", 0) == 0);
  CHECK(one.find(zero) != std::string::npos);
}

TEST_CASE("template directory overrides the built-in set") {
  TempDir dir("templates");
  for (std::size_t i = 0; i < kTemplateCount; ++i) {
    const auto id = static_cast<TemplateId>(i);
    write_file(dir / (std::string(template_name(id)) + ".txt"), TemplateSet::builtin().text(id));
  }
  write_file(dir / "generator.txt", "Solve: {question}");
  const TemplateSet set = TemplateSet::load_directory(dir.path());
  CHECK(render_generator(Question{"q", "1+1", std::nullopt, DatasetKind::numeric}, set) == "Solve: 1+1");
  std::filesystem::remove(dir / "comparison.txt");
  CHECK_THROWS(TemplateSet::load_directory(dir.path()));
}

TEST_CASE("built-in templates equal the asset files") {
  const auto assets = std::filesystem::path(SELFCHECK_TEST_DATA) / ".." / ".." / "prompts";
  const TemplateSet loaded = TemplateSet::load_directory(assets);
  for (std::size_t i = 0; i < kTemplateCount; ++i) {
    const auto id = static_cast<TemplateId>(i);
    CAPTURE(template_name(id));
    CHECK(TemplateSet::builtin().text(id) == loaded.text(id));
    CHECK(read_file(assets / (std::string(template_name(id)) + ".txt")) == loaded.text(id) + "\n");
  }
}
