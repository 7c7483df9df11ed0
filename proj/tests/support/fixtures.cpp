#include "fixtures.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "selfcheck/errors.hpp"
#include "selfcheck/parsing.hpp"
#include "selfcheck/prompts.hpp"

using namespace selfcheck;
using nlohmann::json;

namespace testing_support {

std::vector<json> load_parsing_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("fixture file not found: " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::optional<std::string> run_parsing_fixture(const json& f) {
  const std::string fn = f.at("fn");
  const std::string input = f.at("input");
  const json& expected = f.at("expected");
  std::ostringstream got;
  bool ok = false;
  if (fn == "extract_ids") {
    const CollectedRefs refs = extract_ids(input, f.at("n_steps"), f.at("n_info"));
    ok = refs.step_ids == expected.at("steps").get<std::set<int>>() &&
         refs.info_ids == expected.at("info").get<std::set<int>>();
    got << json{{"steps", refs.step_ids}, {"info", refs.info_ids}}.dump();
  } else if (fn == "extract_verdict") {
    const int v = to_int(extract_verdict(input).value);
    ok = v == expected.get<int>();
    got << v;
  } else if (fn == "extract_conclusion") {
    const std::string_view c = to_string(extract_conclusion(input));
    ok = c == expected.get<std::string>();
    got << c;
  } else if (fn == "normalize_answer") {
    const DatasetKind kind = dataset_kind_from_string(f.at("kind").get<std::string>());
    try {
      const NormalizedAnswer a = normalize_answer(input, kind);
      ok = expected.is_object() && to_string(a.kind) == expected.at("kind").get<std::string>() &&
           a.canonical == expected.at("canonical").get<std::string>();
      got << to_string(a.kind) << ':' << a.canonical;
    } catch (const Unparseable&) {
      ok = expected == "Unparseable";
      got << "Unparseable";
    }
  } else {
    return "unknown fixture function " + fn;
  }
  if (ok) return std::nullopt;
  return fn + "(" + json(input).dump() + "): expected " + expected.dump() + ", got " + got.str();
}

std::map<std::string, std::string> render_placeholder_prompts() {
  StageContext ctx;
  ctx.question = Question{"q", "[Q]", std::nullopt, DatasetKind::freeform_math};
  ctx.information = {{0, "[I0]"}, {1, "[I1]"}};
  ctx.prior_steps = {{0, "[S0]"}, {1, "[S1]"}};
  ctx.current_step = Step{2, "[S2]"};
  ctx.target = "[T]";
  ctx.regeneration_output = "[R]";
  return {
      {"target_extraction", render_target_extraction(ctx)},
      {"information_collection", render_information_collection(ctx)},
      {"regeneration", render_regeneration(ctx)},
      {"comparison", render_comparison("[R]", *ctx.current_step)},
      {"global_check", render_variant(VariantKind::global, ctx)},
      {"single_stage_check", render_variant(VariantKind::single_stage, ctx)},
      {"regen_verify", render_variant(VariantKind::regen_verify_zero_shot, ctx)},
      {"generator", render_generator(ctx.question)},
  };
}

}  // namespace testing_support
