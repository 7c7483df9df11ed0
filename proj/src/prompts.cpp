#include "selfcheck/prompts.hpp"

#include <fstream>
#include <sstream>

#include "selfcheck/errors.hpp"
#include "selfcheck/text.hpp"

namespace selfcheck {

namespace detail {
// Generated from prompts/*.txt at configure time (see src/CMakeLists.txt).
extern const std::array<std::string_view, kTemplateCount> kBuiltinTemplates;
}  // namespace detail

namespace {

constexpr std::array<std::string_view, kTemplateCount> kTemplateNames = {
    "target_extraction", "information_collection", "regeneration",
    "comparison",        "global_check",           "single_stage_check",
    "regen_verify",      "generator"};

bool is_identifier_char(char c) {
  return text::is_alpha(c) || text::is_digit(c) || c == '_';
}

// Asset files end with one newline that is not part of the prompt.
std::string strip_final_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return std::string(s);
}

const Step& require_current(const StageContext& ctx) {
  if (!ctx.current_step) {
    throw MissingContext("stage context has no current step");
  }
  return *ctx.current_step;
}

}  // namespace

std::string_view template_name(TemplateId id) {
  return kTemplateNames.at(static_cast<std::size_t>(id));
}

std::string substitute(std::string_view tmpl, const PlaceholderValues& values) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_identifier_char(tmpl[j])) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
        const std::string_view name = tmpl.substr(i + 1, j - i - 1);
        const auto it = values.find(name);
        if (it == values.end()) {
          throw TemplateError("no value for placeholder {" +
                              std::string(name) + "}");
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    TemplateSet s;
    for (std::size_t k = 0; k < kTemplateCount; ++k) {
      s.texts_[k] = strip_final_newline(detail::kBuiltinTemplates[k]);
    }
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& directory) {
  TemplateSet s;
  for (std::size_t k = 0; k < kTemplateCount; ++k) {
    const auto path = directory / (std::string(kTemplateNames[k]) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput("template file not found: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    s.texts_[k] = strip_final_newline(buffer.str());
  }
  return s;
}

const std::string& TemplateSet::text(TemplateId id) const {
  return texts_.at(static_cast<std::size_t>(id));
}

std::string TemplateSet::render(TemplateId id,
                                const PlaceholderValues& values) const {
  return substitute(text(id), values);
}

std::string format_step_lines(std::span<const Step> steps) {
  std::string out;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (k > 0) out.push_back('\n');
    out += "Step " + std::to_string(k) + ": " + steps[k].text;
  }
  return out;
}

std::string format_information_lines(std::span<const InformationItem> items) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k > 0) out.push_back('\n');
    out += "Information " + std::to_string(k) + ": " + items[k].sentence;
  }
  return out;
}

std::string render_target_extraction(const StageContext& ctx,
                                     const TemplateSet& templates) {
  const Step& current = require_current(ctx);
  std::vector<Step> through_current = ctx.prior_steps;
  through_current.push_back(current);
  return templates.render(TemplateId::target_extraction,
                          {{"question", ctx.question.text},
                           {"steps", format_step_lines(through_current)},
                           {"current_step", current.text}});
}

std::string render_information_collection(const StageContext& ctx,
                                          const TemplateSet& templates) {
  const Step& current = require_current(ctx);
  return templates.render(
      TemplateId::information_collection,
      {{"question", ctx.question.text},
       {"information", format_information_lines(ctx.information)},
       {"steps", format_step_lines(ctx.prior_steps)},
       {"current_step", current.text}});
}

std::string render_regeneration(const StageContext& ctx,
                                const TemplateSet& templates) {
  if (!ctx.target) throw MissingTarget("regeneration needs a target");
  return templates.render(
      TemplateId::regeneration,
      {{"information", format_information_lines(ctx.information)},
       {"steps", format_step_lines(ctx.prior_steps)},
       {"target", text::collapse_whitespace(*ctx.target)}});
}

std::string render_comparison(std::string_view regeneration_output,
                              const Step& original_step,
                              const TemplateSet& templates) {
  if (text::trim(regeneration_output).empty() ||
      text::trim(original_step.text).empty()) {
    throw MissingContext("comparison needs both solutions");
  }
  return templates.render(
      TemplateId::comparison,
      {{"regeneration_output", std::string(regeneration_output)},
       {"current_step", original_step.text}});
}

std::string render_variant(VariantKind kind, const StageContext& ctx,
                           const TemplateSet& templates,
                           std::optional<std::string_view> exemplar) {
  switch (kind) {
    case VariantKind::global: {
      std::vector<Step> all = ctx.prior_steps;
      if (ctx.current_step) all.push_back(*ctx.current_step);
      if (all.empty()) throw MissingContext("global check needs a solution");
      return templates.render(TemplateId::global_check,
                              {{"question", ctx.question.text},
                               {"steps", format_step_lines(all)}});
    }
    case VariantKind::single_stage: {
      const Step& current = require_current(ctx);
      return templates.render(TemplateId::single_stage_check,
                              {{"question", ctx.question.text},
                               {"steps", format_step_lines(ctx.prior_steps)},
                               {"current_step", current.text}});
    }
    case VariantKind::regen_verify_zero_shot:
    case VariantKind::regen_verify_one_shot: {
      if (kind == VariantKind::regen_verify_one_shot && !exemplar) {
        throw UnsupportedVariant(
            "one-shot verification needs an exemplar file");
      }
      const Step& current = require_current(ctx);
      std::string prompt = templates.render(
          TemplateId::regen_verify,
          {{"information", format_information_lines(ctx.information)},
           {"steps", format_step_lines(ctx.prior_steps)},
           {"current_step", current.text}});
      if (kind == VariantKind::regen_verify_one_shot) {
        return std::string(text::trim(*exemplar)) + "\n\n" + prompt;
      }
      return prompt;
    }
  }
  throw UnsupportedVariant("unknown prompt variant");
}

std::string render_generator(const Question& question,
                             const TemplateSet& templates) {
  return templates.render(TemplateId::generator,
                          {{"question", question.text}});
}

}  // namespace selfcheck
