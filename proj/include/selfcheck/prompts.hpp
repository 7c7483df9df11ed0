#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfcheck/model.hpp"

namespace selfcheck {

enum class TemplateId {
  target_extraction,
  information_collection,
  regeneration,
  comparison,
  global_check,
  single_stage_check,
  regen_verify,
  generator,
};

inline constexpr std::size_t kTemplateCount = 8;

// Asset file stem, e.g. "target_extraction" for prompts/target_extraction.txt.
std::string_view template_name(TemplateId id);

using PlaceholderValues = std::map<std::string, std::string, std::less<>>;

// Replaces every "{name}" in one left-to-right pass. Substituted text is never
// rescanned. Braces that do not enclose an identifier are copied literally;
// an identifier with no value throws TemplateError.
std::string substitute(std::string_view tmpl, const PlaceholderValues& values);

// The prompt texts. The built-in set is compiled from prompts/*.txt; a
// directory with the same file names can replace it at run time.
class TemplateSet {
 public:
  static const TemplateSet& builtin();
  static TemplateSet load_directory(const std::filesystem::path& directory);

  const std::string& text(TemplateId id) const;
  std::string render(TemplateId id, const PlaceholderValues& values) const;

 private:
  std::array<std::string, kTemplateCount> texts_;
};

struct StageContext {
  Question question;
  std::vector<InformationItem> information;
  std::vector<Step> prior_steps;
  std::optional<Step> current_step;
  std::optional<std::string> target;
  std::optional<std::string> regeneration_output;
};

// "Step 0: ...\nStep 1: ..." numbered by position, not by Step::index.
std::string format_step_lines(std::span<const Step> steps);
std::string format_information_lines(std::span<const InformationItem> items);

// Four-stage checking prompts.
std::string render_target_extraction(
    const StageContext& ctx, const TemplateSet& templates = TemplateSet::builtin());
std::string render_information_collection(
    const StageContext& ctx, const TemplateSet& templates = TemplateSet::builtin());
// ctx.information / ctx.prior_steps must already be the collected subset.
// The target is collapsed onto a single line.
std::string render_regeneration(
    const StageContext& ctx, const TemplateSet& templates = TemplateSet::builtin());
std::string render_comparison(
    std::string_view regeneration_output, const Step& original_step,
    const TemplateSet& templates = TemplateSet::builtin());

enum class VariantKind {
  global,
  single_stage,
  regen_verify_zero_shot,
  regen_verify_one_shot,
};

// Ablation prompts. `global` checks ctx.prior_steps (plus current_step when
// set) as the full solution. The one-shot variant prepends `exemplar` to the
// zero-shot prompt and throws UnsupportedVariant without one.
std::string render_variant(VariantKind kind, const StageContext& ctx,
                           const TemplateSet& templates = TemplateSet::builtin(),
                           std::optional<std::string_view> exemplar = std::nullopt);

std::string render_generator(const Question& question,
                             const TemplateSet& templates = TemplateSet::builtin());

}  // namespace selfcheck
