#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dloop/reasoning_types.hpp"

namespace dloop {

enum class TemplateId {
  MainCanvasRole,
  MainCanvasWorkflow,
  SubCanvasRole,
  PipelineArchitect,
  StepContentFill,
  Brainstorm,
  ModeClassifier,
  ChainGeneration,
  ChainStepDraft,
  StageClassifier,
  RationaleGeneration,
};

inline constexpr std::array kAllTemplates{
    TemplateId::MainCanvasRole,   TemplateId::MainCanvasWorkflow, TemplateId::SubCanvasRole,
    TemplateId::PipelineArchitect, TemplateId::StepContentFill,   TemplateId::Brainstorm,
    TemplateId::ModeClassifier,   TemplateId::ChainGeneration,    TemplateId::ChainStepDraft,
    TemplateId::StageClassifier,  TemplateId::RationaleGeneration};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> template_id_from_string(std::string_view text);

/// Envelope the caller expects back from the model.
enum class OutputKind { FreeText, RationaleJson, StepListJson, ModeLabelJson, StageLabelJson, ChainPlanJson };

std::string_view to_string(OutputKind kind);
std::optional<OutputKind> output_kind_from_string(std::string_view text);

inline constexpr std::string_view kNoExample = "(no example available)";
inline constexpr std::string_view kNoPriorSteps = "(no prior steps)";

/// Placeholder bundle shared by every template. `bg` and `dg` count as
/// absent when empty; the optionals count as absent when unset.
struct PromptContext {
  std::string bg;
  std::string dg;
  std::optional<std::string> goal;
  std::optional<std::string> context_str;
  std::optional<std::string> parent_title;
  std::optional<std::string> parent_content;
  std::optional<std::string> current_node_content;
  std::optional<std::string> few_shot_example;
  std::optional<std::string> rationale_type;
  std::optional<std::string> rationale_type_description;
  std::optional<std::string> reasoning_modes;

  friend bool operator==(const PromptContext&, const PromptContext&) = default;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
  OutputKind expected_output = OutputKind::FreeText;

  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

struct StructuredPromptSpec {
  std::string task;
  std::vector<std::string> requirements;
  std::string context;
  std::string output;
  std::vector<std::string> examples;

  friend bool operator==(const StructuredPromptSpec&, const StructuredPromptSpec&) = default;
};

struct TemplateEntry {
  TemplateId id = TemplateId::MainCanvasRole;
  std::string file;
  std::string provenance;
  OutputKind output = OutputKind::FreeText;
  std::vector<std::string> system;
  std::string note;
  std::string text;
};

/// Template texts loaded from a catalog directory (manifest.json plus one
/// text file per template). Immutable after load.
class TemplateCatalog {
public:
  static TemplateCatalog load(const std::filesystem::path& dir);
  /// $DLOOP_TEMPLATE_DIR, else the directory baked in at build time.
  static TemplateCatalog load_default();
  static std::filesystem::path default_directory();

  [[nodiscard]] RenderedPrompt render(TemplateId id, const PromptContext& ctx) const;
  [[nodiscard]] const TemplateEntry& entry(TemplateId id) const;
  [[nodiscard]] const std::string& fragment(std::string_view name) const;

  /// Definitions of the assigned modes, primary first, with the `<Example n>`
  /// slots filled from `examples`.
  [[nodiscard]] std::string reasoning_modes_text(const ModeAssignment& modes,
                                                 std::span<const std::string> examples) const;

private:
  std::map<TemplateId, TemplateEntry> entries_;
  std::map<std::string, std::string, std::less<>> fragments_;
};

/// Names referenced as `{name}` in `text`, in order of first appearance.
std::vector<std::string> placeholders_in(std::string_view text);

/// Replaces `{name}` tokens from `ctx`; throws MissingPlaceholder for a
/// referenced-but-absent field. Runs of `<Example n>` lines become
/// `ctx.few_shot_example`, or the "(no example available)" line.
std::string substitute(std::string_view text, const PromptContext& ctx);

/// Fills `<Example n>` slot lines from `examples`.
std::string fill_example_slots(std::string_view text, std::span<const std::string> examples);

/// Requirement lines shared with the chain-generation template.
std::span<const std::string_view> chain_requirements();
std::string_view chain_output_format();

StructuredPromptSpec build_structured_prompt(std::string_view goal, const PromptContext& ctx,
                                             std::span<const std::string> examples = {});

}  // namespace dloop
