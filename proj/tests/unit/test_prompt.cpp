#include <set>

#include <gtest/gtest.h>

#include "dloop/error.hpp"
#include "dloop/prompt.hpp"
#include "fixture_support.hpp"

using namespace dloop;
using dloop::testing::catalog;

namespace {

PromptContext full_context() {
  PromptContext ctx;
  ctx.bg = "A storytelling app for young children.";
  ctx.dg = "visual-first interaction";
  ctx.goal = "onboarding for non-readers";
  ctx.context_str = "1. Map Pre-reader Abilities";
  ctx.parent_title = "Onboarding Interaction";
  ctx.parent_content = "- audio first";
  ctx.current_node_content = "Audio Prompt Guidance: narrate each choice.";
  ctx.few_shot_example = "Example rationale";
  ctx.rationale_type = "Develop_Divergent";
  ctx.rationale_type_description = "Explore many solution directions.";
  ctx.reasoning_modes = "Abductive reasoning: infer the best explanation.";
  return ctx;
}

}  // namespace

TEST(Placeholders, FoundInOrderOfFirstUse) {
  EXPECT_EQ(placeholders_in("{bg} and {dg} then {bg} and {\"json\": 1}"),
            (std::vector<std::string>{"bg", "dg"}));
}

TEST(Substitute, FillsAndRejectsMissingFields) {
  PromptContext ctx;
  ctx.bg = "B";
  ctx.dg = "D";
  EXPECT_EQ(substitute("bg={bg}; dg={dg}", ctx), "bg=B; dg=D");
  try {
    (void)substitute("goal={goal}", ctx);
    FAIL();
  } catch (const MissingPlaceholder& e) {
    EXPECT_EQ(e.code(), "missing_placeholder");
    EXPECT_NE(std::string(e.what()).find("goal"), std::string::npos);
  }
  ctx.bg.clear();
  EXPECT_THROW((void)substitute("{bg}", ctx), MissingPlaceholder);
}

TEST(Substitute, ValuesAreNotReexpanded) {
  PromptContext ctx;
  ctx.bg = "{dg}";
  ctx.dg = "D";
  EXPECT_EQ(substitute("{bg}", ctx), "{dg}");
}

TEST(ExampleSlots, FallBackWhenNoExample) {
  PromptContext ctx;
  const auto text = substitute("Examples:\n<Example 1>\n<Example 2>\nEnd", ctx);
  EXPECT_NE(text.find(kNoExample), std::string::npos);
  EXPECT_EQ(text.find("<Example"), std::string::npos);
  const std::vector<std::string> shots{"first", "second"};
  const auto filled = fill_example_slots("<Example 1>\n<Example 2>", shots);
  EXPECT_NE(filled.find("first"), std::string::npos);
  EXPECT_NE(filled.find("second"), std::string::npos);
}

TEST(Catalog, EveryTemplateLoadsWithKnownProvenance) {
  const std::set<std::string> allowed{"verbatim", "verbatim-with-invented-framing", "invented"};
  for (auto id : kAllTemplates) {
    const auto& e = catalog().entry(id);
    EXPECT_TRUE(allowed.contains(e.provenance)) << to_string(id);
    EXPECT_FALSE(e.text.empty()) << to_string(id);
    EXPECT_EQ(template_id_from_string(to_string(id)), id);
  }
}

TEST(Catalog, RenderedPromptsResolveEveryPlaceholder) {
  const auto ctx = full_context();
  for (auto id : kAllTemplates) {
    const auto r = catalog().render(id, ctx);
    EXPECT_TRUE(placeholders_in(r.user).empty()) << to_string(id);
    EXPECT_TRUE(placeholders_in(r.system).empty()) << to_string(id);
    EXPECT_EQ(r.expected_output, catalog().entry(id).output) << to_string(id);
  }
}

TEST(Catalog, RationalePromptCarriesStageAndContext) {
  const auto r = catalog().render(TemplateId::RationaleGeneration, full_context());
  EXPECT_EQ(r.expected_output, OutputKind::RationaleJson);
  EXPECT_NE(r.user.find("Develop_Divergent"), std::string::npos);
  EXPECT_NE(r.user.find("Audio Prompt Guidance"), std::string::npos);
  EXPECT_NE(r.system.find("Abductive reasoning"), std::string::npos);
}

TEST(Catalog, RenderIsDeterministic) {
  const auto ctx = full_context();
  EXPECT_EQ(catalog().render(TemplateId::ChainGeneration, ctx),
            catalog().render(TemplateId::ChainGeneration, ctx));
}

TEST(Catalog, ModeDefinitionsListPrimaryFirst) {
  const ModeAssignment modes{ReasoningMode::Analogical, ReasoningMode::Inductive};
  const auto text = catalog().reasoning_modes_text(modes, {});
  const auto a = text.find("Analogical");
  const auto i = text.find("Inductive");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(i, std::string::npos);
  EXPECT_LT(a, i);
  EXPECT_EQ(text.find("Deductive"), std::string::npos);
}

TEST(Catalog, MissingDirectoryIsACatalogError) {
  EXPECT_THROW((void)TemplateCatalog::load("/nonexistent/templates"), CatalogError);
}

TEST(StructuredPrompt, CarriesGoalAndRequirements) {
  const auto spec = build_structured_prompt("onboarding for non-readers", full_context());
  EXPECT_NE(spec.task.find("onboarding for non-readers"), std::string::npos);
  EXPECT_EQ(spec.requirements.size(), chain_requirements().size());
  EXPECT_FALSE(spec.output.empty());
}
