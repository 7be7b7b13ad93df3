#include <set>

#include <gtest/gtest.h>

#include "dloop/error.hpp"
#include "dloop/orchestrator.hpp"
#include "dloop/reasoning.hpp"
#include "fixture_support.hpp"
#include "generators.hpp"

using namespace dloop;
using dloop::testing::Rng;

namespace {

ChainPlan plan(std::vector<std::optional<std::string>> groups) {
  ChainPlan p;
  p.modes = {ReasoningMode::Abductive, std::nullopt};
  for (std::size_t i = 0; i < groups.size(); ++i) {
    p.steps.push_back({"Step " + std::to_string(i), "brief", groups[i]});
  }
  return p;
}

std::string valid_rationale_json() {
  return R"({"title":"T","rationale1":"a","rationale2":"b","rationale3":"c","rationale4":"d"})";
}

}  // namespace

TEST(Fences, StripsFirstFencedBlock) {
  EXPECT_EQ(strip_code_fences("  plain  "), "plain");
  EXPECT_EQ(strip_code_fences("```json\n{\"a\":1}\n```"), "{\"a\":1}");
  EXPECT_EQ(strip_code_fences("Sure!\n~~~\nbody\n~~~\nbye"), "body");
  EXPECT_EQ(strip_code_fences("```\nfirst\n```\n```\nsecond\n```"), "first");
}

TEST(RationaleJson, ParsesAndRejectsByField) {
  const auto r = parse_rationale_json(valid_rationale_json());
  EXPECT_EQ(r, (Rationale{"T", "a", "b", "c", "d"}));
  try {
    (void)parse_rationale_json(R"({"title":"T","rationale1":"a","rationale2":"b","rationale3":"c"})");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.detail(), "rationale4");
    EXPECT_EQ(e.code(), "schema_error");
  }
  EXPECT_THROW((void)parse_rationale_json("not json"), SchemaError);
  EXPECT_THROW((void)parse_rationale_json("[]"), SchemaError);
}

TEST(RationaleJson, ExtraKeysAreIgnored) {
  EXPECT_NO_THROW((void)parse_rationale_json(
      R"({"title":"T","rationale1":"a","rationale2":"b","rationale3":"c","rationale4":"d","x":1})"));
}

TEST(RationaleProperty, SerializeParseRoundTrip) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    Rationale r;
    for (auto* f : {&r.title, &r.rationale1, &r.rationale2, &r.rationale3, &r.rationale4}) {
      do {
        *f = dloop::testing::random_text(rng, 60);
      } while (f->find_first_not_of(" \t\n\r") == std::string::npos);
    }
    ASSERT_EQ(parse_rationale_json(serialize_rationale(r)), r);
    ASSERT_EQ(parse_rationale_json("```json\n" + serialize_rationale(r) + "\n```"), r);
  }
}

TEST(ModeLabel, JsonAndBareText) {
  EXPECT_EQ(parse_mode_label(R"({"modes":["Inductive"]})"),
            (ModeAssignment{ReasoningMode::Inductive, std::nullopt}));
  EXPECT_EQ(parse_mode_label("Abductive, Analogical"),
            (ModeAssignment{ReasoningMode::Abductive, ReasoningMode::Analogical}));
  EXPECT_THROW((void)parse_mode_label(R"({"modes":["Inductive","Inductive"]})"), UnparseableLabel);
  EXPECT_THROW((void)parse_mode_label(R"({"modes":["Inductive","Deductive","Abductive"]})"),
               UnparseableLabel);
  EXPECT_THROW((void)parse_mode_label(R"({"modes":["Lateral"]})"), UnparseableLabel);
  EXPECT_THROW((void)parse_mode_label(R"({"modes":[]})"), UnparseableLabel);
}

TEST(StageLabel, NormalisesCaseSpacesAndUnderscores) {
  EXPECT_EQ(parse_stage_label(R"({"stage":"Discover_Divergent"})"), DesignStage::DiscoverDivergent);
  EXPECT_EQ(parse_stage_label("develop convergent"), DesignStage::DevelopConvergent);
  EXPECT_EQ(parse_stage_label("DELIVER"), DesignStage::Deliver);
  EXPECT_EQ(normalize_stage_label("Discover_ Divergent"), "discoverdivergent");
  EXPECT_THROW((void)parse_stage_label("Prototype"), UnparseableLabel);
  EXPECT_THROW((void)parse_stage_label(R"({"label":"Define"})"), UnparseableLabel);
}

TEST(StageLabelProperty, CaseAndSeparatorMutationsStillParse) {
  Rng rng(11);
  for (auto stage : kAllStages) {
    const std::string label(to_label(stage));
    for (int i = 0; i < 50; ++i) {
      std::string mutated;
      for (char c : label) {
        if (c == '_') {
          const int pick = std::uniform_int_distribution<int>(0, 3)(rng);
          mutated += pick == 0 ? "" : pick == 1 ? " " : pick == 2 ? "_" : " _ ";
        } else {
          mutated += std::bernoulli_distribution(0.5)(rng)
                         ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                         : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
      }
      ASSERT_EQ(parse_stage_label(mutated), stage) << mutated;
      ASSERT_EQ(parse_stage_label(R"({"stage":")" + mutated + "\"}"), stage) << mutated;
    }
  }
}

TEST(ChainPlanRules, StepCountAndGroups) {
  EXPECT_NO_THROW(validate_chain_plan(plan({{}, {}, {}})));
  EXPECT_NO_THROW(validate_chain_plan(plan({{}, "A", "A", {}})));
  EXPECT_THROW(validate_chain_plan(plan({{}, {}})), InvalidChain);
  EXPECT_THROW(validate_chain_plan(plan({{}, {}, {}, {}, {}})), InvalidChain);
  EXPECT_THROW(validate_chain_plan(plan({"A", "A", {}, {}})), InvalidChain);
  EXPECT_THROW(validate_chain_plan(plan({{}, {}, "A", "A"})), InvalidChain);
  EXPECT_THROW(validate_chain_plan(plan({{}, "A", {}, {}})), InvalidChain);
  auto dup = plan({{}, {}, {}});
  dup.steps[2].title = dup.steps[1].title;
  EXPECT_THROW(validate_chain_plan(dup), InvalidChain);
}

TEST(ChainPlanRules, ParsesJsonPlan) {
  const auto p = parse_chain_plan(
      R"({"steps":[{"title":"One","brief":"b"},{"title":"Two","brief":"b","parallel_group":"A"},
         {"title":"Three","brief":"b","parallel_group":"A"},{"title":"Four","brief":"b","parallel_group":null}]})",
      {ReasoningMode::Deductive, std::nullopt});
  ASSERT_EQ(p.steps.size(), 4u);
  EXPECT_EQ(p.steps[1].parallel_group, "A");
  EXPECT_FALSE(p.steps[3].parallel_group);
  EXPECT_EQ(plan_segments(p.steps), (std::vector<std::vector<std::size_t>>{{0}, {1, 2}, {3}}));
  EXPECT_THROW((void)parse_chain_plan(R"({"plan":[]})", {}), InvalidChain);
}

TEST(StepDraft, ExactlyOneStep) {
  EXPECT_EQ(parse_step_draft(R"({"steps":[{"title":"Ask parents","brief":"b"}]})").title,
            "Ask parents");
  EXPECT_THROW((void)parse_step_draft(R"({"steps":[]})"), InvalidChain);
}

TEST(StringList, RequiresNonEmptyItems) {
  EXPECT_EQ(parse_string_list(R"({"steps":["a"," b "]})", "steps", 1),
            (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW((void)parse_string_list(R"({"steps":[]})", "steps", 1), StepListError);
  EXPECT_THROW((void)parse_string_list(R"({"other":["a"]})", "steps", 1), StepListError);
}

TEST(RunStates, TransitionTable) {
  using S = RunState;
  const std::vector<S> all{S::Pending, S::Classified, S::Completed, S::Failed, S::Stale};
  auto expected = [](S from, S to) {
    switch (to) {
      case S::Classified: return from == S::Pending || from == S::Stale || from == S::Failed;
      case S::Completed: return from == S::Classified;
      case S::Failed: return true;
      case S::Stale: return from == S::Pending || from == S::Completed || from == S::Failed;
      case S::Pending: return false;
    }
    return false;
  };
  for (auto from : all) {
    for (auto to : all) {
      EXPECT_EQ(transition_allowed(from, to), expected(from, to))
          << to_string(from) << " -> " << to_string(to);
    }
  }
}

TEST(RunStates, ClassifiedAndFailedDropTheRationale) {
  ChainNode n;
  n.id = NodeId{"n"};
  TransitionAudit audit;
  transition(n, RunState::Classified, &audit);
  n.rationale = Rationale{"t", "1", "2", "3", "4"};
  transition(n, RunState::Completed, &audit);
  EXPECT_TRUE(n.rationale);
  transition(n, RunState::Stale, &audit);
  EXPECT_TRUE(n.rationale);
  transition(n, RunState::Classified, &audit);
  EXPECT_FALSE(n.rationale);
  n.rationale = Rationale{"t", "1", "2", "3", "4"};
  transition(n, RunState::Failed, &audit);
  EXPECT_FALSE(n.rationale);
  EXPECT_EQ(audit.records().size(), 5u);
  EXPECT_THROW(transition(n, RunState::Completed, &audit), InvalidTransition);
  EXPECT_EQ(n.run_state, RunState::Failed);
}

TEST(WordCount, CountsWhitespaceSeparatedWords) {
  EXPECT_EQ(word_count(""), 0u);
  EXPECT_EQ(word_count("  one two\nthree\t"), 3u);
}

TEST(StageClassifierProperty, AcceptsExactlyTheSixNormalisedLabels) {
  Rng rng(276);
  std::set<std::string> six;
  for (auto stage : kAllStages) six.insert(normalize_stage_label(to_label(stage)));
  const std::vector<std::string> noise{"Prototype", "Discover", "Develop_Sideways", "Define!",
                                       "Delivery", "Discover_Divergentt", "Ideate", "Test"};
  PromptContext ctx;
  ctx.bg = "bg";
  ctx.dg = "dg";
  ctx.goal = "goal";
  ctx.context_str = std::string(kNoPriorSteps);
  const ReasoningEngine engine(dloop::testing::catalog(), 0);
  std::size_t accepted = 0;
  for (int i = 0; i < 100; ++i) {
    std::string label;
    if (i % 2 == 0) {
      label = std::string(to_label(kAllStages[std::uniform_int_distribution<std::size_t>(0, 5)(rng)]));
    } else {
      label = noise[std::uniform_int_distribution<std::size_t>(0, noise.size() - 1)(rng)];
    }
    std::string mutated;
    for (char c : label) {
      if (c == '_' && std::bernoulli_distribution(0.5)(rng)) {
        mutated += std::bernoulli_distribution(0.5)(rng) ? " " : "";
      } else {
        mutated += std::bernoulli_distribution(0.3)(rng)
                       ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                       : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
    }
    auto mock = std::make_shared<MockProvider>(
        std::vector<std::string>{"{\"stage\": \"" + mutated + "\"}"});
    const bool expected = six.contains(normalize_stage_label(mutated));
    bool got = true;
    try {
      const auto stage = engine.classify_stage("Step", "brief", ctx, Gateway(mock));
      EXPECT_EQ(normalize_stage_label(to_label(stage)), normalize_stage_label(mutated));
    } catch (const UnparseableLabel&) {
      got = false;
    } catch (const ValidationExhausted&) {
      got = false;
    }
    ASSERT_EQ(got, expected) << mutated;
    accepted += got;
  }
  EXPECT_GT(accepted, 30u);
  EXPECT_LT(accepted, 70u);
}
