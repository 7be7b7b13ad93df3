#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dloop/gateway.hpp"

namespace dloop {

namespace {

using nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Value on the line introduced by `marker`, without surrounding quotes.
std::string line_after(const std::string& text, std::string_view marker) {
  const auto at = text.rfind(marker);
  if (at == std::string::npos) return {};
  const auto start = at + marker.size();
  auto end = text.find('\n', start);
  if (end == std::string::npos) end = text.size();
  std::string v = text.substr(start, end - start);
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.pop_back();
  if (v.size() >= 2 && v.front() == '\'' && v.back() == '\'') v = v.substr(1, v.size() - 2);
  return v;
}

int word_total(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

struct Cue {
  int label;
  std::vector<std::string_view> words;
};

// Index of the best-scoring label; ties keep the earlier label.
std::vector<int> rank_labels(const std::string& text, const std::vector<Cue>& cues) {
  const auto t = lower(text);
  std::vector<std::pair<int, int>> scores;
  for (const auto& cue : cues) {
    int s = 0;
    for (auto w : cue.words) {
      if (t.find(w) != std::string::npos) ++s;
    }
    scores.emplace_back(s, cue.label);
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> out;
  for (const auto& [s, label] : scores) {
    if (s > 0) out.push_back(label);
  }
  return out;
}

constexpr std::array<std::string_view, 4> kModeNames{"Inductive", "Deductive", "Abductive",
                                                    "Analogical"};

std::vector<int> modes_for(const std::string& goal) {
  static const std::vector<Cue> cues{
      {0, {"common", "pattern", "across", "summar", "insight", "interview", "trend", "persona",
           "cluster", "classif", "recurring"}},
      {1, {"evaluat", "test", "validat", "review", "standard", "heuristic", "guideline",
           "complian", "assess", "walkthrough", "accessib", "audit"}},
      {2, {"why", "design", "idea", "how to", "how might", "create", "improve", "concept",
           "diagnos", "cause", "new "}},
      {3, {"inspir", "borrow", "analog", "metaphor", "like a", "other domain", "cross-domain",
           "nature", "game", "from other"}},
  };
  auto ranked = rank_labels(goal, cues);
  if (ranked.empty()) ranked.push_back(2);
  if (ranked.size() > 2) ranked.resize(2);
  if (ranked.size() == 2 && fnv1a(goal) % 3 == 0) ranked.resize(1);
  return ranked;
}

constexpr std::array<std::string_view, 6> kStageLabels{
    "Discover_Divergent", "Discover_Convergent", "Define",
    "Develop_Divergent",  "Develop_Convergent",  "Deliver"};

int stage_for(const std::string& instruction) {
  static const std::vector<Cue> cues{
      {0, {"collect", "gather", "interview", "competitor", "market", "survey", "literature",
           "observe", "case"}},
      {1, {"pattern", "persona", "journey", "pain point", "synthes", "cluster", "insight",
           "organiz", "common"}},
      {2, {"how might we", "problem statement", "principle", "define", "frame", "priorit",
           "diagnos", "root cause"}},
      {3, {"brainstorm", "idea", "sketch", "storyboard", "concept", "explore", "generate",
           "hypothes", "option", "direction"}},
      {4, {"prototype", "feature", "combine", "select", "filter", "system", "flow", "structure",
           "evaluat", "test"}},
      {5, {"final", "mockup", "blueprint", "pitch", "deliver", "present", "solution",
           "high-fidelity", "specify", "transfer"}},
  };
  const auto ranked = rank_labels(instruction, cues);
  return ranked.empty() ? 3 : ranked.front();
}

struct ChainShape {
  std::array<std::string_view, 4> titles;
  std::array<std::string_view, 2> parallel;
};

const ChainShape& shape_for(int mode) {
  static const std::array<ChainShape, 4> shapes{{
      {{"Gather Cases", "Cluster Patterns", "Derive Principles", "Principle-based Solution"},
       {"Behavioral Patterns", "Attitudinal Patterns"}},
      {{"Select Standards", "Evaluate Current Design", "Diagnose Gaps", "Specify Concrete Fixes"},
       {"Heuristic Review", "Scenario Walkthrough"}},
      {{"Frame the Problem", "Generate Hypotheses", "Test Explanations",
        "Propose Concrete Solution"},
       {"User-led Concepts", "Constraint-led Concepts"}},
      {{"Identify Core Structure", "Find Source Domains", "Map Mechanisms",
        "Transfer into Solution"},
       {"Near-domain Analogies", "Far-domain Analogies"}},
  }};
  return shapes.at(static_cast<std::size_t>(mode));
}

std::string chain_plan(const std::string& goal, int mode) {
  const auto& shape = shape_for(mode);
  const auto variant = fnv1a(goal) % 3;
  ordered_json steps = ordered_json::array();
  auto step = [&](std::string_view title, const std::string& brief,
                  const char* group) {
    ordered_json s{{"title", title}, {"brief", brief}, {"parallel_group", nullptr}};
    if (group) s["parallel_group"] = group;
    steps.push_back(std::move(s));
  };
  step(shape.titles[0], fmt::format("Set out the starting material for '{}'.", goal), nullptr);
  if (variant == 2) {
    step(shape.parallel[0], "Develop the first of two directions side by side.", "A");
    step(shape.parallel[1], "Develop the second direction in parallel with the first.", "A");
  } else {
    step(shape.titles[1], "Turn the starting material into workable candidates.", nullptr);
    if (variant == 1) {
      step(shape.titles[2], "Narrow the candidates against the goal and its constraints.",
           nullptr);
    }
  }
  step(shape.titles[3], fmt::format("Deliver a concrete solution for '{}'.", goal), nullptr);
  return ordered_json{{"steps", steps}}.dump();
}

std::string title_from(const std::string& note) {
  std::istringstream in(note);
  std::string word;
  std::string out;
  int n = 0;
  while (in >> word && n < 5) {
    word.erase(std::remove_if(word.begin(), word.end(),
                              [](unsigned char c) { return std::ispunct(c) && c != '-'; }),
               word.end());
    if (word.empty()) continue;
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    if (!out.empty()) out += ' ';
    out += word;
    ++n;
  }
  return out.empty() ? "Supplementary Step" : out;
}

std::string rationale(const std::string& user) {
  auto step = line_after(user, "- Current Execution Step: ");
  if (const auto colon = step.find(": "); colon != std::string::npos) step.resize(colon);
  auto stage = line_after(user, "- Stage Name: ");
  if (stage.empty()) stage = "Develop_Divergent";
  std::string stage_words = stage;
  std::replace(stage_words.begin(), stage_words.end(), '_', ' ');
  static const std::array<std::string_view, 3> lenses{"the people most affected",
                                                     "the moments where things break",
                                                     "the constraints nobody can move"};
  const auto lens = lenses.at(fnv1a(user) % lenses.size());
  ordered_json out{
      {"title", fmt::format("{}: {}", stage_words, step)},
      {"rationale1",
       fmt::format("**Focus** Treat {} as a {} activity anchored in {}, so it yields material "
                   "that later steps can build on directly.",
                   step, stage_words, lens)},
      {"rationale2",
       "**Inputs** Reuse what the preceding steps established, list the open assumptions, and "
       "mark which ones the team can check quickly with real users."},
      {"rationale3",
       "**Method** Work in short rounds: draft two or three candidate moves, compare them "
       "against the stage goal, keep the strongest, and note why others were dropped."},
      {"rationale4",
       "**Output** End with a short, concrete artifact such as a list, sketch or decision note "
       "that names its owner and the question it answers next."},
  };
  return out.dump();
}

std::string pipeline(const std::string& user) {
  static const std::array<std::string_view, 7> pool{
      "User Research",   "Insight Synthesis", "Problem Definition", "Concept Ideation",
      "Prototyping",     "Usability Testing", "Final Delivery"};
  const auto h = fnv1a(line_after(user, "Design goal: "));
  ordered_json steps = ordered_json::array();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const bool optional_step = i == 1 || i == 5;
    if (optional_step && ((h >> i) & 1U)) continue;
    steps.push_back(pool.at(i));
  }
  return ordered_json{{"steps", steps}}.dump();
}

std::string blocks(const std::string& user) {
  const auto step = line_after(user, "Current step: ");
  ordered_json out{{"blocks",
                    {fmt::format("Name the single question '{}' must answer for this project.",
                                 step),
                     fmt::format("List the inputs from earlier steps that '{}' depends on.", step),
                     fmt::format("Define a concrete artifact that closes '{}' and who reviews it.",
                                 step)}}};
  return out.dump();
}

std::string brainstorm(const std::string& user) {
  const auto node = line_after(user, "AI node: ");
  return fmt::format(
      "- Reframe '{}' from the viewpoint of a first-time user.\n"
      "- Combine the strongest idea so far with an unexpected constraint.\n"
      "- Ask which assumption, if wrong, would change the whole direction.",
      node);
}

}  // namespace

ChatResponse SyntheticProvider::complete(const ChatRequest& request) {
  const auto& user = request.user;
  std::string text;
  switch (request.response_hint) {
    case OutputKind::ModeLabelJson: {
      ordered_json modes = ordered_json::array();
      for (int m : modes_for(line_after(user, "Exploration goal: ")))
        modes.push_back(kModeNames.at(static_cast<std::size_t>(m)));
      text = ordered_json{{"modes", modes}}.dump();
      break;
    }
    case OutputKind::StageLabelJson:
      text = ordered_json{
          {"stage", kStageLabels.at(static_cast<std::size_t>(
                        stage_for(line_after(user, "Instruction to classify: "))))}}
                 .dump();
      break;
    case OutputKind::ChainPlanJson:
      if (user.find("Return exactly one step") != std::string::npos) {
        const auto note = line_after(user, "- Designer's Note: ");
        text = ordered_json{{"steps",
                             {{{"title", title_from(note)},
                               {"brief", fmt::format("Work out {}.", note)}}}}}
                   .dump();
      } else {
        const auto goal = line_after(user, "**Task:** Construct the thinking chain for this "
                                           "exploration goal: ");
        const auto primary = user.find("Primary: ");
        int mode = 2;
        if (primary != std::string::npos) {
          for (std::size_t i = 0; i < kModeNames.size(); ++i) {
            if (user.compare(primary + 9, kModeNames[i].size(), kModeNames[i]) == 0)
              mode = static_cast<int>(i);
          }
        }
        text = chain_plan(goal, mode);
      }
      break;
    case OutputKind::RationaleJson:
      text = rationale(user);
      break;
    case OutputKind::StepListJson:
      text = user.find("API call: generate_pipeline") != std::string::npos ? pipeline(user)
                                                                            : blocks(user);
      break;
    case OutputKind::FreeText:
      text = brainstorm(user);
      break;
  }
  ChatResponse r;
  r.text = std::move(text);
  r.prompt_tokens = word_total(request.system) + word_total(request.user);
  r.completion_tokens = word_total(r.text);
  r.provider_id = id();
  return r;
}

}  // namespace dloop
