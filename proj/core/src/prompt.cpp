#include "dloop/prompt.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dloop/error.hpp"

#ifndef DLOOP_TEMPLATE_DIR
#define DLOOP_TEMPLATE_DIR "templates"
#endif

namespace dloop {

namespace {

constexpr std::array kTemplateNames{
    std::pair{TemplateId::MainCanvasRole, "MainCanvasRole"},
    std::pair{TemplateId::MainCanvasWorkflow, "MainCanvasWorkflow"},
    std::pair{TemplateId::SubCanvasRole, "SubCanvasRole"},
    std::pair{TemplateId::PipelineArchitect, "PipelineArchitect"},
    std::pair{TemplateId::StepContentFill, "StepContentFill"},
    std::pair{TemplateId::Brainstorm, "Brainstorm"},
    std::pair{TemplateId::ModeClassifier, "ModeClassifier"},
    std::pair{TemplateId::ChainGeneration, "ChainGeneration"},
    std::pair{TemplateId::ChainStepDraft, "ChainStepDraft"},
    std::pair{TemplateId::StageClassifier, "StageClassifier"},
    std::pair{TemplateId::RationaleGeneration, "RationaleGeneration"},
};

constexpr std::array kOutputNames{
    std::pair{OutputKind::FreeText, "FreeText"},
    std::pair{OutputKind::RationaleJson, "RationaleJson"},
    std::pair{OutputKind::StepListJson, "StepListJson"},
    std::pair{OutputKind::ModeLabelJson, "ModeLabelJson"},
    std::pair{OutputKind::StageLabelJson, "StageLabelJson"},
    std::pair{OutputKind::ChainPlanJson, "ChainPlanJson"},
};

constexpr std::array<std::string_view, 6> kChainRequirements{
    "Construct a 3-4 step logical roadmap from the user's exploration goal.",
    "Last step must be a concrete solution.",
    "Give every step a short, distinct title and a one-sentence brief stating what the step "
    "produces.",
    "Steps that explore alternatives side by side share the same parallel_group tag (for example "
    "\"A\"); a parallel group covers at least two consecutive steps.",
    "The first step and the last step never carry a parallel_group.",
    "Let the reasoning method(s) below shape how the chain moves from the problem to the "
    "solution.",
};

constexpr std::string_view kChainOutput =
    R"({"steps": [{"title": "<step title>", "brief": "<one sentence>", "parallel_group": null}]})";

const std::regex& placeholder_regex() {
  static const std::regex re(R"(\{([a-z_]+)\})");
  return re;
}

const std::regex& example_slot_regex() {
  static const std::regex re(R"(^<Example (\d+)>$)");
  return re;
}

const std::set<std::string, std::less<>>& known_placeholders() {
  static const std::set<std::string, std::less<>> names{
      "bg",           "dg",           "design_goal",          "goal",
      "context_str",  "parent_title", "parent_content",       "current_node_content",
      "few_shot_example", "rationale_type", "rationale_type_description", "reasoning_modes"};
  return names;
}

// Returns nullptr when the field is absent.
const std::string* lookup(const PromptContext& ctx, std::string_view name, std::string& field) {
  auto opt = [](const std::optional<std::string>& v) { return v ? &*v : nullptr; };
  auto req = [](const std::string& v) { return v.empty() ? nullptr : &v; };
  field = std::string(name);
  if (name == "bg") return req(ctx.bg);
  if (name == "dg" || name == "design_goal") {
    field = "dg";
    return req(ctx.dg);
  }
  if (name == "goal") return opt(ctx.goal);
  if (name == "context_str") return opt(ctx.context_str);
  if (name == "parent_title") return opt(ctx.parent_title);
  if (name == "parent_content") return opt(ctx.parent_content);
  if (name == "current_node_content") return opt(ctx.current_node_content);
  if (name == "few_shot_example") return opt(ctx.few_shot_example);
  if (name == "rationale_type") return opt(ctx.rationale_type);
  if (name == "rationale_type_description") return opt(ctx.rationale_type_description);
  if (name == "reasoning_modes") return opt(ctx.reasoning_modes);
  throw CatalogError("unknown placeholder {" + std::string(name) + "}");
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

// Rewrites each run of `<Example n>` lines with `fill(slot numbers)`.
template <class Fill>
std::string rewrite_example_slots(std::string_view text, Fill&& fill) {
  const auto lines = split_lines(text);
  std::string out;
  out.reserve(text.size());
  bool first = true;
  auto emit = [&](std::string_view line) {
    if (!first) out.push_back('\n');
    out.append(line);
    first = false;
  };
  for (std::size_t i = 0; i < lines.size();) {
    std::smatch m;
    if (!std::regex_match(lines[i], m, example_slot_regex())) {
      emit(lines[i++]);
      continue;
    }
    std::vector<int> slots;
    while (i < lines.size() && std::regex_match(lines[i], m, example_slot_regex())) {
      slots.push_back(std::stoi(m[1].str()));
      ++i;
    }
    for (const auto& line : fill(slots)) emit(line);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CatalogError("cannot read template file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string_view mode_fragment_name(ReasoningMode mode) {
  switch (mode) {
    case ReasoningMode::Inductive: return "mode_inductive";
    case ReasoningMode::Deductive: return "mode_deductive";
    case ReasoningMode::Abductive: return "mode_abductive";
    case ReasoningMode::Analogical: return "mode_analogical";
  }
  return "mode_abductive";
}

}  // namespace

std::string_view to_string(TemplateId id) {
  for (const auto& [k, name] : kTemplateNames) {
    if (k == id) return name;
  }
  return "";
}

std::optional<TemplateId> template_id_from_string(std::string_view text) {
  for (const auto& [k, name] : kTemplateNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(OutputKind kind) {
  for (const auto& [k, name] : kOutputNames) {
    if (k == kind) return name;
  }
  return "FreeText";
}

std::optional<OutputKind> output_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kOutputNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), placeholder_regex());
       it != std::sregex_iterator(); ++it) {
    auto name = (*it)[1].str();
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
  }
  return out;
}

std::string fill_example_slots(std::string_view text, std::span<const std::string> examples) {
  return rewrite_example_slots(text, [&](const std::vector<int>& slots) {
    std::vector<std::string> lines;
    if (examples.empty()) {
      lines.emplace_back(kNoExample);
      return lines;
    }
    for (int slot : slots) {
      if (slot >= 1 && static_cast<std::size_t>(slot) <= examples.size()) {
        lines.push_back(examples[static_cast<std::size_t>(slot) - 1]);
      }
    }
    return lines;
  });
}

std::string substitute(std::string_view text, const PromptContext& ctx) {
  const std::string slotted = rewrite_example_slots(text, [&](const std::vector<int>&) {
    return std::vector<std::string>{ctx.few_shot_example ? *ctx.few_shot_example
                                                         : std::string(kNoExample)};
  });

  std::string out;
  out.reserve(slotted.size());
  std::size_t last = 0;
  for (auto it = std::sregex_iterator(slotted.begin(), slotted.end(), placeholder_regex());
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    std::string field;
    const std::string* value = lookup(ctx, m[1].str(), field);
    if (!value) throw MissingPlaceholder(field);
    out.append(slotted, last, static_cast<std::size_t>(m.position(0)) - last);
    out.append(*value);
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(slotted, last, std::string::npos);
  return out;
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError("invalid manifest " + manifest_path.string() + ": " + e.what());
  }

  TemplateCatalog catalog;
  try {
    for (const auto& f : manifest.value("fragments", nlohmann::json::array())) {
      const auto name = f.at("name").get<std::string>();
      catalog.fragments_[name] = read_file(dir / f.at("file").get<std::string>());
    }
    for (const auto& t : manifest.at("templates")) {
      const auto id_text = t.at("id").get<std::string>();
      const auto id = template_id_from_string(id_text);
      if (!id) throw CatalogError("unknown template id " + id_text);
      if (catalog.entries_.contains(*id)) throw CatalogError("duplicate template id " + id_text);
      TemplateEntry e;
      e.id = *id;
      e.file = t.at("file").get<std::string>();
      e.provenance = t.at("provenance").get<std::string>();
      const auto out_text = t.at("output").get<std::string>();
      const auto out = output_kind_from_string(out_text);
      if (!out) throw CatalogError("unknown output kind " + out_text);
      e.output = *out;
      e.system = t.value("system", std::vector<std::string>{});
      e.note = t.value("note", std::string{});
      e.text = read_file(dir / e.file);
      catalog.entries_.emplace(*id, std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError("invalid manifest entry: " + std::string(e.what()));
  }

  for (auto id : kAllTemplates) {
    if (!catalog.entries_.contains(id)) {
      throw CatalogError("manifest lacks template " + std::string(to_string(id)));
    }
  }
  auto check_names = [](std::string_view origin, std::string_view text) {
    for (const auto& name : placeholders_in(text)) {
      if (!known_placeholders().contains(name)) {
        throw CatalogError(std::string(origin) + " references unknown placeholder {" + name + "}");
      }
    }
  };
  for (const auto& [id, e] : catalog.entries_) {
    check_names(e.file, e.text);
    for (const auto& part : e.system) {
      const auto part_id = template_id_from_string(part);
      if (!part_id && !catalog.fragments_.contains(part)) {
        throw CatalogError(e.file + " names unknown system part " + part);
      }
    }
  }
  for (const auto& [name, text] : catalog.fragments_) check_names(name, text);
  return catalog;
}

std::filesystem::path TemplateCatalog::default_directory() {
  if (const char* env = std::getenv("DLOOP_TEMPLATE_DIR"); env && *env) return env;
  return DLOOP_TEMPLATE_DIR;
}

TemplateCatalog TemplateCatalog::load_default() { return load(default_directory()); }

const TemplateEntry& TemplateCatalog::entry(TemplateId id) const { return entries_.at(id); }

const std::string& TemplateCatalog::fragment(std::string_view name) const {
  auto it = fragments_.find(name);
  if (it == fragments_.end()) throw CatalogError("unknown fragment " + std::string(name));
  return it->second;
}

RenderedPrompt TemplateCatalog::render(TemplateId id, const PromptContext& ctx) const {
  const auto& e = entry(id);
  RenderedPrompt out;
  out.expected_output = e.output;
  if (e.system.empty()) {
    out.system = substitute(e.text, ctx);
    return out;
  }
  for (const auto& part : e.system) {
    const auto part_id = template_id_from_string(part);
    const std::string& text = part_id ? entry(*part_id).text : fragment(part);
    if (!out.system.empty()) out.system += "\n\n";
    out.system += substitute(text, ctx);
  }
  out.user = substitute(e.text, ctx);
  return out;
}

std::string TemplateCatalog::reasoning_modes_text(const ModeAssignment& modes,
                                                  std::span<const std::string> examples) const {
  std::string out = "Primary: " + std::string(to_string(modes.primary));
  if (modes.secondary) out += "\nSecondary: " + std::string(to_string(*modes.secondary));
  for (auto mode : modes.modes()) {
    out += "\n\n";
    out += fill_example_slots(fragment(mode_fragment_name(mode)), examples);
  }
  return out;
}

std::span<const std::string_view> chain_requirements() { return kChainRequirements; }

std::string_view chain_output_format() { return kChainOutput; }

StructuredPromptSpec build_structured_prompt(std::string_view goal, const PromptContext& ctx,
                                             std::span<const std::string> examples) {
  const auto first = goal.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) throw EmptyGoal();

  StructuredPromptSpec spec;
  spec.task = "Construct the thinking chain for this exploration goal: '" + std::string(goal) + "'";
  spec.requirements.assign(kChainRequirements.begin(), kChainRequirements.end());

  std::string context = "Subcanvas Goal: '" + std::string(goal) + "'";
  if (!ctx.bg.empty()) context += "\nDesign Context: " + ctx.bg;
  if (!ctx.dg.empty()) context += "\nMain-canvas Goal: " + ctx.dg;
  if (ctx.parent_title) context += "\nParent Node: " + *ctx.parent_title;
  if (ctx.parent_content && !ctx.parent_content->empty()) {
    context += "\nParent Content: " + *ctx.parent_content;
  }
  spec.context = std::move(context);
  spec.output = std::string(kChainOutput);
  spec.examples.assign(examples.begin(), examples.end());
  return spec;
}

}  // namespace dloop
