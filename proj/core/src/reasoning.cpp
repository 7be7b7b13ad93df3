#include "dloop/reasoning.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "dloop/error.hpp"

namespace dloop {

namespace {

constexpr std::array kRationaleKeys{"title", "rationale1", "rationale2", "rationale3", "rationale4"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string title_key(std::string_view title) { return lower(trim(title)); }

template <class E>
nlohmann::json parse_object(std::string_view raw, std::string_view what) {
  const auto body = strip_code_fences(raw);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw E(std::string(what) + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw E(std::string(what) + ": payload is not a JSON object");
  return j;
}

std::string normalize_mode(std::string_view token) {
  std::string out;
  for (unsigned char c : token) {
    if (c == ' ' || c == '_' || c == '-' || c == '\t') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  constexpr std::string_view suffix = "reasoning";
  if (out.size() > suffix.size() && out.ends_with(suffix)) out.resize(out.size() - suffix.size());
  return out;
}

std::string strip_token_punct(std::string_view token) {
  auto t = trim(token);
  auto is_punct = [](char c) {
    return c == '"' || c == '\'' || c == '.' || c == '*' || c == '`' || c == '[' || c == ']';
  };
  while (!t.empty() && is_punct(t.front())) t.remove_prefix(1);
  while (!t.empty() && is_punct(t.back())) t.remove_suffix(1);
  return std::string(trim(t));
}

// Splits bare mode text on commas, '+', '/', newlines and the word "and".
std::vector<std::string> split_mode_text(std::string_view text) {
  std::string buf(text);
  for (auto& c : buf) {
    if (c == ',' || c == '+' || c == '/' || c == '\n' || c == ';' || c == '&') c = '\n';
  }
  std::vector<std::string> parts;
  std::string cur;
  std::size_t i = 0;
  auto flush = [&] {
    auto t = strip_token_punct(cur);
    if (!t.empty()) parts.push_back(t);
    cur.clear();
  };
  while (i < buf.size()) {
    if (buf[i] == '\n') {
      flush();
      ++i;
      continue;
    }
    const bool word_start = i == 0 || std::isspace(static_cast<unsigned char>(buf[i - 1]));
    if (word_start && i + 3 <= buf.size() && lower(std::string_view(buf).substr(i, 3)) == "and" &&
        (i + 3 == buf.size() || std::isspace(static_cast<unsigned char>(buf[i + 3])))) {
      flush();
      i += 3;
      continue;
    }
    cur.push_back(buf[i++]);
  }
  flush();
  return parts;
}

ModeAssignment assign_modes(const std::vector<std::string>& labels) {
  if (labels.empty()) throw UnparseableLabel("no reasoning mode named");
  if (labels.size() > 2) {
    throw UnparseableLabel("expected one or two reasoning modes, got " +
                           std::to_string(labels.size()));
  }
  std::vector<ReasoningMode> modes;
  for (const auto& l : labels) {
    const auto m = mode_from_label(l);
    if (!m) throw UnparseableLabel("unknown reasoning mode '" + l + "'");
    if (std::find(modes.begin(), modes.end(), *m) != modes.end()) {
      throw UnparseableLabel("reasoning mode '" + l + "' listed twice");
    }
    modes.push_back(*m);
  }
  ModeAssignment a{modes[0], std::nullopt};
  if (modes.size() == 2) a.secondary = modes[1];
  return a;
}

bool is_fence_at(std::string_view s, std::size_t pos, char& fence_char) {
  if (pos + 3 > s.size()) return false;
  const char c = s[pos];
  if ((c == '`' || c == '~') && s[pos + 1] == c && s[pos + 2] == c) {
    fence_char = c;
    return true;
  }
  return false;
}

std::string join_exemplar_goals(std::span<const Exemplar> exemplars) {
  std::string out;
  for (const auto& e : exemplars) {
    if (!out.empty()) out += '\n';
    out += "- " + e.goal_text;
  }
  return out;
}

std::vector<std::string> exemplar_goal_lines(std::span<const Exemplar> exemplars) {
  std::vector<std::string> out;
  for (const auto& e : exemplars) out.push_back("- " + e.goal_text);
  return out;
}

}  // namespace

std::string strip_code_fences(std::string_view raw) {
  const auto text = trim(raw);
  char fence = 0;
  std::size_t open = std::string_view::npos;
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    if (is_fence_at(text, i, fence)) {
      open = i;
      break;
    }
  }
  if (open == std::string_view::npos) return std::string(text);

  std::size_t pos = open;
  while (pos < text.size() && text[pos] == fence) ++pos;
  const std::size_t fence_len = pos - open;
  // info string such as "json"
  while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) ||
                               text[pos] == '_' || text[pos] == '-' || text[pos] == '+')) {
    ++pos;
  }
  const std::string closing(fence_len, fence);
  const auto close = text.find(closing, pos);
  const auto body = close == std::string_view::npos ? text.substr(pos) : text.substr(pos, close - pos);
  return std::string(trim(body));
}

Rationale parse_rationale_json(std::string_view raw) {
  const auto j = parse_object<SchemaError>(raw, "rationale");
  std::array<std::string, 5> values;
  for (std::size_t i = 0; i < kRationaleKeys.size(); ++i) {
    const auto* key = kRationaleKeys[i];
    if (!j.contains(key)) throw SchemaError(key);
    const auto& v = j.at(key);
    if (!v.is_string()) throw SchemaError(std::string(key) + " not a string");
    values[i] = v.get<std::string>();
    if (trim(values[i]).empty()) throw SchemaError(std::string(key) + " empty");
  }
  return Rationale{values[0], values[1], values[2], values[3], values[4]};
}

std::string serialize_rationale(const Rationale& r) {
  nlohmann::ordered_json j;
  j["title"] = r.title;
  j["rationale1"] = r.rationale1;
  j["rationale2"] = r.rationale2;
  j["rationale3"] = r.rationale3;
  j["rationale4"] = r.rationale4;
  return j.dump(2);
}

std::optional<ReasoningMode> mode_from_label(std::string_view label) {
  const auto key = normalize_mode(label);
  for (auto m : kAllModes) {
    if (normalize_mode(to_string(m)) == key) return m;
  }
  return std::nullopt;
}

ModeAssignment parse_mode_label(std::string_view raw) {
  const auto body = strip_code_fences(raw);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      throw UnparseableLabel("malformed mode label JSON");
    }
    if (!j.is_object() || !j.contains("modes")) throw UnparseableLabel("missing \"modes\" key");
    const auto& modes = j.at("modes");
    std::vector<std::string> labels;
    if (modes.is_string()) {
      labels = split_mode_text(modes.get<std::string>());
    } else if (modes.is_array()) {
      for (const auto& m : modes) {
        if (m.is_null()) continue;
        if (!m.is_string()) throw UnparseableLabel("mode entries must be strings");
        const auto t = strip_token_punct(m.get<std::string>());
        if (!t.empty()) labels.push_back(t);
      }
    } else {
      throw UnparseableLabel("\"modes\" must be a list of labels");
    }
    return assign_modes(labels);
  }
  return assign_modes(split_mode_text(body));
}

std::string normalize_stage_label(std::string_view label) {
  std::string out;
  for (unsigned char c : label) {
    if (c == ' ' || c == '_') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<DesignStage> stage_from_label(std::string_view label) {
  const auto key = normalize_stage_label(label);
  for (auto s : kAllStages) {
    if (normalize_stage_label(to_label(s)) == key) return s;
  }
  return std::nullopt;
}

DesignStage parse_stage_label(std::string_view raw) {
  auto body = strip_code_fences(raw);
  std::string label;
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      throw UnparseableLabel("malformed stage label JSON");
    }
    if (!j.is_object() || !j.contains("stage") || !j.at("stage").is_string()) {
      throw UnparseableLabel("missing \"stage\" label");
    }
    label = j.at("stage").get<std::string>();
  } else {
    label = body;
    if (label.size() >= 2 && label.front() == '"' && label.back() == '"') {
      label = label.substr(1, label.size() - 2);
    }
  }
  const auto stage = stage_from_label(label);
  if (!stage) throw UnparseableLabel("unknown design stage '" + label + "'");
  return *stage;
}

void validate_chain_plan(const ChainPlan& plan) {
  const auto& steps = plan.steps;
  if (steps.size() < 3 || steps.size() > 4) {
    throw InvalidChain("chain must have 3-4 steps, got " + std::to_string(steps.size()));
  }
  if (!plan.modes.valid()) throw InvalidChain("secondary mode repeats the primary mode");
  std::set<std::string> titles;
  for (const auto& s : steps) {
    if (trim(s.title).empty()) throw InvalidChain("step title is empty");
    if (!titles.insert(title_key(s.title)).second) {
      throw InvalidChain("duplicate step title '" + s.title + "'");
    }
  }
  if (steps.front().parallel_group) throw InvalidChain("first step must not be in a parallel group");
  if (steps.back().parallel_group) {
    throw InvalidChain("final solution step must not be in a parallel group");
  }
  std::set<std::string> closed;
  for (std::size_t i = 0; i < steps.size();) {
    if (!steps[i].parallel_group) {
      ++i;
      continue;
    }
    const auto& tag = *steps[i].parallel_group;
    if (closed.contains(tag)) throw InvalidChain("parallel group '" + tag + "' is not contiguous");
    std::size_t j = i;
    while (j < steps.size() && steps[j].parallel_group == tag) ++j;
    if (j - i < 2) throw InvalidChain("parallel group '" + tag + "' covers a single step");
    closed.insert(tag);
    i = j;
  }
}

namespace {

ChainStep step_from_json(const nlohmann::json& s) {
  if (!s.is_object()) throw InvalidChain("chain step is not an object");
  if (!s.contains("title") || !s.at("title").is_string()) {
    throw InvalidChain("chain step lacks a title");
  }
  ChainStep step;
  step.title = std::string(trim(s.at("title").get<std::string>()));
  if (s.contains("brief") && !s.at("brief").is_null()) {
    if (!s.at("brief").is_string()) throw InvalidChain("chain step brief is not text");
    step.brief = std::string(trim(s.at("brief").get<std::string>()));
  }
  if (s.contains("parallel_group") && !s.at("parallel_group").is_null()) {
    const auto& g = s.at("parallel_group");
    std::string tag = g.is_string() ? std::string(trim(g.get<std::string>())) : g.dump();
    if (!tag.empty()) step.parallel_group = std::move(tag);
  }
  return step;
}

}  // namespace

ChainPlan parse_chain_plan(std::string_view raw, const ModeAssignment& modes) {
  const auto j = parse_object<InvalidChain>(raw, "chain plan");
  if (!j.contains("steps") || !j.at("steps").is_array()) {
    throw InvalidChain("chain plan lacks a \"steps\" list");
  }
  ChainPlan plan;
  plan.modes = modes;
  for (const auto& s : j.at("steps")) plan.steps.push_back(step_from_json(s));
  validate_chain_plan(plan);
  return plan;
}

ChainStep parse_step_draft(std::string_view raw) {
  const auto j = parse_object<InvalidChain>(raw, "step draft");
  if (!j.contains("steps") || !j.at("steps").is_array() || j.at("steps").size() != 1) {
    throw InvalidChain("step draft must contain exactly one step");
  }
  auto step = step_from_json(j.at("steps").at(0));
  if (step.title.empty()) throw InvalidChain("step title is empty");
  step.parallel_group.reset();
  return step;
}

std::vector<std::string> parse_string_list(std::string_view raw, std::string_view key,
                                           std::size_t min_items) {
  const auto j = parse_object<StepListError>(raw, "step list");
  const std::string k(key);
  if (!j.contains(k) || !j.at(k).is_array()) {
    throw StepListError("step list lacks a \"" + k + "\" array");
  }
  std::vector<std::string> out;
  for (const auto& item : j.at(k)) {
    if (!item.is_string()) throw StepListError("\"" + k + "\" entries must be strings");
    const std::string t(trim(item.get<std::string>()));
    if (t.empty()) throw StepListError("\"" + k + "\" contains an empty entry");
    out.emplace_back(t);
  }
  if (out.size() < min_items) {
    throw StepListError("expected at least " + std::to_string(min_items) + " \"" + k +
                        "\" entries, got " + std::to_string(out.size()));
  }
  return out;
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c);
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

void log_word_count_deviation(const Rationale& r) {
  const std::array<const std::string*, 4> fields{&r.rationale1, &r.rationale2, &r.rationale3,
                                                 &r.rationale4};
  std::size_t total = word_count(r.title);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto n = word_count(*fields[i]);
    total += n;
    if (n < 15 || n > 45) {
      spdlog::warn("rationale{} has {} words (target about 30)", i + 1, n);
    }
  }
  if (total < 100 || total > 180) {
    spdlog::warn("rationale has {} words in total (target about 140)", total);
  }
}

bool transition_allowed(RunState from, RunState to) {
  using S = RunState;
  if (to == S::Failed) return true;
  switch (to) {
    case S::Classified: return from == S::Pending || from == S::Stale || from == S::Failed;
    case S::Completed: return from == S::Classified;
    case S::Stale: return from == S::Pending || from == S::Completed || from == S::Failed;
    default: return false;
  }
}

void transition(ChainNode& node, RunState to, TransitionAudit* audit) {
  if (!transition_allowed(node.run_state, to)) {
    throw InvalidTransition("chain node " + node.id.value() + " cannot move from " +
                            std::string(to_string(node.run_state)) + " to " +
                            std::string(to_string(to)));
  }
  if (audit) audit->record({node.id, node.run_state, to});
  node.run_state = to;
  if (to == RunState::Classified || to == RunState::Failed) node.rationale.reset();
}

// ReasoningEngine

ReasoningEngine::ReasoningEngine(const TemplateCatalog& catalog, int max_retries)
    : catalog_(&catalog), max_retries_(max_retries) {
  check_max_retries(max_retries);
}

std::string ReasoningEngine::step_text(std::string_view title, std::string_view brief) {
  if (trim(brief).empty()) return std::string(title);
  return std::string(title) + ": " + std::string(brief);
}

template <class T>
T ReasoningEngine::call(TemplateId id, const PromptContext& ctx, const Gateway& gateway,
                        const std::function<T(const std::string&)>& validator) const {
  const auto request = gateway.make_request(catalog_->render(id, ctx));
  try {
    return gateway.complete_validated<T>(request, validator, max_retries_);
  } catch (const ValidationExhausted& e) {
    if (e.cause()) std::rethrow_exception(e.cause());
    throw;
  }
}

ModeAssignment ReasoningEngine::classify_modes(std::string_view goal, const PromptContext& ctx,
                                               const Gateway& gateway,
                                               std::span<const Exemplar> exemplars) const {
  if (trim(goal).empty()) throw EmptyGoal();
  PromptContext c = ctx;
  c.goal = std::string(goal);
  if (!exemplars.empty()) c.few_shot_example = join_exemplar_goals(exemplars);
  return call<ModeAssignment>(TemplateId::ModeClassifier, c, gateway,
                              [](const std::string& raw) { return parse_mode_label(raw); });
}

ChainPlan ReasoningEngine::generate_chain(std::string_view goal, const PromptContext& ctx,
                                          const ModeAssignment& modes,
                                          std::span<const Exemplar> exemplars,
                                          const Gateway& gateway) const {
  if (!modes.valid()) throw InvalidChain("secondary mode repeats the primary mode");
  const auto examples = exemplar_goal_lines(exemplars);
  const auto spec = build_structured_prompt(goal, ctx, examples);
  PromptContext c = ctx;
  c.goal = std::string(goal);
  c.context_str = spec.context;
  c.reasoning_modes = catalog_->reasoning_modes_text(modes, examples);
  return call<ChainPlan>(TemplateId::ChainGeneration, c, gateway,
                         [&](const std::string& raw) { return parse_chain_plan(raw, modes); });
}

DesignStage ReasoningEngine::classify_stage(std::string_view step_title,
                                            std::string_view step_brief, const PromptContext& ctx,
                                            const Gateway& gateway) const {
  if (trim(step_title).empty()) throw PreconditionFailed("step title must not be empty");
  PromptContext c = ctx;
  c.current_node_content = step_text(step_title, step_brief);
  return call<DesignStage>(TemplateId::StageClassifier, c, gateway,
                           [](const std::string& raw) { return parse_stage_label(raw); });
}

Rationale ReasoningEngine::generate_rationale(const ChainNode& node, DesignStage stage,
                                              const PromptContext& ctx,
                                              const std::optional<Exemplar>& exemplar,
                                              const Gateway& gateway) const {
  if (node.run_state != RunState::Classified && node.run_state != RunState::Stale) {
    throw PreconditionFailed("rationale generation needs a classified or stale node");
  }
  PromptContext c = ctx;
  c.rationale_type = std::string(to_label(stage));
  c.rationale_type_description = std::string(stage_goal(stage));
  c.current_node_content = step_text(node.title, node.brief);
  c.few_shot_example = exemplar ? exemplar->output_text : std::string(kNoExample);
  if (!c.reasoning_modes) {
    std::vector<std::string> examples;
    if (exemplar) examples.push_back("- " + exemplar->goal_text);
    c.reasoning_modes = catalog_->reasoning_modes_text(node.modes, examples);
  }
  auto r = call<Rationale>(TemplateId::RationaleGeneration, c, gateway,
                           [](const std::string& raw) { return parse_rationale_json(raw); });
  log_word_count_deviation(r);
  return r;
}

ChainStep ReasoningEngine::draft_step(std::string_view user_text, const PromptContext& ctx,
                                      const Gateway& gateway) const {
  if (trim(user_text).empty()) throw PreconditionFailed("step text must not be empty");
  PromptContext c = ctx;
  c.current_node_content = std::string(user_text);
  return call<ChainStep>(TemplateId::ChainStepDraft, c, gateway,
                         [](const std::string& raw) { return parse_step_draft(raw); });
}

}  // namespace dloop
