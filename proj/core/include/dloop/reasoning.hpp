#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dloop/exemplar.hpp"
#include "dloop/gateway.hpp"
#include "dloop/prompt.hpp"
#include "dloop/reasoning_types.hpp"

namespace dloop {

// Output envelopes

/// Returns the body of the first fenced block (``` or ~~~), trimmed; the
/// trimmed input when there is no fence.
std::string strip_code_fences(std::string_view raw);

Rationale parse_rationale_json(std::string_view raw);
std::string serialize_rationale(const Rationale& rationale);

/// Accepts `{"modes": [...]}` or bare text such as "Inductive, Abductive".
ModeAssignment parse_mode_label(std::string_view raw);
/// Accepts `{"stage": "..."}` or a bare label.
DesignStage parse_stage_label(std::string_view raw);
/// Lower case with spaces and underscores removed.
std::string normalize_stage_label(std::string_view label);
std::optional<DesignStage> stage_from_label(std::string_view label);
std::optional<ReasoningMode> mode_from_label(std::string_view label);

/// `{"steps": [{title, brief, parallel_group}]}`, validated.
ChainPlan parse_chain_plan(std::string_view raw, const ModeAssignment& modes);
/// Throws InvalidChain naming the first broken rule.
void validate_chain_plan(const ChainPlan& plan);
/// A single drafted step: `{"steps": [{title, brief}]}` with exactly one entry.
ChainStep parse_step_draft(std::string_view raw);

/// `{key: [string, ...]}` with at least `min_items` non-empty strings.
std::vector<std::string> parse_string_list(std::string_view raw, std::string_view key,
                                           std::size_t min_items);

std::size_t word_count(std::string_view text);
/// Logs (never rejects) rationale fields far from the ~30 / ~140 word targets.
void log_word_count_deviation(const Rationale& rationale);

// Run-state machine

bool transition_allowed(RunState from, RunState to);

struct TransitionRecord {
  NodeId node;
  RunState from = RunState::Pending;
  RunState to = RunState::Pending;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

class TransitionAudit {
public:
  void record(TransitionRecord r) { records_.push_back(std::move(r)); }
  [[nodiscard]] const std::vector<TransitionRecord>& records() const noexcept { return records_; }
  void clear() { records_.clear(); }

private:
  std::vector<TransitionRecord> records_;
};

/// Moves `node` to `to` or throws InvalidTransition. Entering Classified or
/// Failed drops the rationale.
void transition(ChainNode& node, RunState to, TransitionAudit* audit = nullptr);

// Model-backed steps

class ReasoningEngine {
public:
  explicit ReasoningEngine(const TemplateCatalog& catalog, int max_retries = 1);

  ModeAssignment classify_modes(std::string_view goal, const PromptContext& ctx,
                                const Gateway& gateway,
                                std::span<const Exemplar> exemplars = {}) const;

  ChainPlan generate_chain(std::string_view goal, const PromptContext& ctx,
                           const ModeAssignment& modes, std::span<const Exemplar> exemplars,
                           const Gateway& gateway) const;

  DesignStage classify_stage(std::string_view step_title, std::string_view step_brief,
                             const PromptContext& ctx, const Gateway& gateway) const;

  /// `ctx.context_str` must already hold the completed preceding steps.
  Rationale generate_rationale(const ChainNode& node, DesignStage stage, const PromptContext& ctx,
                               const std::optional<Exemplar>& exemplar,
                               const Gateway& gateway) const;

  ChainStep draft_step(std::string_view user_text, const PromptContext& ctx,
                       const Gateway& gateway) const;

  [[nodiscard]] const TemplateCatalog& catalog() const noexcept { return *catalog_; }
  [[nodiscard]] int max_retries() const noexcept { return max_retries_; }

  /// Chain-node text handed to the stage classifier and rationale prompt.
  static std::string step_text(std::string_view title, std::string_view brief);

private:
  template <class T>
  T call(TemplateId id, const PromptContext& ctx, const Gateway& gateway,
         const std::function<T(const std::string&)>& validator) const;

  const TemplateCatalog* catalog_;
  int max_retries_;
};

}  // namespace dloop
