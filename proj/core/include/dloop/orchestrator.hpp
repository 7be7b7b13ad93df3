#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dloop/exemplar.hpp"
#include "dloop/gateway.hpp"
#include "dloop/prompt.hpp"
#include "dloop/reasoning.hpp"
#include "dloop/session.hpp"

namespace dloop {

/// Called at named points inside mutating operations; throwing from it
/// aborts the operation. Used to test transactional behaviour.
using FaultHook = std::function<void(std::string_view point)>;

class InjectedFault : public Error {
public:
  explicit InjectedFault(std::string_view point)
      : Error("injected_fault", "injected failure at " + std::string(point)) {}
};

struct PipelineResult {
  std::vector<NodeId> created_nodes;
  std::vector<EdgeId> created_edges;
  std::vector<CallSummary> audit;
};

/// Field-wise edits for cocreate_revise; unset fields stay untouched.
struct ChainNodeEdits {
  std::optional<std::string> title;
  std::optional<std::string> brief;
  std::optional<std::string> rationale_title;
  std::optional<std::string> rationale1;
  std::optional<std::string> rationale2;
  std::optional<std::string> rationale3;
  std::optional<std::string> rationale4;

  [[nodiscard]] bool touches_rationale() const {
    return rationale_title || rationale1 || rationale2 || rationale3 || rationale4;
  }
};

/// Title line followed by one "- " bullet per rationale field. Embedded
/// newlines continue on lines indented by two spaces.
std::string render_rationale_note(const Rationale& rationale);
Rationale parse_rationale_note(std::string_view note);

/// "(no prior steps)" for an empty list, otherwise numbered lines.
std::string format_context(const std::vector<std::string>& steps);
/// Background with style preferences folded in.
std::string background_text(const DesignContext& context);

/// Chain node ids split into consecutive segments: a maximal run sharing a
/// parallel_group tag, or a single untagged node.
std::vector<std::vector<std::size_t>> plan_segments(const std::vector<ChainStep>& steps);

/// Ancestor set of every chain node in `sub`.
std::map<NodeId, std::set<NodeId>> chain_ancestors(const SubCanvas& sub);

/// Chain ancestors of `id` in topological order, ties by order_index.
std::vector<NodeId> chain_predecessors_in_order(const SubCanvas& sub, const NodeId& id);

class Orchestrator {
public:
  Orchestrator(const TemplateCatalog& catalog, const ExemplarStore* exemplars, Gateway gateway,
               IdSource& ids, const Clock& clock);
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  void set_fault_hook(FaultHook hook) { hook_ = std::move(hook); }

  PipelineResult generate_pipeline(Session& session);
  DesignNode fill_step_content(Session& session, const NodeId& node);
  AiNode brainstorm(Session& session, const NodeId& ai_node);

  SubCanvas open_subcanvas(Session& session, const NodeId& design_node, std::string_view goal);
  ChainNode run_chain_node(Session& session, const SubCanvasId& sub, const NodeId& node);
  ChainNode regenerate(Session& session, const SubCanvasId& sub, const NodeId& node);
  SubCanvas refine_prompt(Session& session, const SubCanvasId& sub, std::string_view new_goal);

  ChainNode cocreate_add(Session& session, const SubCanvasId& sub,
                         const std::optional<NodeId>& after, std::string_view user_text);
  std::size_t cocreate_delete(Session& session, const SubCanvasId& sub, const NodeId& node);
  ChainNode cocreate_revise(Session& session, const SubCanvasId& sub, const NodeId& node,
                            const ChainNodeEdits& edits);

  NodeId output_to_canvas(Session& session, const SubCanvasId& sub, const NodeId& node);
  /// Adds a free note to the main canvas, or to `sub` when given.
  NodeId create_note(Session& session, const std::optional<SubCanvasId>& sub,
                     std::string_view content, Position position);

  [[nodiscard]] const CallLog& audit() const noexcept { return audit_; }
  [[nodiscard]] const TransitionAudit& transitions() const noexcept { return transitions_; }
  [[nodiscard]] const ReasoningEngine& engine() const noexcept { return engine_; }

private:
  PromptContext base_context(const Session& session) const;
  PromptContext chain_context(const Session& session, const SubCanvas& sub) const;
  std::string main_canvas_context(const Session& session, const NodeId& node) const;
  std::string chain_context_str(const SubCanvas& sub, const NodeId& node) const;
  std::vector<Exemplar> exemplars_for(std::string_view query, std::size_t k) const;

  void execute_chain_node(Session& session, SubCanvas& sub, ChainNode& node);
  void materialize(SubCanvas& sub, const ChainPlan& plan);
  void mark_stale(SubCanvas& sub, const std::map<NodeId, std::set<NodeId>>& before,
                  const std::optional<NodeId>& edited, const std::set<NodeId>& fresh);
  void log_event(Session& session, EventKind kind, std::string target, std::string payload);
  void fault(std::string_view point) const;

  const TemplateCatalog* catalog_;
  const ExemplarStore* exemplars_;
  CallLog audit_;
  Gateway gateway_;
  ReasoningEngine engine_;
  IdSource* ids_;
  const Clock* clock_;
  FaultHook hook_;
  TransitionAudit transitions_;
};

}  // namespace dloop
