#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dloop/clock.hpp"
#include "dloop/graph.hpp"
#include "dloop/reasoning_types.hpp"

namespace dloop {

inline constexpr int kSchemaVersion = 1;

struct DesignContext {
  std::string background;
  std::string design_goal;
  std::vector<std::string> style_preferences;

  [[nodiscard]] bool complete() const noexcept {
    return !background.empty() && !design_goal.empty();
  }

  friend bool operator==(const DesignContext&, const DesignContext&) = default;
};

/// Reasoning workspace attached to one design node. Chain nodes form a
/// single-source, weakly connected DAG; notes sit beside it.
struct SubCanvas {
  SubCanvasId id;
  NodeId parent;
  std::string goal;
  ModeAssignment modes;
  std::map<NodeId, ChainNode> chain_nodes;
  std::vector<Edge> edges;
  std::map<NodeId, StickyNote> notes;

  /// Chain node ids sorted by order_index (then id).
  [[nodiscard]] std::vector<NodeId> chain_order() const;
  [[nodiscard]] std::vector<NodeId> predecessors(const NodeId& id) const;
  [[nodiscard]] std::vector<NodeId> successors(const NodeId& id) const;
  [[nodiscard]] std::vector<NodeId> sources() const;
  [[nodiscard]] const ChainNode& chain_node(const NodeId& id) const;
  [[nodiscard]] ChainNode& chain_node(const NodeId& id);

  friend bool operator==(const SubCanvas&, const SubCanvas&) = default;
};

enum class EventKind { Add, Delete, Revise, Regenerate, RefinePrompt, OutputToCanvas, CreateNote };

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view text);

struct CoCreationEvent {
  EventKind kind = EventKind::Add;
  std::string target;
  std::string payload;
  Timestamp at{};

  friend bool operator==(const CoCreationEvent&, const CoCreationEvent&) = default;
};

struct Session {
  std::string id;
  DesignContext context;
  Canvas main_canvas;
  std::map<SubCanvasId, SubCanvas> subcanvases;
  int schema_version = kSchemaVersion;
  Timestamp created_at{};
  Timestamp modified_at{};
  std::vector<CoCreationEvent> event_log;

  [[nodiscard]] const SubCanvas& subcanvas(const SubCanvasId& id) const;
  [[nodiscard]] SubCanvas& subcanvas(const SubCanvasId& id);

  friend bool operator==(const Session&, const Session&) = default;
};

Session create_session(DesignContext context, IdSource& ids, const Clock& clock);

void touch(Session& session, const Clock& clock);

// Session-level graph operations. These keep modified_at current and
// cascade sub-canvas ownership.

NodeId add_node(Session& session, CanvasNode node, const Clock& clock);
/// Also drops the sub-canvas owned by a removed design node.
std::size_t remove_node(Session& session, const NodeId& id, const Clock& clock);
const Edge& connect(Session& session, const NodeId& source, const NodeId& target, IdSource& ids,
                    const Clock& clock);
void disconnect(Session& session, const EdgeId& id, const Clock& clock);

struct Violation {
  std::string type;
  std::string id;
  std::string invariant;

  friend bool operator==(const Violation&, const Violation&) = default;
};

std::string to_string(const Violation& v);

/// Empty iff every session, canvas, sub-canvas and chain-node invariant holds.
std::vector<Violation> validate(const Session& session);

}  // namespace dloop
