#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dloop/ids.hpp"

namespace dloop {

/// Canvas pixels, origin top-left.
struct Position {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

struct DesignNode {
  NodeId id;
  std::string title;
  std::vector<std::string> blocks;
  Position position;
  std::optional<std::string> color;
  std::optional<SubCanvasId> subcanvas;

  friend bool operator==(const DesignNode&, const DesignNode&) = default;
};

struct AiNode {
  NodeId id;
  std::string title;
  std::string content;
  std::optional<std::string> origin_prompt;
  Position position;
  bool user_edited = false;

  friend bool operator==(const AiNode&, const AiNode&) = default;
};

struct StickyNote {
  NodeId id;
  std::string content;
  Position position;
  std::optional<NodeId> source_chain_node;

  friend bool operator==(const StickyNote&, const StickyNote&) = default;
};

using CanvasNode = std::variant<DesignNode, AiNode, StickyNote>;

const NodeId& node_id(const CanvasNode& node);
std::string_view node_kind(const CanvasNode& node);

struct Edge {
  EdgeId id;
  NodeId source;
  NodeId target;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Node-link canvas. The public mutators keep edge integrity; cycles are
/// allowed here and only rejected when ancestor context is assembled.
class Canvas {
public:
  Canvas() = default;

  /// Builds a canvas without any integrity checks. Used by deserialization;
  /// run `validate()` on the owning session afterwards.
  static Canvas unchecked(std::map<NodeId, CanvasNode> nodes, std::vector<Edge> edges,
                          std::vector<NodeId> insertion_order);

  NodeId add_node(CanvasNode node);
  /// Removes the node and its incident edges; returns the removed edge count.
  std::size_t remove_node(const NodeId& id);
  const Edge& connect(EdgeId id, const NodeId& source, const NodeId& target);
  void disconnect(const EdgeId& id);

  [[nodiscard]] bool contains(const NodeId& id) const { return nodes_.contains(id); }
  [[nodiscard]] const CanvasNode& node(const NodeId& id) const;
  [[nodiscard]] CanvasNode& node(const NodeId& id);
  [[nodiscard]] const Edge* find_edge(const EdgeId& id) const;
  [[nodiscard]] bool connected(const NodeId& source, const NodeId& target) const;

  /// All ancestors of `id` in topological order, ties broken by insertion
  /// order; `id` itself excluded. Throws CycleDetected when the ancestor
  /// subgraph (including `id`) is cyclic.
  [[nodiscard]] std::vector<NodeId> predecessors_in_order(const NodeId& id) const;

  [[nodiscard]] const std::map<NodeId, CanvasNode>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
  [[nodiscard]] const std::vector<NodeId>& insertion_order() const noexcept { return order_; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  friend bool operator==(const Canvas&, const Canvas&) = default;

private:
  std::map<NodeId, CanvasNode> nodes_;
  std::vector<Edge> edges_;
  std::vector<NodeId> order_;
};

/// Ancestors of `target` over `edges`, sorted topologically with `rank` as
/// the tie-break among incomparable nodes (smaller rank first).
std::vector<NodeId> ordered_ancestors(std::span<const Edge> edges, const NodeId& target,
                                      const std::function<std::size_t(const NodeId&)>& rank);

/// All nodes reachable from `source` (excluding `source` unless on a cycle).
std::vector<NodeId> descendants(std::span<const Edge> edges, const NodeId& source);

bool reaches(std::span<const Edge> edges, const NodeId& from, const NodeId& to);

}  // namespace dloop
