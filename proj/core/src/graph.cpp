#include "dloop/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "dloop/error.hpp"

namespace dloop {

const NodeId& node_id(const CanvasNode& node) {
  return std::visit([](const auto& n) -> const NodeId& { return n.id; }, node);
}

std::string_view node_kind(const CanvasNode& node) {
  struct Visitor {
    std::string_view operator()(const DesignNode&) const { return "design"; }
    std::string_view operator()(const AiNode&) const { return "ai"; }
    std::string_view operator()(const StickyNote&) const { return "note"; }
  };
  return std::visit(Visitor{}, node);
}

Canvas Canvas::unchecked(std::map<NodeId, CanvasNode> nodes, std::vector<Edge> edges,
                         std::vector<NodeId> insertion_order) {
  Canvas c;
  c.nodes_ = std::move(nodes);
  c.edges_ = std::move(edges);
  c.order_ = std::move(insertion_order);
  return c;
}

NodeId Canvas::add_node(CanvasNode node) {
  NodeId id = node_id(node);
  if (id.empty()) throw PreconditionFailed("node id must not be empty");
  if (nodes_.contains(id)) throw DuplicateId(id.value());
  nodes_.emplace(id, std::move(node));
  order_.push_back(id);
  return id;
}

std::size_t Canvas::remove_node(const NodeId& id) {
  if (!nodes_.erase(id)) throw UnknownId(id.value());
  std::erase(order_, id);
  return std::erase_if(edges_, [&](const Edge& e) { return e.source == id || e.target == id; });
}

const Edge& Canvas::connect(EdgeId id, const NodeId& source, const NodeId& target) {
  if (!nodes_.contains(source)) throw UnknownId(source.value());
  if (!nodes_.contains(target)) throw UnknownId(target.value());
  if (source == target) throw SelfLoop(source.value());
  if (connected(source, target)) throw DuplicateEdge(source.value(), target.value());
  if (find_edge(id)) throw DuplicateId(id.value());
  edges_.push_back(Edge{std::move(id), source, target});
  return edges_.back();
}

void Canvas::disconnect(const EdgeId& id) {
  if (!std::erase_if(edges_, [&](const Edge& e) { return e.id == id; })) {
    throw UnknownId(id.value());
  }
}

const CanvasNode& Canvas::node(const NodeId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownId(id.value());
  return it->second;
}

CanvasNode& Canvas::node(const NodeId& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownId(id.value());
  return it->second;
}

const Edge* Canvas::find_edge(const EdgeId& id) const {
  auto it = std::find_if(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.id == id; });
  return it == edges_.end() ? nullptr : &*it;
}

bool Canvas::connected(const NodeId& source, const NodeId& target) const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [&](const Edge& e) { return e.source == source && e.target == target; });
}

std::vector<NodeId> Canvas::predecessors_in_order(const NodeId& id) const {
  if (!nodes_.contains(id)) throw UnknownId(id.value());
  std::unordered_map<NodeId, std::size_t> rank;
  for (std::size_t i = 0; i < order_.size(); ++i) rank.emplace(order_[i], i);
  return ordered_ancestors(edges_, id, [&](const NodeId& n) {
    auto it = rank.find(n);
    return it == rank.end() ? order_.size() : it->second;
  });
}

std::vector<NodeId> ordered_ancestors(std::span<const Edge> edges, const NodeId& target,
                                      const std::function<std::size_t(const NodeId&)>& rank) {
  std::unordered_map<NodeId, std::vector<NodeId>> parents;
  for (const auto& e : edges) parents[e.target].push_back(e.source);

  std::unordered_set<NodeId> ancestors;
  std::deque<NodeId> frontier{target};
  while (!frontier.empty()) {
    NodeId cur = std::move(frontier.front());
    frontier.pop_front();
    auto it = parents.find(cur);
    if (it == parents.end()) continue;
    for (const auto& p : it->second) {
      if (ancestors.insert(p).second) frontier.push_back(p);
    }
  }
  if (ancestors.contains(target)) throw CycleDetected(target.value());

  std::unordered_map<NodeId, std::size_t> indegree;
  std::unordered_map<NodeId, std::vector<NodeId>> children;
  for (const auto& a : ancestors) indegree[a] = 0;
  for (const auto& e : edges) {
    if (ancestors.contains(e.source) && ancestors.contains(e.target)) {
      ++indegree[e.target];
      children[e.source].push_back(e.target);
    }
  }

  using Key = std::pair<std::size_t, NodeId>;
  std::set<Key> ready;
  for (const auto& [n, deg] : indegree) {
    if (deg == 0) ready.emplace(rank(n), n);
  }
  std::vector<NodeId> out;
  out.reserve(ancestors.size());
  while (!ready.empty()) {
    auto [r, n] = *ready.begin();
    ready.erase(ready.begin());
    for (const auto& c : children[n]) {
      if (--indegree[c] == 0) ready.emplace(rank(c), c);
    }
    out.push_back(std::move(n));
  }
  if (out.size() != ancestors.size()) throw CycleDetected(target.value());
  return out;
}

std::vector<NodeId> descendants(std::span<const Edge> edges, const NodeId& source) {
  std::unordered_map<NodeId, std::vector<NodeId>> children;
  for (const auto& e : edges) children[e.source].push_back(e.target);
  std::vector<NodeId> out;
  std::unordered_set<NodeId> seen;
  std::deque<NodeId> frontier{source};
  while (!frontier.empty()) {
    NodeId cur = std::move(frontier.front());
    frontier.pop_front();
    for (const auto& c : children[cur]) {
      if (seen.insert(c).second) {
        out.push_back(c);
        frontier.push_back(c);
      }
    }
  }
  return out;
}

bool reaches(std::span<const Edge> edges, const NodeId& from, const NodeId& to) {
  if (from == to) return true;
  const auto reach = descendants(edges, from);
  return std::find(reach.begin(), reach.end(), to) != reach.end();
}

}  // namespace dloop
