#include "dloop/session.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "dloop/error.hpp"

namespace dloop {

namespace {

constexpr std::array kEventNames{
    std::pair{EventKind::Add, "add"},
    std::pair{EventKind::Delete, "delete"},
    std::pair{EventKind::Revise, "revise"},
    std::pair{EventKind::Regenerate, "regenerate"},
    std::pair{EventKind::RefinePrompt, "refine_prompt"},
    std::pair{EventKind::OutputToCanvas, "output_to_canvas"},
    std::pair{EventKind::CreateNote, "create_note"},
};

void check_edges(std::string_view owner, const std::vector<Edge>& edges,
                 const std::function<bool(const NodeId&)>& is_member,
                 std::vector<Violation>& out) {
  std::set<std::pair<NodeId, NodeId>> pairs;
  std::set<EdgeId> ids;
  for (const auto& e : edges) {
    if (!ids.insert(e.id).second) {
      out.push_back({"Edge", e.id.value(), "edge id unique within " + std::string(owner)});
    }
    if (e.source == e.target) {
      out.push_back({"Edge", e.id.value(), "source != target"});
    }
    if (!is_member(e.source) || !is_member(e.target)) {
      out.push_back({"Edge", e.id.value(), "both endpoints exist in " + std::string(owner)});
    }
    if (!pairs.emplace(e.source, e.target).second) {
      out.push_back({"Edge", e.id.value(), "no duplicate (source, target) pairs"});
    }
  }
}

bool is_acyclic(const std::map<NodeId, ChainNode>& nodes, const std::vector<Edge>& edges) {
  std::unordered_map<NodeId, std::size_t> indegree;
  std::unordered_map<NodeId, std::vector<NodeId>> children;
  for (const auto& [id, _] : nodes) indegree[id] = 0;
  for (const auto& e : edges) {
    if (!nodes.contains(e.source) || !nodes.contains(e.target)) continue;
    ++indegree[e.target];
    children[e.source].push_back(e.target);
  }
  std::deque<NodeId> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto n = ready.front();
    ready.pop_front();
    ++seen;
    for (const auto& c : children[n]) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  return seen == nodes.size();
}

bool weakly_connected(const std::map<NodeId, ChainNode>& nodes, const std::vector<Edge>& edges) {
  if (nodes.empty()) return true;
  std::unordered_map<NodeId, std::vector<NodeId>> adj;
  for (const auto& e : edges) {
    if (!nodes.contains(e.source) || !nodes.contains(e.target)) continue;
    adj[e.source].push_back(e.target);
    adj[e.target].push_back(e.source);
  }
  std::unordered_set<NodeId> seen{nodes.begin()->first};
  std::deque<NodeId> frontier{nodes.begin()->first};
  while (!frontier.empty()) {
    auto n = frontier.front();
    frontier.pop_front();
    for (const auto& m : adj[n]) {
      if (seen.insert(m).second) frontier.push_back(m);
    }
  }
  return seen.size() == nodes.size();
}

void check_chain_node(const NodeId& key, const ChainNode& n, std::vector<Violation>& out) {
  const auto& id = n.id.value();
  if (key != n.id) out.push_back({"ChainNode", id, "keyed by its own id"});
  if (n.title.empty()) out.push_back({"ChainNode", id, "title non-empty"});
  if (n.rationale && n.run_state != RunState::Completed && n.run_state != RunState::Stale) {
    out.push_back({"ChainNode", id, "rationale present implies run_state in {Completed, Stale}"});
  }
  if (n.stage && n.run_state == RunState::Pending) {
    out.push_back({"ChainNode", id, "stage present implies run_state != Pending"});
  }
  if (!n.modes.valid()) {
    out.push_back({"ChainNode", id, "secondary mode differs from primary"});
  }
}

}  // namespace

std::vector<NodeId> SubCanvas::chain_order() const {
  std::vector<const ChainNode*> nodes;
  nodes.reserve(chain_nodes.size());
  for (const auto& [_, n] : chain_nodes) nodes.push_back(&n);
  std::stable_sort(nodes.begin(), nodes.end(), [](const ChainNode* a, const ChainNode* b) {
    return a->order_index < b->order_index;
  });
  std::vector<NodeId> out;
  out.reserve(nodes.size());
  for (const auto* n : nodes) out.push_back(n->id);
  return out;
}

std::vector<NodeId> SubCanvas::predecessors(const NodeId& id) const {
  std::vector<NodeId> out;
  for (const auto& e : edges) {
    if (e.target == id) out.push_back(e.source);
  }
  return out;
}

std::vector<NodeId> SubCanvas::successors(const NodeId& id) const {
  std::vector<NodeId> out;
  for (const auto& e : edges) {
    if (e.source == id) out.push_back(e.target);
  }
  return out;
}

std::vector<NodeId> SubCanvas::sources() const {
  std::unordered_set<NodeId> has_parent;
  for (const auto& e : edges) has_parent.insert(e.target);
  std::vector<NodeId> out;
  for (const auto& id : chain_order()) {
    if (!has_parent.contains(id)) out.push_back(id);
  }
  return out;
}

const ChainNode& SubCanvas::chain_node(const NodeId& id) const {
  auto it = chain_nodes.find(id);
  if (it == chain_nodes.end()) throw UnknownId(id.value());
  return it->second;
}

ChainNode& SubCanvas::chain_node(const NodeId& id) {
  auto it = chain_nodes.find(id);
  if (it == chain_nodes.end()) throw UnknownId(id.value());
  return it->second;
}

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kEventNames) {
    if (k == kind) return name;
  }
  return "add";
}

std::optional<EventKind> event_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kEventNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

const SubCanvas& Session::subcanvas(const SubCanvasId& sid) const {
  auto it = subcanvases.find(sid);
  if (it == subcanvases.end()) throw UnknownId(sid.value());
  return it->second;
}

SubCanvas& Session::subcanvas(const SubCanvasId& sid) {
  auto it = subcanvases.find(sid);
  if (it == subcanvases.end()) throw UnknownId(sid.value());
  return it->second;
}

Session create_session(DesignContext context, IdSource& ids, const Clock& clock) {
  Session s;
  s.id = ids.next();
  s.context = std::move(context);
  s.created_at = clock.now();
  s.modified_at = s.created_at;
  return s;
}

void touch(Session& session, const Clock& clock) {
  session.modified_at = std::max(clock.now(), session.created_at);
}

NodeId add_node(Session& session, CanvasNode node, const Clock& clock) {
  auto id = session.main_canvas.add_node(std::move(node));
  touch(session, clock);
  return id;
}

std::size_t remove_node(Session& session, const NodeId& id, const Clock& clock) {
  std::optional<SubCanvasId> owned;
  if (const auto* d = std::get_if<DesignNode>(&session.main_canvas.node(id))) {
    owned = d->subcanvas;
  }
  const auto removed = session.main_canvas.remove_node(id);
  if (owned) session.subcanvases.erase(*owned);
  touch(session, clock);
  return removed;
}

const Edge& connect(Session& session, const NodeId& source, const NodeId& target, IdSource& ids,
                    const Clock& clock) {
  const auto& edge = session.main_canvas.connect(EdgeId{ids.next()}, source, target);
  touch(session, clock);
  return edge;
}

void disconnect(Session& session, const EdgeId& id, const Clock& clock) {
  session.main_canvas.disconnect(id);
  touch(session, clock);
}

std::string to_string(const Violation& v) {
  return v.type + " " + v.id + ": " + v.invariant;
}

std::vector<Violation> validate(const Session& session) {
  std::vector<Violation> out;
  const auto& canvas = session.main_canvas;

  if (session.id.empty()) out.push_back({"Session", session.id, "id non-empty"});
  if (session.schema_version != kSchemaVersion) {
    out.push_back({"Session", session.id, "schema_version is supported"});
  }
  if (session.modified_at < session.created_at) {
    out.push_back({"Session", session.id, "modified_at >= created_at"});
  }

  std::unordered_set<NodeId> all_ids;
  auto claim = [&](const NodeId& id, std::string_view type) {
    if (!all_ids.insert(id).second) {
      out.push_back({std::string(type), id.value(), "node id unique within session"});
    }
  };

  // main canvas
  {
    const auto& order = canvas.insertion_order();
    std::set<NodeId> in_order(order.begin(), order.end());
    bool permutation = in_order.size() == order.size() && order.size() == canvas.size();
    for (const auto& id : order) permutation = permutation && canvas.contains(id);
    if (!permutation) {
      out.push_back({"Canvas", "main", "insertion_order is a permutation of node ids"});
    }
  }
  for (const auto& [key, node] : canvas.nodes()) {
    const auto& id = node_id(node);
    claim(id, "CanvasNode");
    if (key != id) out.push_back({"CanvasNode", id.value(), "keyed by its own id"});
    if (const auto* d = std::get_if<DesignNode>(&node)) {
      if (d->title.empty()) out.push_back({"DesignNode", id.value(), "title non-empty"});
      if (d->subcanvas) {
        auto it = session.subcanvases.find(*d->subcanvas);
        if (it == session.subcanvases.end()) {
          out.push_back({"DesignNode", id.value(), "subcanvas exists in session"});
        } else if (it->second.parent != id) {
          out.push_back({"DesignNode", id.value(), "subcanvas parent points back to node"});
        }
      }
    }
  }
  check_edges("main canvas", canvas.edges(),
              [&](const NodeId& n) { return canvas.contains(n); }, out);

  for (const auto& [key, sub] : session.subcanvases) {
    const auto& sid = sub.id.value();
    if (key != sub.id) out.push_back({"SubCanvas", sid, "keyed by its own id"});

    bool parent_ok = false;
    if (canvas.contains(sub.parent)) {
      if (const auto* d = std::get_if<DesignNode>(&canvas.node(sub.parent))) {
        parent_ok = d->subcanvas == sub.id;
      }
    }
    if (!parent_ok) {
      out.push_back({"SubCanvas", sid, "parent is a design node in main canvas owning it"});
    }
    if (!sub.modes.valid()) out.push_back({"SubCanvas", sid, "secondary mode differs"});

    for (const auto& [nid, n] : sub.chain_nodes) {
      claim(n.id, "ChainNode");
      check_chain_node(nid, n, out);
    }
    for (const auto& [nid, note] : sub.notes) {
      claim(note.id, "StickyNote");
      if (nid != note.id) out.push_back({"StickyNote", note.id.value(), "keyed by its own id"});
    }
    check_edges("subcanvas " + sid, sub.edges,
                [&](const NodeId& n) { return sub.chain_nodes.contains(n); }, out);

    if (!is_acyclic(sub.chain_nodes, sub.edges)) {
      out.push_back({"SubCanvas", sid, "chain graph is a DAG"});
    }
    if (!sub.chain_nodes.empty()) {
      if (!weakly_connected(sub.chain_nodes, sub.edges)) {
        out.push_back({"SubCanvas", sid, "chain graph is weakly connected"});
      }
      if (sub.sources().size() != 1) {
        out.push_back({"SubCanvas", sid, "chain graph has exactly one source"});
      }
    }
  }
  return out;
}

}  // namespace dloop
