#include "dloop/serialization.hpp"

#include "dloop/error.hpp"
#include "dloop/reasoning.hpp"

namespace dloop {

namespace {

using nlohmann::json;

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

json position_json(const Position& p) { return json{{"x", p.x}, {"y", p.y}}; }

Position position_from_json(const json& j) {
  return Position{j.at("x").get<double>(), j.at("y").get<double>()};
}

ReasoningMode mode_value(const json& j) {
  const auto text = j.get<std::string>();
  for (auto m : kAllModes) {
    if (to_string(m) == text) return m;
  }
  throw CorruptSession("unknown reasoning mode " + text);
}

}  // namespace

json to_json(const DesignContext& c) {
  return json{{"background", c.background},
              {"design_goal", c.design_goal},
              {"style_preferences", c.style_preferences}};
}

DesignContext design_context_from_json(const json& j) {
  DesignContext c;
  c.background = j.at("background").get<std::string>();
  c.design_goal = j.at("design_goal").get<std::string>();
  c.style_preferences = j.at("style_preferences").get<std::vector<std::string>>();
  return c;
}

json to_json(const CanvasNode& node) {
  struct Visitor {
    json operator()(const DesignNode& n) const {
      return json{{"kind", "design"},
                  {"id", n.id.value()},
                  {"title", n.title},
                  {"blocks", n.blocks},
                  {"position", position_json(n.position)},
                  {"color", optional_json(n.color)},
                  {"subcanvas", n.subcanvas ? json(n.subcanvas->value()) : json(nullptr)}};
    }
    json operator()(const AiNode& n) const {
      return json{{"kind", "ai"},
                  {"id", n.id.value()},
                  {"title", n.title},
                  {"content", n.content},
                  {"origin_prompt", optional_json(n.origin_prompt)},
                  {"position", position_json(n.position)},
                  {"user_edited", n.user_edited}};
    }
    json operator()(const StickyNote& n) const {
      return json{{"kind", "note"},
                  {"id", n.id.value()},
                  {"content", n.content},
                  {"position", position_json(n.position)},
                  {"source_chain_node",
                   n.source_chain_node ? json(n.source_chain_node->value()) : json(nullptr)}};
    }
  };
  return std::visit(Visitor{}, node);
}

CanvasNode canvas_node_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "design") {
    DesignNode n;
    n.id = NodeId{j.at("id").get<std::string>()};
    n.title = j.at("title").get<std::string>();
    n.blocks = j.at("blocks").get<std::vector<std::string>>();
    n.position = position_from_json(j.at("position"));
    n.color = optional_string(j, "color");
    if (auto s = optional_string(j, "subcanvas")) n.subcanvas = SubCanvasId{*s};
    return n;
  }
  if (kind == "ai") {
    AiNode n;
    n.id = NodeId{j.at("id").get<std::string>()};
    n.title = j.at("title").get<std::string>();
    n.content = j.at("content").get<std::string>();
    n.origin_prompt = optional_string(j, "origin_prompt");
    n.position = position_from_json(j.at("position"));
    n.user_edited = j.at("user_edited").get<bool>();
    return n;
  }
  if (kind == "note") {
    StickyNote n;
    n.id = NodeId{j.at("id").get<std::string>()};
    n.content = j.at("content").get<std::string>();
    n.position = position_from_json(j.at("position"));
    if (auto s = optional_string(j, "source_chain_node")) n.source_chain_node = NodeId{*s};
    return n;
  }
  throw CorruptSession("unknown node kind " + kind);
}

json to_json(const Edge& e) {
  return json{{"id", e.id.value()}, {"source", e.source.value()}, {"target", e.target.value()}};
}

Edge edge_from_json(const json& j) {
  return Edge{EdgeId{j.at("id").get<std::string>()}, NodeId{j.at("source").get<std::string>()},
              NodeId{j.at("target").get<std::string>()}};
}

json to_json(const ModeAssignment& m) {
  return json{{"primary", to_string(m.primary)},
              {"secondary", m.secondary ? json(to_string(*m.secondary)) : json(nullptr)}};
}

ModeAssignment modes_from_json(const json& j) {
  ModeAssignment m;
  m.primary = mode_value(j.at("primary"));
  if (j.contains("secondary") && !j.at("secondary").is_null()) {
    m.secondary = mode_value(j.at("secondary"));
  }
  return m;
}

json to_json(const Rationale& r) {
  return json{{"title", r.title},
              {"rationale1", r.rationale1},
              {"rationale2", r.rationale2},
              {"rationale3", r.rationale3},
              {"rationale4", r.rationale4}};
}

Rationale rationale_from_json(const json& j) {
  return Rationale{j.at("title").get<std::string>(), j.at("rationale1").get<std::string>(),
                   j.at("rationale2").get<std::string>(), j.at("rationale3").get<std::string>(),
                   j.at("rationale4").get<std::string>()};
}

json to_json(const ChainNode& n) {
  return json{{"id", n.id.value()},
              {"title", n.title},
              {"brief", n.brief},
              {"stage", n.stage ? json(to_label(*n.stage)) : json(nullptr)},
              {"modes", to_json(n.modes)},
              {"rationale", n.rationale ? to_json(*n.rationale) : json(nullptr)},
              {"run_state", to_string(n.run_state)},
              {"user_edited", n.user_edited},
              {"order_index", n.order_index},
              {"parallel_group", optional_json(n.parallel_group)},
              {"last_error", optional_json(n.last_error)}};
}

ChainNode chain_node_from_json(const json& j) {
  ChainNode n;
  n.id = NodeId{j.at("id").get<std::string>()};
  n.title = j.at("title").get<std::string>();
  n.brief = j.at("brief").get<std::string>();
  if (auto s = optional_string(j, "stage")) {
    const auto stage = stage_from_label(*s);
    if (!stage || to_label(*stage) != *s) throw CorruptSession("unknown design stage " + *s);
    n.stage = *stage;
  }
  n.modes = modes_from_json(j.at("modes"));
  if (j.contains("rationale") && !j.at("rationale").is_null()) {
    n.rationale = rationale_from_json(j.at("rationale"));
  }
  const auto state = j.at("run_state").get<std::string>();
  const auto parsed = run_state_from_string(state);
  if (!parsed) throw CorruptSession("unknown run_state " + state);
  n.run_state = *parsed;
  n.user_edited = j.at("user_edited").get<bool>();
  n.order_index = j.at("order_index").get<int>();
  n.parallel_group = optional_string(j, "parallel_group");
  n.last_error = optional_string(j, "last_error");
  return n;
}

json to_json(const SubCanvas& sub) {
  json nodes = json::array();
  for (const auto& [_, n] : sub.chain_nodes) nodes.push_back(to_json(n));
  json edges = json::array();
  for (const auto& e : sub.edges) edges.push_back(to_json(e));
  json notes = json::array();
  for (const auto& [_, n] : sub.notes) notes.push_back(to_json(CanvasNode{n}));
  return json{{"id", sub.id.value()},   {"parent", sub.parent.value()}, {"goal", sub.goal},
              {"modes", to_json(sub.modes)}, {"chain_nodes", std::move(nodes)},
              {"edges", std::move(edges)},   {"notes", std::move(notes)}};
}

SubCanvas subcanvas_from_json(const json& j) {
  SubCanvas sub;
  sub.id = SubCanvasId{j.at("id").get<std::string>()};
  sub.parent = NodeId{j.at("parent").get<std::string>()};
  sub.goal = j.at("goal").get<std::string>();
  sub.modes = modes_from_json(j.at("modes"));
  for (const auto& n : j.at("chain_nodes")) {
    auto node = chain_node_from_json(n);
    const auto id = node.id;
    if (!sub.chain_nodes.emplace(id, std::move(node)).second) {
      throw CorruptSession("duplicate chain node id " + id.value());
    }
  }
  for (const auto& e : j.at("edges")) sub.edges.push_back(edge_from_json(e));
  for (const auto& n : j.at("notes")) {
    auto node = canvas_node_from_json(n);
    auto* note = std::get_if<StickyNote>(&node);
    if (!note) throw CorruptSession("sub-canvas notes must be sticky notes");
    const auto id = note->id;
    if (!sub.notes.emplace(id, std::move(*note)).second) {
      throw CorruptSession("duplicate note id " + id.value());
    }
  }
  return sub;
}

json to_json(const CoCreationEvent& e) {
  return json{{"kind", to_string(e.kind)},
              {"target", e.target},
              {"payload", e.payload},
              {"at", format_timestamp(e.at)}};
}

CoCreationEvent event_from_json(const json& j) {
  const auto kind_text = j.at("kind").get<std::string>();
  const auto kind = event_kind_from_string(kind_text);
  if (!kind) throw CorruptSession("unknown event kind " + kind_text);
  return CoCreationEvent{*kind, j.at("target").get<std::string>(),
                         j.at("payload").get<std::string>(),
                         parse_timestamp(j.at("at").get<std::string>())};
}

json session_file_json(const Session& s) {
  json nodes = json::array();
  for (const auto& [_, n] : s.main_canvas.nodes()) nodes.push_back(to_json(n));
  json edges = json::array();
  for (const auto& e : s.main_canvas.edges()) edges.push_back(to_json(e));
  json order = json::array();
  for (const auto& id : s.main_canvas.insertion_order()) order.push_back(id.value());
  json subs = json::array();
  for (const auto& [_, sub] : s.subcanvases) subs.push_back(to_json(sub));
  json events = json::array();
  for (const auto& e : s.event_log) events.push_back(to_json(e));

  json session{{"id", s.id},
               {"context", to_json(s.context)},
               {"main_canvas",
                json{{"nodes", std::move(nodes)},
                     {"edges", std::move(edges)},
                     {"insertion_order", std::move(order)}}},
               {"subcanvases", std::move(subs)},
               {"schema_version", s.schema_version},
               {"created_at", format_timestamp(s.created_at)},
               {"modified_at", format_timestamp(s.modified_at)}};
  return json{{"schema_version", s.schema_version},
              {"session", std::move(session)},
              {"event_log", std::move(events)}};
}

Session session_from_file_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version") || !j.at("schema_version").is_number_integer()) {
    throw CorruptSession("session file lacks an integer schema_version");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion) throw SchemaVersionUnsupported(version);
  try {
    const auto& js = j.at("session");
    Session s;
    s.id = js.at("id").get<std::string>();
    s.context = design_context_from_json(js.at("context"));
    s.schema_version = js.at("schema_version").get<int>();
    if (s.schema_version != version) throw CorruptSession("schema_version mismatch");
    s.created_at = parse_timestamp(js.at("created_at").get<std::string>());
    s.modified_at = parse_timestamp(js.at("modified_at").get<std::string>());

    const auto& mc = js.at("main_canvas");
    std::map<NodeId, CanvasNode> nodes;
    for (const auto& n : mc.at("nodes")) {
      auto node = canvas_node_from_json(n);
      const auto id = node_id(node);
      if (!nodes.emplace(id, std::move(node)).second) {
        throw CorruptSession("duplicate node id " + id.value());
      }
    }
    std::vector<Edge> edges;
    for (const auto& e : mc.at("edges")) edges.push_back(edge_from_json(e));
    std::vector<NodeId> order;
    for (const auto& id : mc.at("insertion_order")) order.emplace_back(id.get<std::string>());
    s.main_canvas = Canvas::unchecked(std::move(nodes), std::move(edges), std::move(order));

    for (const auto& sj : js.at("subcanvases")) {
      auto sub = subcanvas_from_json(sj);
      const auto id = sub.id;
      if (!s.subcanvases.emplace(id, std::move(sub)).second) {
        throw CorruptSession("duplicate sub-canvas id " + id.value());
      }
    }
    for (const auto& e : j.at("event_log")) s.event_log.push_back(event_from_json(e));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptSession(std::string("malformed session file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CorruptSession(std::string("malformed session file: ") + e.what());
  }
}

std::string canonical_session_json(const Session& session) {
  return session_file_json(session).dump(2) + "\n";
}

}  // namespace dloop
