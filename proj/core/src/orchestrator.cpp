#include "dloop/orchestrator.hpp"

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dloop/error.hpp"

namespace dloop {

namespace {

constexpr double kPipelineX0 = 80.0;
constexpr double kPipelineDx = 260.0;
constexpr double kPipelineY = 200.0;
constexpr double kNoteDy = 220.0;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::string indent_continuations(std::string_view text) {
  std::string out;
  for (char c : text) {
    out.push_back(c);
    if (c == '\n') out += "  ";
  }
  return out;
}

std::string node_summary(const CanvasNode& node) {
  struct Visitor {
    std::string operator()(const DesignNode& n) const {
      return n.blocks.empty() ? n.title : n.title + ": " + join(n.blocks, " ");
    }
    std::string operator()(const AiNode& n) const {
      return n.content.empty() ? n.title : n.title + ": " + n.content;
    }
    std::string operator()(const StickyNote& n) const { return "Note: " + n.content; }
  };
  return std::visit(Visitor{}, node);
}

DesignNode& design_node(Session& session, const NodeId& id) {
  auto* d = std::get_if<DesignNode>(&session.main_canvas.node(id));
  if (!d) throw PreconditionFailed("node " + id.value() + " is not a design node");
  return *d;
}

void renumber(SubCanvas& sub, const std::vector<NodeId>& order) {
  int i = 0;
  for (const auto& id : order) sub.chain_node(id).order_index = i++;
}

std::string format_exemplar(const Exemplar& e) {
  return "Goal: " + e.goal_text + "\nOutput: " + e.output_text;
}

}  // namespace

std::string render_rationale_note(const Rationale& r) {
  std::string out = indent_continuations(r.title);
  for (const auto* field : {&r.rationale1, &r.rationale2, &r.rationale3, &r.rationale4}) {
    out += "\n- ";
    out += indent_continuations(*field);
  }
  return out;
}

Rationale parse_rationale_note(std::string_view note) {
  std::vector<std::string> fields(1);
  std::size_t start = 0;
  bool first = true;
  while (start <= note.size()) {
    auto end = note.find('\n', start);
    if (end == std::string_view::npos) end = note.size();
    const auto line = note.substr(start, end - start);
    if (first) {
      fields.back() = std::string(line);
      first = false;
    } else if (line.starts_with("  ")) {
      fields.back() += "\n" + std::string(line.substr(2));
    } else if (line.starts_with("- ")) {
      fields.emplace_back(line.substr(2));
    } else {
      throw SchemaError("note line is neither a bullet nor a continuation");
    }
    start = end + 1;
  }
  if (fields.size() != 5) throw SchemaError("note must hold a title and four bullets");
  return Rationale{fields[0], fields[1], fields[2], fields[3], fields[4]};
}

std::string format_context(const std::vector<std::string>& steps) {
  if (steps.empty()) return std::string(kNoPriorSteps);
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += '\n';
    out += fmt::format("{}. {}", i + 1, steps[i]);
  }
  return out;
}

std::string background_text(const DesignContext& context) {
  if (context.style_preferences.empty()) return context.background;
  return context.background + "; style preferences: " + join(context.style_preferences, ", ");
}

std::vector<std::vector<std::size_t>> plan_segments(const std::vector<ChainStep>& steps) {
  std::vector<std::vector<std::size_t>> segments;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& g = steps[i].parallel_group;
    if (g && !segments.empty() && steps[segments.back().front()].parallel_group == g) {
      segments.back().push_back(i);
    } else {
      segments.push_back({i});
    }
  }
  return segments;
}

std::map<NodeId, std::set<NodeId>> chain_ancestors(const SubCanvas& sub) {
  std::map<NodeId, std::set<NodeId>> out;
  for (const auto& [id, _] : sub.chain_nodes) {
    const auto reach = ordered_ancestors(sub.edges, id, [](const NodeId&) { return 0; });
    out.emplace(id, std::set<NodeId>(reach.begin(), reach.end()));
  }
  return out;
}

std::vector<NodeId> chain_predecessors_in_order(const SubCanvas& sub, const NodeId& id) {
  (void)sub.chain_node(id);
  return ordered_ancestors(sub.edges, id, [&](const NodeId& n) {
    auto it = sub.chain_nodes.find(n);
    return it == sub.chain_nodes.end() ? std::size_t{0}
                                       : static_cast<std::size_t>(it->second.order_index);
  });
}

Orchestrator::Orchestrator(const TemplateCatalog& catalog, const ExemplarStore* exemplars,
                           Gateway gateway, IdSource& ids, const Clock& clock)
    : catalog_(&catalog), exemplars_(exemplars), gateway_(gateway.scoped(audit_)),
      engine_(catalog), ids_(&ids), clock_(&clock) {}

void Orchestrator::fault(std::string_view point) const {
  if (hook_) hook_(point);
}

void Orchestrator::log_event(Session& session, EventKind kind, std::string target,
                             std::string payload) {
  session.event_log.push_back(
      CoCreationEvent{kind, std::move(target), std::move(payload), clock_->now()});
}

std::vector<Exemplar> Orchestrator::exemplars_for(std::string_view query, std::size_t k) const {
  std::vector<Exemplar> out;
  if (!exemplars_ || exemplars_->size() == 0 || trim(query).empty()) return out;
  for (auto& s : exemplars_->retrieve(query, k)) out.push_back(std::move(s.exemplar));
  return out;
}

PromptContext Orchestrator::base_context(const Session& session) const {
  PromptContext ctx;
  ctx.bg = background_text(session.context);
  ctx.dg = session.context.design_goal;
  return ctx;
}

PromptContext Orchestrator::chain_context(const Session& session, const SubCanvas& sub) const {
  auto ctx = base_context(session);
  ctx.goal = sub.goal;
  if (session.main_canvas.contains(sub.parent)) {
    if (const auto* d = std::get_if<DesignNode>(&session.main_canvas.node(sub.parent))) {
      ctx.parent_title = d->title;
      ctx.parent_content = join(d->blocks, " ");
    }
  }
  if (!ctx.parent_title) ctx.parent_title = "";
  if (!ctx.parent_content) ctx.parent_content = "";
  return ctx;
}

std::string Orchestrator::main_canvas_context(const Session& session, const NodeId& node) const {
  std::vector<std::string> steps;
  for (const auto& id : session.main_canvas.predecessors_in_order(node)) {
    steps.push_back(node_summary(session.main_canvas.node(id)));
  }
  return format_context(steps);
}

std::string Orchestrator::chain_context_str(const SubCanvas& sub, const NodeId& node) const {
  std::vector<std::string> steps;
  for (const auto& id : chain_predecessors_in_order(sub, node)) {
    const auto& n = sub.chain_node(id);
    if (n.run_state != RunState::Completed || !n.rationale) continue;
    steps.push_back(n.title + ": " + n.rationale->title);
  }
  return format_context(steps);
}

// Main canvas

PipelineResult Orchestrator::generate_pipeline(Session& session) {
  if (!session.context.complete()) {
    throw PreconditionFailed("design background and goal are required");
  }
  const auto mark = audit_.size();
  const auto ctx = base_context(session);
  const auto request = gateway_.make_request(catalog_->render(TemplateId::PipelineArchitect, ctx));
  std::vector<std::string> titles;
  try {
    titles = gateway_.complete_validated<std::vector<std::string>>(
        request, [](const std::string& raw) { return parse_string_list(raw, "steps", 3); },
        engine_.max_retries());
  } catch (const ValidationExhausted& e) {
    if (e.cause()) std::rethrow_exception(e.cause());
    throw;
  }

  PipelineResult result;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    DesignNode node;
    node.id = NodeId{ids_->next()};
    node.title = titles[i];
    node.position = {kPipelineX0 + kPipelineDx * static_cast<double>(i), kPipelineY};
    result.created_nodes.push_back(add_node(session, std::move(node), *clock_));
  }
  for (std::size_t i = 0; i + 1 < result.created_nodes.size(); ++i) {
    const auto& e = connect(session, result.created_nodes[i], result.created_nodes[i + 1], *ids_,
                            *clock_);
    result.created_edges.push_back(e.id);
  }
  for (const auto& id : result.created_nodes) fill_step_content(session, id);
  fault("generate_pipeline");

  const auto all = audit_.entries();
  result.audit.assign(all.begin() + static_cast<std::ptrdiff_t>(mark), all.end());
  return result;
}

DesignNode Orchestrator::fill_step_content(Session& session, const NodeId& id) {
  const auto title = design_node(session, id).title;
  auto ctx = base_context(session);
  ctx.context_str = main_canvas_context(session, id);
  ctx.current_node_content = title;
  const auto examples = exemplars_for(title + " " + session.context.design_goal,
                                      kDefaultExemplarCount);
  std::vector<std::string> shots;
  for (const auto& e : examples) shots.push_back(format_exemplar(e));
  ctx.few_shot_example = shots.empty() ? std::string(kNoExample) : join(shots, "\n\n");

  const auto request = gateway_.make_request(catalog_->render(TemplateId::StepContentFill, ctx));
  std::vector<std::string> blocks;
  try {
    blocks = gateway_.complete_validated<std::vector<std::string>>(
        request, [](const std::string& raw) { return parse_string_list(raw, "blocks", 1); },
        engine_.max_retries());
  } catch (const ValidationExhausted& e) {
    if (e.cause()) std::rethrow_exception(e.cause());
    throw;
  }
  auto& node = design_node(session, id);
  node.blocks = std::move(blocks);
  touch(session, *clock_);
  fault("fill_step_content");
  return node;
}

AiNode Orchestrator::brainstorm(Session& session, const NodeId& id) {
  auto* ai = std::get_if<AiNode>(&session.main_canvas.node(id));
  if (!ai) throw PreconditionFailed("node " + id.value() + " is not an AI node");
  auto ctx = base_context(session);
  ctx.context_str = main_canvas_context(session, id);
  ctx.current_node_content = trim(ai->title).empty() ? std::string("AI node") : ai->title;
  const auto prompt = catalog_->render(TemplateId::Brainstorm, ctx);
  const auto response = gateway_.complete(gateway_.make_request(prompt));

  ai = std::get_if<AiNode>(&session.main_canvas.node(id));
  if (!ai->content.empty()) log_event(session, EventKind::Regenerate, id.value(), ai->content);
  ai->content = response.text;
  ai->origin_prompt = prompt.user;
  ai->user_edited = false;
  touch(session, *clock_);
  fault("brainstorm");
  return *ai;
}

// Sub-canvas

void Orchestrator::materialize(SubCanvas& sub, const ChainPlan& plan) {
  sub.chain_nodes.clear();
  sub.edges.clear();
  sub.modes = plan.modes;
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& step = plan.steps[i];
    ChainNode n;
    n.id = NodeId{ids_->next()};
    n.title = step.title;
    n.brief = step.brief;
    n.modes = plan.modes;
    n.order_index = static_cast<int>(i);
    n.parallel_group = step.parallel_group;
    ids.push_back(n.id);
    sub.chain_nodes.emplace(n.id, std::move(n));
  }
  const auto segments = plan_segments(plan.steps);
  for (std::size_t s = 0; s + 1 < segments.size(); ++s) {
    for (auto a : segments[s]) {
      for (auto b : segments[s + 1]) {
        sub.edges.push_back(Edge{EdgeId{ids_->next()}, ids[a], ids[b]});
      }
    }
  }
}

SubCanvas Orchestrator::open_subcanvas(Session& session, const NodeId& node_id,
                                       std::string_view goal) {
  const auto& parent = design_node(session, node_id);
  if (parent.subcanvas) return session.subcanvas(*parent.subcanvas);
  if (trim(goal).empty()) throw PreconditionFailed("sub-canvas goal must not be empty");

  SubCanvas sub;
  sub.id = SubCanvasId{ids_->next()};
  sub.parent = node_id;
  sub.goal = std::string(trim(goal));
  const auto ctx = chain_context(session, sub);
  const auto examples = exemplars_for(sub.goal, kDefaultExemplarCount);
  const auto modes = engine_.classify_modes(sub.goal, ctx, gateway_, examples);
  const auto plan = engine_.generate_chain(sub.goal, ctx, modes, examples, gateway_);
  materialize(sub, plan);

  design_node(session, node_id).subcanvas = sub.id;
  session.subcanvases.emplace(sub.id, sub);
  touch(session, *clock_);
  fault("open_subcanvas");
  return sub;
}

void Orchestrator::execute_chain_node(Session& session, SubCanvas& sub, ChainNode& node) {
  auto ctx = chain_context(session, sub);
  ctx.context_str = chain_context_str(sub, node.id);
  try {
    const auto stage = engine_.classify_stage(node.title, node.brief, ctx, gateway_);
    transition(node, RunState::Classified, &transitions_);
    node.stage = stage;
    const auto examples = exemplars_for(ReasoningEngine::step_text(node.title, node.brief), 1);
    std::optional<Exemplar> exemplar;
    if (!examples.empty()) exemplar = examples.front();
    auto rationale = engine_.generate_rationale(node, stage, ctx, exemplar, gateway_);
    node.rationale = std::move(rationale);
    transition(node, RunState::Completed, &transitions_);
    node.last_error.reset();
  } catch (const GatewayError& e) {
    transition(node, RunState::Failed, &transitions_);
    node.last_error = e.code() + ": " + e.what();
    touch(session, *clock_);
    throw;
  } catch (const OutputError& e) {
    transition(node, RunState::Failed, &transitions_);
    node.last_error = e.code() + ": " + e.what();
    touch(session, *clock_);
    throw;
  }
}

ChainNode Orchestrator::run_chain_node(Session& session, const SubCanvasId& sid,
                                       const NodeId& id) {
  auto& sub = session.subcanvas(sid);
  auto& node = sub.chain_node(id);
  if (node.run_state != RunState::Pending && node.run_state != RunState::Stale) {
    throw PreconditionFailed("chain node is " + std::string(to_string(node.run_state)) +
                             "; use regenerate");
  }
  execute_chain_node(session, sub, node);
  touch(session, *clock_);
  fault("run_chain_node");
  return node;
}

ChainNode Orchestrator::regenerate(Session& session, const SubCanvasId& sid, const NodeId& id) {
  auto& sub = session.subcanvas(sid);
  auto& node = sub.chain_node(id);
  const auto before = chain_ancestors(sub);
  if (node.rationale) {
    log_event(session, EventKind::Regenerate, id.value(), serialize_rationale(*node.rationale));
  }
  if (node.run_state == RunState::Completed) transition(node, RunState::Stale, &transitions_);
  execute_chain_node(session, sub, node);
  mark_stale(sub, before, id, {});
  touch(session, *clock_);
  fault("regenerate");
  return node;
}

SubCanvas Orchestrator::refine_prompt(Session& session, const SubCanvasId& sid,
                                      std::string_view new_goal) {
  if (trim(new_goal).empty()) throw PreconditionFailed("refined goal must not be empty");
  auto& sub = session.subcanvas(sid);

  SubCanvas next = sub;
  next.goal = std::string(trim(new_goal));
  const auto ctx = chain_context(session, next);
  const auto examples = exemplars_for(next.goal, kDefaultExemplarCount);
  const auto modes = engine_.classify_modes(next.goal, ctx, gateway_, examples);
  const auto plan = engine_.generate_chain(next.goal, ctx, modes, examples, gateway_);
  materialize(next, plan);

  nlohmann::json archive{{"goal", sub.goal}, {"nodes", nlohmann::json::array()}};
  for (const auto& cid : sub.chain_order()) {
    const auto& n = sub.chain_node(cid);
    nlohmann::json entry{{"id", n.id.value()},
                         {"title", n.title},
                         {"brief", n.brief},
                         {"run_state", to_string(n.run_state)}};
    if (n.rationale) entry["rationale"] = nlohmann::json::parse(serialize_rationale(*n.rationale));
    archive["nodes"].push_back(std::move(entry));
  }
  log_event(session, EventKind::RefinePrompt, sid.value(), archive.dump());
  sub = std::move(next);
  touch(session, *clock_);
  fault("refine_prompt");
  return sub;
}

void Orchestrator::mark_stale(SubCanvas& sub, const std::map<NodeId, std::set<NodeId>>& before,
                              const std::optional<NodeId>& edited,
                              const std::set<NodeId>& fresh) {
  const auto after = chain_ancestors(sub);
  for (const auto& cid : sub.chain_order()) {
    if (fresh.contains(cid)) continue;
    const auto& anc = after.at(cid);
    auto it = before.find(cid);
    const bool changed = it == before.end() || it->second != anc;
    const bool downstream = edited && anc.contains(*edited);
    if (!changed && !downstream) continue;
    auto& n = sub.chain_node(cid);
    if (n.run_state != RunState::Stale) transition(n, RunState::Stale, &transitions_);
  }
}

ChainNode Orchestrator::cocreate_add(Session& session, const SubCanvasId& sid,
                                     const std::optional<NodeId>& after,
                                     std::string_view user_text) {
  auto& sub = session.subcanvas(sid);
  if (after) (void)sub.chain_node(*after);
  if (trim(user_text).empty()) throw PreconditionFailed("step text must not be empty");

  auto ctx = chain_context(session, sub);
  std::vector<std::string> existing;
  for (const auto& cid : sub.chain_order()) existing.push_back(sub.chain_node(cid).title);
  ctx.context_str = existing.empty() ? std::string(kNoPriorSteps) : join(existing, "; ");
  const auto draft = engine_.draft_step(user_text, ctx, gateway_);

  auto& live = session.subcanvas(sid);
  const auto before = chain_ancestors(live);
  ChainNode node;
  node.id = NodeId{ids_->next()};
  node.title = draft.title;
  node.brief = draft.brief;
  node.modes = live.modes;

  auto order = live.chain_order();
  auto add_edge = [&](const NodeId& s, const NodeId& t) {
    live.edges.push_back(Edge{EdgeId{ids_->next()}, s, t});
  };
  if (after) {
    const auto& anchor = live.chain_node(*after);
    order.insert(std::find(order.begin(), order.end(), *after) + 1, node.id);
    const auto preds = live.predecessors(*after);
    const auto succs = live.successors(*after);
    if (anchor.parallel_group) {
      node.parallel_group = anchor.parallel_group;
      live.chain_nodes.emplace(node.id, node);
      for (const auto& p : preds) add_edge(p, node.id);
      for (const auto& s : succs) add_edge(node.id, s);
    } else {
      live.chain_nodes.emplace(node.id, node);
      std::erase_if(live.edges, [&](const Edge& e) { return e.source == *after; });
      add_edge(*after, node.id);
      for (const auto& s : succs) add_edge(node.id, s);
    }
  } else {
    std::vector<NodeId> sinks;
    for (const auto& cid : order) {
      if (live.successors(cid).empty()) sinks.push_back(cid);
    }
    order.push_back(node.id);
    live.chain_nodes.emplace(node.id, node);
    for (const auto& s : sinks) add_edge(s, node.id);
  }
  renumber(live, order);
  mark_stale(live, before, std::nullopt, {node.id});
  log_event(session, EventKind::Add, node.id.value(), std::string(user_text));
  touch(session, *clock_);
  fault("cocreate_add");
  return live.chain_node(node.id);
}

std::size_t Orchestrator::cocreate_delete(Session& session, const SubCanvasId& sid,
                                          const NodeId& id) {
  auto& sub = session.subcanvas(sid);
  const auto& target = sub.chain_node(id);
  if (sub.chain_nodes.size() == 1) throw LastNode();
  const auto preds = sub.predecessors(id);
  const auto succs = sub.successors(id);
  if (preds.empty() && succs.size() > 1) {
    throw PreconditionFailed("deleting the only source would leave several sources");
  }
  const auto before = chain_ancestors(sub);
  const auto title = target.title;

  auto rank = [&](const NodeId& n) { return sub.chain_node(n).order_index; };
  auto sorted = [&](std::vector<NodeId> v) {
    std::sort(v.begin(), v.end(), [&](const NodeId& a, const NodeId& b) { return rank(a) < rank(b); });
    return v;
  };
  const auto ordered_preds = sorted(preds);
  const auto ordered_succs = sorted(succs);

  auto order = sub.chain_order();
  std::erase(order, id);
  const auto removed = static_cast<std::size_t>(
      std::erase_if(sub.edges, [&](const Edge& e) { return e.source == id || e.target == id; }));
  sub.chain_nodes.erase(id);
  for (const auto& p : ordered_preds) {
    for (const auto& s : ordered_succs) {
      if (!reaches(sub.edges, p, s)) sub.edges.push_back(Edge{EdgeId{ids_->next()}, p, s});
    }
  }
  renumber(sub, order);
  mark_stale(sub, before, std::nullopt, {});
  log_event(session, EventKind::Delete, id.value(), title);
  touch(session, *clock_);
  fault("cocreate_delete");
  return removed;
}

ChainNode Orchestrator::cocreate_revise(Session& session, const SubCanvasId& sid,
                                        const NodeId& id, const ChainNodeEdits& edits) {
  auto& sub = session.subcanvas(sid);
  auto& node = sub.chain_node(id);
  if (node.run_state != RunState::Completed && node.run_state != RunState::Stale) {
    throw PreconditionFailed("only completed or stale chain nodes can be revised");
  }
  if (edits.touches_rationale() && !node.rationale) {
    throw PreconditionFailed("chain node has no rationale to revise");
  }
  if (edits.title && trim(*edits.title).empty()) {
    throw PreconditionFailed("title must not be empty");
  }
  const auto before = chain_ancestors(sub);
  nlohmann::json payload = nlohmann::json::object();
  auto apply = [&](const std::optional<std::string>& v, std::string& field, const char* key) {
    if (!v) return;
    field = *v;
    payload[key] = *v;
  };
  apply(edits.title, node.title, "title");
  apply(edits.brief, node.brief, "brief");
  if (node.rationale) {
    apply(edits.rationale_title, node.rationale->title, "rationale_title");
    apply(edits.rationale1, node.rationale->rationale1, "rationale1");
    apply(edits.rationale2, node.rationale->rationale2, "rationale2");
    apply(edits.rationale3, node.rationale->rationale3, "rationale3");
    apply(edits.rationale4, node.rationale->rationale4, "rationale4");
  }
  node.user_edited = true;
  const ChainNode result = node;
  mark_stale(sub, before, id, {});
  log_event(session, EventKind::Revise, id.value(), payload.dump());
  touch(session, *clock_);
  fault("cocreate_revise");
  return result;
}

NodeId Orchestrator::output_to_canvas(Session& session, const SubCanvasId& sid,
                                      const NodeId& id) {
  const auto& sub = session.subcanvas(sid);
  const auto& node = sub.chain_node(id);
  if (node.run_state != RunState::Completed || !node.rationale) {
    throw NotCompleted(id.value());
  }
  Position at{kPipelineX0, kPipelineY + kNoteDy};
  if (const auto* parent = std::get_if<DesignNode>(&session.main_canvas.node(sub.parent))) {
    at = {parent->position.x, parent->position.y + kNoteDy};
  }
  StickyNote note{NodeId{ids_->next()}, render_rationale_note(*node.rationale), at, id};
  const auto parent_id = sub.parent;
  const auto note_id = add_node(session, std::move(note), *clock_);
  connect(session, parent_id, note_id, *ids_, *clock_);
  log_event(session, EventKind::OutputToCanvas, id.value(), note_id.value());
  touch(session, *clock_);
  fault("output_to_canvas");
  return note_id;
}

NodeId Orchestrator::create_note(Session& session, const std::optional<SubCanvasId>& sid,
                                 std::string_view content, Position position) {
  if (trim(content).empty()) throw PreconditionFailed("note content must not be empty");
  StickyNote note{NodeId{ids_->next()}, std::string(content), position, std::nullopt};
  const auto note_id = note.id;
  if (sid) {
    auto& sub = session.subcanvas(*sid);
    sub.notes.emplace(note_id, std::move(note));
  } else {
    add_node(session, std::move(note), *clock_);
  }
  log_event(session, EventKind::CreateNote, note_id.value(), std::string(content));
  touch(session, *clock_);
  fault("create_note");
  return note_id;
}

}  // namespace dloop
