#include "dloop/api.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dloop/assessment.hpp"
#include "dloop/error.hpp"
#include "dloop/serialization.hpp"

namespace dloop {

namespace {

using nlohmann::json;

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  const auto end = path.find('?');
  for (char c : path.substr(0, end)) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

ApiResponse json_response(int status, const json& body) { return {status, body.dump()}; }

ApiResponse error_response(const std::string& code, const std::string& message,
                           const json& details = nullptr) {
  return json_response(status_for(code), error_envelope(code, message, details));
}

std::string required_string(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key) || !body.at(key).is_string()) {
    throw BadRequest(std::string("body needs a string field \"") + key + "\"");
  }
  return body.at(key).get<std::string>();
}

std::optional<std::string> optional_string(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key) || body.at(key).is_null()) return std::nullopt;
  if (!body.at(key).is_string()) throw BadRequest(std::string("\"") + key + "\" must be a string");
  return body.at(key).get<std::string>();
}

Position position_from(const json& body) {
  if (!body.is_object() || !body.contains("position")) return {};
  const auto& p = body.at("position");
  if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p.at("x").is_number() ||
      !p.at("y").is_number()) {
    throw BadRequest("position must be {\"x\": number, \"y\": number}");
  }
  return {p.at("x").get<double>(), p.at("y").get<double>()};
}

std::vector<std::string> string_list(const json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return {};
  const auto& v = body.at(key);
  if (!v.is_array()) throw BadRequest(std::string("\"") + key + "\" must be a list of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) throw BadRequest(std::string("\"") + key + "\" must hold strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

json summary_json(const CallSummary& s) {
  return json{{"request_hash", s.request_hash}, {"response_hint", s.response_hint},
              {"provider_id", s.provider_id},   {"attempt", s.attempt},
              {"outcome", s.outcome},           {"prompt_tokens", s.prompt_tokens},
              {"completion_tokens", s.completion_tokens}};
}

json violations_json(const std::vector<Violation>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back({{"type", v.type}, {"id", v.id}, {"invariant", v.invariant}});
  return out;
}

double number_field(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_number()) {
    throw BadRequest(std::string("body needs a numeric field \"") + key + "\"");
  }
  return body.at(key).get<double>();
}

}  // namespace

json error_envelope(const std::string& code, const std::string& message, const json& details) {
  return json{{"code", code}, {"message", message}, {"details", details}};
}

int status_for(const std::string& code) {
  static const std::map<std::string, int> table{
      {"bad_request", 400},
      {"unknown_id", 404},
      {"not_found", 404},
      {"method_not_allowed", 405},
      {"duplicate_id", 409},
      {"duplicate_edge", 409},
      {"self_loop", 409},
      {"cycle_detected", 409},
      {"precondition_failed", 409},
      {"not_completed", 409},
      {"last_node", 409},
      {"invalid_transition", 409},
      {"empty_goal", 422},
      {"range_error", 422},
      {"schema_error", 502},
      {"unparseable_label", 502},
      {"invalid_chain", 502},
      {"step_list_error", 502},
      {"validation_exhausted", 502},
      {"transport_error", 502},
      {"missing_fixture", 502},
      {"provider_error", 502},
      {"rate_limited", 503},
      {"timeout", 504},
  };
  auto it = table.find(code);
  return it == table.end() ? 500 : it->second;
}

ApiService::ApiService(ApiDeps deps) : deps_(std::move(deps)) {
  if (!deps_.catalog || !deps_.gateway || !deps_.store || !deps_.ids || !deps_.clock) {
    throw std::invalid_argument("api service is missing a dependency");
  }
  register_routes();
}

std::vector<std::string> ApiService::routes() const {
  std::vector<std::string> out;
  for (const auto& r : routes_) {
    std::string path;
    for (const auto& s : r.segments) path += "/" + s;
    out.push_back(r.method + " " + path);
  }
  return out;
}

void ApiService::add(std::string method, const std::string& pattern, bool mutation,
                     Handler handler) {
  routes_.push_back(Route{std::move(method), split_path(pattern), mutation, std::move(handler)});
}

void ApiService::fault(std::string_view point) const {
  if (hook_) hook_(point);
}

ApiResponse ApiService::handle(const ApiRequest& request) {
  const auto parts = split_path(request.path);
  bool path_matched = false;
  for (const auto& route : routes_) {
    if (route.segments.size() != parts.size()) continue;
    Params params;
    bool ok = true;
    for (std::size_t i = 0; i < parts.size() && ok; ++i) {
      const auto& seg = route.segments[i];
      if (seg.size() > 2 && seg.front() == '{' && seg.back() == '}') {
        params[seg.substr(1, seg.size() - 2)] = parts[i];
      } else {
        ok = seg == parts[i];
      }
    }
    if (!ok) continue;
    path_matched = true;
    if (route.method != request.method) continue;

    try {
      json body = json::object();
      if (!request.body.empty()) {
        try {
          body = json::parse(request.body);
        } catch (const json::parse_error& e) {
          throw BadRequest(std::string("request body is not JSON: ") + e.what());
        }
      }
      return route.handler(params, body);
    } catch (const Error& e) {
      return error_response(e.code(), e.what());
    } catch (const std::exception& e) {
      spdlog::error("unhandled error on {} {}: {}", request.method, request.path, e.what());
      return error_response("internal_error", e.what());
    }
  }
  if (path_matched) {
    return error_response("method_not_allowed", request.method + " not allowed on " + request.path);
  }
  return error_response("not_found", "no route for " + request.path);
}

ApiResponse ApiService::mutate(const std::string& id,
                               const std::function<ApiResponse(Session&, Orchestrator&)>& fn) {
  auto lease = deps_.store->acquire(id);
  const Session stored = deps_.store->load(id);
  Session work = stored;
  Orchestrator orch(*deps_.catalog, deps_.exemplars, *deps_.gateway, *deps_.ids, *deps_.clock);
  orch.set_fault_hook(hook_);
  auto response = fn(work, orch);
  const auto violations = validate(work);
  if (!violations.empty()) {
    return error_response("invariant_violation", "operation would leave the session invalid",
                          violations_json(violations));
  }
  fault("before_save");
  deps_.store->save(work);
  return response;
}

ApiResponse ApiService::run_chain(const Params& p, bool regenerate) {
  const SubCanvasId sid{p.at("sid")};
  const NodeId cid{p.at("cid")};
  std::optional<ApiResponse> failure;
  auto response = mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
    try {
      const auto node = regenerate ? o.regenerate(s, sid, cid) : o.run_chain_node(s, sid, cid);
      return json_response(200, to_json(node));
    } catch (const GatewayError& e) {
      failure = error_response(e.code(), e.what(),
                               json{{"node", to_json(s.subcanvas(sid).chain_node(cid))}});
    } catch (const OutputError& e) {
      failure = error_response(e.code(), e.what(),
                               json{{"node", to_json(s.subcanvas(sid).chain_node(cid))}});
    }
    return ApiResponse{};
  });
  return failure && response.status < 300 ? *failure : response;
}

void ApiService::register_routes() {
  add("GET", "/health", false, [this](const Params&, const json&) {
    return json_response(200, json{{"status", "ok"}, {"provider", deps_.provider_label}});
  });

  add("POST", "/assessment/quality", false, [](const Params&, const json& body) {
    QualityMode mode = QualityMode::Mean;
    if (auto m = optional_string(body, "mode")) {
      if (*m == "sum") {
        mode = QualityMode::Sum;
      } else if (*m != "mean") {
        throw BadRequest("mode must be \"mean\" or \"sum\"");
      }
    }
    const double novelty = number_field(body, "novelty");
    json out;
    if (body.contains("usefulness_converted")) {
      const double u = number_field(body, "usefulness_converted");
      out = {{"usefulness_converted", u}, {"quality", compute_quality(novelty, u, mode)}};
    } else {
      const auto s = score({novelty, number_field(body, "importance"),
                            number_field(body, "popularity"), number_field(body, "frequency")},
                           mode);
      out = {{"usefulness_raw", s.usefulness_raw},
             {"usefulness_converted", s.usefulness_converted},
             {"quality", s.quality}};
    }
    out["mode"] = mode == QualityMode::Sum ? "sum" : "mean";
    return json_response(200, out);
  });

  add("POST", "/sessions", true, [this](const Params&, const json& body) {
    DesignContext ctx;
    ctx.background = optional_string(body, "background").value_or("");
    ctx.design_goal = optional_string(body, "design_goal").value_or("");
    ctx.style_preferences = string_list(body, "style_preferences");
    auto session = create_session(std::move(ctx), *deps_.ids, *deps_.clock);
    auto lease = deps_.store->acquire(session.id);
    fault("before_save");
    deps_.store->save(session);
    return json_response(201, session_file_json(session));
  });

  add("GET", "/sessions", false, [this](const Params&, const json&) {
    const auto listing = deps_.store->list();
    json sessions = json::array();
    for (const auto& s : listing.sessions) {
      sessions.push_back(
          {{"id", s.id}, {"modified_at", format_timestamp(s.modified_at)}, {"title", s.title}});
    }
    return json_response(200, json{{"sessions", sessions}, {"warnings", listing.warnings}});
  });

  add("GET", "/sessions/{id}", false, [this](const Params& p, const json&) {
    return json_response(200, session_file_json(deps_.store->load(p.at("id"))));
  });

  add("DELETE", "/sessions/{id}", true, [this](const Params& p, const json&) {
    auto lease = deps_.store->acquire(p.at("id"));
    if (!deps_.store->exists(p.at("id"))) throw UnknownId(p.at("id"));
    fault("before_save");
    deps_.store->remove(p.at("id"));
    return ApiResponse{204, ""};
  });

  add("POST", "/sessions/{id}/pipeline", true, [this](const Params& p, const json&) {
    return mutate(p.at("id"), [](Session& s, Orchestrator& o) {
      const auto r = o.generate_pipeline(s);
      json nodes = json::array();
      for (const auto& id : r.created_nodes) nodes.push_back(to_json(s.main_canvas.node(id)));
      json edges = json::array();
      for (const auto& id : r.created_edges) edges.push_back(id.value());
      json audit = json::array();
      for (const auto& a : r.audit) audit.push_back(summary_json(a));
      return json_response(201, json{{"nodes", nodes}, {"edges", edges}, {"audit", audit}});
    });
  });

  add("POST", "/sessions/{id}/nodes", true, [this](const Params& p, const json& body) {
    return mutate(p.at("id"), [&](Session& s, Orchestrator&) {
      const auto kind = optional_string(body, "kind").value_or("design");
      const NodeId id{deps_.ids->next()};
      const auto position = position_from(body);
      CanvasNode node;
      if (kind == "design") {
        DesignNode d{id, required_string(body, "title"), string_list(body, "blocks"), position,
                     optional_string(body, "color"), std::nullopt};
        if (d.title.empty()) throw BadRequest("title must not be empty");
        node = std::move(d);
      } else if (kind == "ai") {
        AiNode a{id, optional_string(body, "title").value_or(""), "", std::nullopt, position,
                 false};
        node = std::move(a);
      } else if (kind == "note") {
        const auto content = required_string(body, "content");
        if (content.empty()) throw BadRequest("note content must not be empty");
        node = StickyNote{id, content, position, std::nullopt};
      } else {
        throw BadRequest("kind must be design, ai or note");
      }
      add_node(s, node, *deps_.clock);
      return json_response(201, to_json(s.main_canvas.node(id)));
    });
  });

  add("PATCH", "/sessions/{id}/nodes/{nid}", true, [this](const Params& p, const json& body) {
    return mutate(p.at("id"), [&](Session& s, Orchestrator&) {
      const NodeId nid{p.at("nid")};
      auto& node = s.main_canvas.node(nid);
      const bool has_position = body.contains("position");
      const auto position = position_from(body);
      if (auto* d = std::get_if<DesignNode>(&node)) {
        if (auto t = optional_string(body, "title")) {
          if (t->empty()) throw BadRequest("title must not be empty");
          d->title = *t;
        }
        if (body.contains("blocks")) d->blocks = string_list(body, "blocks");
        if (body.contains("color")) d->color = optional_string(body, "color");
        if (has_position) d->position = position;
      } else if (auto* a = std::get_if<AiNode>(&node)) {
        if (auto t = optional_string(body, "title")) a->title = *t;
        if (auto c = optional_string(body, "content")) {
          a->content = *c;
          a->user_edited = true;
        }
        if (has_position) a->position = position;
      } else if (auto* n = std::get_if<StickyNote>(&node)) {
        if (auto c = optional_string(body, "content")) {
          if (c->empty()) throw BadRequest("note content must not be empty");
          n->content = *c;
        }
        if (has_position) n->position = position;
      }
      touch(s, *deps_.clock);
      return json_response(200, to_json(s.main_canvas.node(nid)));
    });
  });

  add("DELETE", "/sessions/{id}/nodes/{nid}", true, [this](const Params& p, const json&) {
    return mutate(p.at("id"), [&](Session& s, Orchestrator&) {
      const auto removed = remove_node(s, NodeId{p.at("nid")}, *deps_.clock);
      return json_response(200, json{{"removed_edges", removed}});
    });
  });

  add("POST", "/sessions/{id}/edges", true, [this](const Params& p, const json& body) {
    return mutate(p.at("id"), [&](Session& s, Orchestrator&) {
      const auto& e = connect(s, NodeId{required_string(body, "source")},
                              NodeId{required_string(body, "target")}, *deps_.ids, *deps_.clock);
      return json_response(201, to_json(e));
    });
  });

  add("DELETE", "/sessions/{id}/edges/{eid}", true, [this](const Params& p, const json&) {
    return mutate(p.at("id"), [&](Session& s, Orchestrator&) {
      disconnect(s, EdgeId{p.at("eid")}, *deps_.clock);
      return ApiResponse{204, ""};
    });
  });

  add("POST", "/sessions/{id}/nodes/{nid}/brainstorm", true,
      [this](const Params& p, const json&) {
        return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
          return json_response(200, to_json(CanvasNode{o.brainstorm(s, NodeId{p.at("nid")})}));
        });
      });

  add("POST", "/sessions/{id}/nodes/{nid}/subcanvas", true,
      [this](const Params& p, const json& body) {
        return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
          const NodeId nid{p.at("nid")};
          const auto* d = std::get_if<DesignNode>(&s.main_canvas.node(nid));
          const bool existed = d && d->subcanvas;
          const auto goal = existed ? optional_string(body, "goal").value_or("")
                                    : required_string(body, "goal");
          const auto sub = o.open_subcanvas(s, nid, goal);
          return json_response(existed ? 200 : 201, to_json(sub));
        });
      });

  add("POST", "/sessions/{id}/subcanvas/{sid}/refine", true,
      [this](const Params& p, const json& body) {
        return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
          const auto sub =
              o.refine_prompt(s, SubCanvasId{p.at("sid")}, required_string(body, "goal"));
          return json_response(200, to_json(sub));
        });
      });

  add("POST", "/sessions/{id}/subcanvas/{sid}/chain/{cid}/run", true,
      [this](const Params& p, const json&) { return run_chain(p, false); });

  add("POST", "/sessions/{id}/subcanvas/{sid}/chain/{cid}/regenerate", true,
      [this](const Params& p, const json&) { return run_chain(p, true); });

  add("POST", "/sessions/{id}/subcanvas/{sid}/chain", true,
      [this](const Params& p, const json& body) {
        return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
          std::optional<NodeId> after;
          if (auto a = optional_string(body, "after")) after = NodeId{*a};
          const auto node =
              o.cocreate_add(s, SubCanvasId{p.at("sid")}, after, required_string(body, "text"));
          return json_response(201, to_json(node));
        });
      });

  add("PATCH", "/sessions/{id}/subcanvas/{sid}/chain/{cid}", true,
      [this](const Params& p, const json& body) {
        return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
          ChainNodeEdits edits;
          edits.title = optional_string(body, "title");
          edits.brief = optional_string(body, "brief");
          if (body.contains("rationale") && body.at("rationale").is_object()) {
            const auto& r = body.at("rationale");
            edits.rationale_title = optional_string(r, "title");
            edits.rationale1 = optional_string(r, "rationale1");
            edits.rationale2 = optional_string(r, "rationale2");
            edits.rationale3 = optional_string(r, "rationale3");
            edits.rationale4 = optional_string(r, "rationale4");
          }
          const auto node =
              o.cocreate_revise(s, SubCanvasId{p.at("sid")}, NodeId{p.at("cid")}, edits);
          return json_response(200, to_json(node));
        });
      });

  add("DELETE", "/sessions/{id}/subcanvas/{sid}/chain/{cid}", true,
      [this](const Params& p, const json&) {
        return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
          const auto removed =
              o.cocreate_delete(s, SubCanvasId{p.at("sid")}, NodeId{p.at("cid")});
          return json_response(200, json{{"removed_edges", removed}});
        });
      });

  add("POST", "/sessions/{id}/subcanvas/{sid}/chain/{cid}/export", true,
      [this](const Params& p, const json&) {
        return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
          const auto note = o.output_to_canvas(s, SubCanvasId{p.at("sid")}, NodeId{p.at("cid")});
          return json_response(201, to_json(s.main_canvas.node(note)));
        });
      });

  add("POST", "/sessions/{id}/notes", true, [this](const Params& p, const json& body) {
    return mutate(p.at("id"), [&](Session& s, Orchestrator& o) {
      std::optional<SubCanvasId> sub;
      if (auto v = optional_string(body, "subcanvas")) sub = SubCanvasId{*v};
      const auto id = o.create_note(s, sub, required_string(body, "content"), position_from(body));
      const json note = sub ? to_json(CanvasNode{s.subcanvas(*sub).notes.at(id)})
                            : to_json(s.main_canvas.node(id));
      return json_response(201, note);
    });
  });
}

ServeConfig resolve_config(const std::map<std::string, std::string>& flags,
                           const std::function<std::optional<std::string>(const std::string&)>& env,
                           const std::optional<std::string>& config_file) {
  ServeConfig c;
  auto apply = [&](const std::string& key, const std::string& value) {
    if (key == "host") c.host = value;
    else if (key == "port") {
      try {
        c.port = std::stoi(value);
      } catch (const std::exception&) {
        throw BadRequest("port must be an integer: " + value);
      }
    } else if (key == "provider") c.provider = value;
    else if (key == "model") c.model = value;
    else if (key == "transcript") c.transcript = value;
    else if (key == "exemplar_dir") c.exemplar_dir = value;
    else if (key == "session_dir") c.session_dir = value;
    else if (key == "api_key_env") c.api_key_env = value;
    else if (key == "base_url") c.base_url = value;
    else if (key == "record") c.record = value == "1" || value == "true";
    else throw BadRequest("unknown config key " + key);
  };

  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw IoError("cannot read config file " + *config_file);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw IoError("config file " + *config_file + " is not JSON: " + e.what());
    }
    for (const auto& [k, v] : j.items()) {
      if (v.is_string()) apply(k, v.get<std::string>());
      else if (v.is_boolean()) apply(k, v.get<bool>() ? "true" : "false");
      else apply(k, v.dump());
    }
  }
  for (const auto* key : {"host", "port", "provider", "model", "transcript", "exemplar_dir",
                          "session_dir", "api_key_env", "base_url", "record"}) {
    std::string name = "DLOOP_";
    for (const char* ch = key; *ch; ++ch) name.push_back(static_cast<char>(std::toupper(*ch)));
    if (auto v = env(name)) apply(key, *v);
  }
  for (const auto& [k, v] : flags) apply(k, v);

  if (c.provider != "live" && c.provider != "replay" && c.provider != "mock") {
    throw BadRequest("provider must be live, replay or mock");
  }
  if (c.port < 0 || c.port > 65535) throw BadRequest("port out of range");
  return c;
}

}  // namespace dloop
