#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "dloop/session.hpp"

namespace dloop {

// JSON mapping of the session model. Keyed collections are written as
// arrays in key order so equal sessions serialize identically.

nlohmann::json to_json(const DesignContext& context);
nlohmann::json to_json(const CanvasNode& node);
nlohmann::json to_json(const Edge& edge);
nlohmann::json to_json(const ChainNode& node);
nlohmann::json to_json(const ModeAssignment& modes);
nlohmann::json to_json(const Rationale& rationale);
nlohmann::json to_json(const SubCanvas& sub);
nlohmann::json to_json(const CoCreationEvent& event);

DesignContext design_context_from_json(const nlohmann::json& j);
CanvasNode canvas_node_from_json(const nlohmann::json& j);
Edge edge_from_json(const nlohmann::json& j);
ChainNode chain_node_from_json(const nlohmann::json& j);
ModeAssignment modes_from_json(const nlohmann::json& j);
Rationale rationale_from_json(const nlohmann::json& j);
SubCanvas subcanvas_from_json(const nlohmann::json& j);
CoCreationEvent event_from_json(const nlohmann::json& j);

/// `{"schema_version", "session", "event_log"}`.
nlohmann::json session_file_json(const Session& session);
/// Parses a session file. Throws SchemaVersionUnsupported or CorruptSession;
/// does not run validate().
Session session_from_file_json(const nlohmann::json& j);

/// Sorted keys, two-space indent, trailing newline.
std::string canonical_session_json(const Session& session);

}  // namespace dloop
