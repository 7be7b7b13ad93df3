#include "dloop/session_store.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dloop/error.hpp"
#include "dloop/serialization.hpp"

namespace dloop {

namespace {

std::atomic<unsigned> g_temp_counter{0};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

}  // namespace

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

std::filesystem::path save_session(const Session& session, const std::filesystem::path& directory) {
  if (!valid_session_id(session.id)) throw IoError("session id unusable as a file name: " + session.id);
  const auto text = canonical_session_json(session);
  const auto target = directory / (session.id + std::string(kSessionSuffix));
  const auto temp = directory / fmt::format(".{}.{}.tmp", session.id, g_temp_counter.fetch_add(1));
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + temp.string());
    out << text;
    out.flush();
    if (!out) {
      std::error_code ignore;
      std::filesystem::remove(temp, ignore);
      throw IoError("cannot write " + temp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, target, ec);
  if (ec) {
    std::error_code ignore;
    std::filesystem::remove(temp, ignore);
    throw IoError("cannot replace " + target.string() + ": " + ec.message());
  }
  return target;
}

Session load_session(const std::filesystem::path& path) {
  const auto text = read_all(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptSession(path.string() + ": not valid JSON: " + e.what());
  }
  auto session = session_from_file_json(j);
  const auto violations = validate(session);
  if (!violations.empty()) {
    std::string message = path.string() + ": session fails validation";
    for (const auto& v : violations) message += "\n  " + to_string(v);
    throw CorruptSession(message);
  }
  return session;
}

SessionListing list_sessions(const std::filesystem::path& directory) {
  SessionListing out;
  std::error_code ec;
  if (!std::filesystem::is_directory(directory, ec)) return out;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.ends_with(kSessionSuffix) && !name.starts_with(".")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    try {
      const auto s = load_session(path);
      out.sessions.push_back({s.id, s.modified_at, s.context.design_goal});
    } catch (const Error& e) {
      out.warnings.push_back(path.filename().string() + ": " + e.what());
    }
  }
  std::stable_sort(out.sessions.begin(), out.sessions.end(),
                   [](const SessionSummary& a, const SessionSummary& b) {
                     if (a.modified_at != b.modified_at) return a.modified_at > b.modified_at;
                     return a.id < b.id;
                   });
  return out;
}

SessionStore::WriterLease::WriterLease(std::shared_ptr<std::mutex> mutex)
    : mutex_(std::move(mutex)), lock_(*mutex_) {}

SessionStore::SessionStore(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (!std::filesystem::is_directory(directory_)) {
    throw IoError("session directory unavailable: " + directory_.string());
  }
}

SessionStore::WriterLease SessionStore::acquire(const std::string& id) {
  std::shared_ptr<std::mutex> m;
  {
    std::lock_guard lock(registry_mutex_);
    auto& slot = writers_[id];
    if (!slot) slot = std::make_shared<std::mutex>();
    m = slot;
  }
  return WriterLease(std::move(m));
}

std::filesystem::path SessionStore::path_for(const std::string& id) const {
  if (!valid_session_id(id)) throw UnknownId(id);
  return directory_ / (id + std::string(kSessionSuffix));
}

std::filesystem::path SessionStore::save(const Session& session) const {
  return save_session(session, directory_);
}

Session SessionStore::load(const std::string& id) const {
  const auto path = path_for(id);
  if (!std::filesystem::exists(path)) throw UnknownId(id);
  return load_session(path);
}

bool SessionStore::exists(const std::string& id) const {
  return valid_session_id(id) && std::filesystem::exists(path_for(id));
}

void SessionStore::remove(const std::string& id) const {
  const auto path = path_for(id);
  std::error_code ec;
  if (!std::filesystem::remove(path, ec)) {
    if (ec) throw IoError("cannot delete " + path.string() + ": " + ec.message());
    throw UnknownId(id);
  }
}

SessionListing SessionStore::list() const { return list_sessions(directory_); }

}  // namespace dloop
