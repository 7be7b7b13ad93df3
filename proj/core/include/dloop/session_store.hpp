#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dloop/session.hpp"

namespace dloop {

inline constexpr std::string_view kSessionSuffix = ".dloop.json";

struct SessionSummary {
  std::string id;
  Timestamp modified_at{};
  std::string title;
};

struct SessionListing {
  std::vector<SessionSummary> sessions;
  std::vector<std::string> warnings;
};

/// Writes the canonical form to `{directory}/{id}.dloop.json` through a temp
/// file and rename. Returns the final path.
std::filesystem::path save_session(const Session& session, const std::filesystem::path& directory);
/// Loads and validates; throws IoError, SchemaVersionUnsupported or
/// CorruptSession (listing every violation).
Session load_session(const std::filesystem::path& path);
/// Newest first. Unreadable files become warnings.
SessionListing list_sessions(const std::filesystem::path& directory);

bool valid_session_id(std::string_view id);

/// Session files in one directory plus the per-session writer gate.
class SessionStore {
public:
  explicit SessionStore(std::filesystem::path directory);

  /// Exclusive mutation right for one session id. Held until destroyed.
  class WriterLease {
  public:
    WriterLease(std::shared_ptr<std::mutex> mutex);
    [[nodiscard]] bool owns() const noexcept { return lock_.owns_lock(); }

  private:
    std::shared_ptr<std::mutex> mutex_;
    std::unique_lock<std::mutex> lock_;
  };

  /// Blocks while another lease for `id` is alive.
  [[nodiscard]] WriterLease acquire(const std::string& id);

  std::filesystem::path save(const Session& session) const;
  [[nodiscard]] Session load(const std::string& id) const;
  [[nodiscard]] bool exists(const std::string& id) const;
  void remove(const std::string& id) const;
  [[nodiscard]] SessionListing list() const;
  [[nodiscard]] std::filesystem::path path_for(const std::string& id) const;
  [[nodiscard]] const std::filesystem::path& directory() const noexcept { return directory_; }

private:
  std::filesystem::path directory_;
  std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> writers_;
};

}  // namespace dloop
