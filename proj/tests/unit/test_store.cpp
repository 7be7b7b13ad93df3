#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dloop/error.hpp"
#include "dloop/serialization.hpp"
#include "dloop/session_store.hpp"
#include "fixture_support.hpp"
#include "generators.hpp"

namespace fs = std::filesystem;
using namespace dloop;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("dloop-unit-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

Session sample(std::size_t index = 0) {
  dloop::testing::Rng rng(1000 + index);
  return dloop::testing::random_session(rng, index);
}

}  // namespace

TEST(Store, SaveLoadRoundTrip) {
  const auto dir = fresh_dir("roundtrip");
  const auto s = sample();
  const auto path = save_session(s, dir);
  EXPECT_EQ(path.filename().string(), s.id + std::string(kSessionSuffix));
  EXPECT_EQ(load_session(path), s);
  const auto text = dloop::testing::read_file(path);
  EXPECT_EQ(text, canonical_session_json(s));
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(text.substr(0, 15), "{\n  \"event_log\"");
}

TEST(Store, CorruptFileIsReported) {
  const auto dir = fresh_dir("corrupt");
  write(dir / "broken.dloop.json", "{ not json");
  EXPECT_THROW((void)load_session(dir / "broken.dloop.json"), CorruptSession);

  auto j = session_file_json(sample());
  j["session"]["main_canvas"]["edges"].push_back(
      {{"id", "dangling"}, {"source", "ghost"}, {"target", "ghost2"}});
  write(dir / "dangling.dloop.json", j.dump());
  EXPECT_THROW((void)load_session(dir / "dangling.dloop.json"), CorruptSession);
}

TEST(Store, UnsupportedSchemaVersion) {
  const auto dir = fresh_dir("version");
  auto j = session_file_json(sample());
  j["schema_version"] = 99;
  write(dir / "future.dloop.json", j.dump());
  try {
    (void)load_session(dir / "future.dloop.json");
    FAIL() << "expected SchemaVersionUnsupported";
  } catch (const SchemaVersionUnsupported& e) {
    EXPECT_EQ(e.code(), "schema_version_unsupported");
  }
}

TEST(Store, IoErrorWhenDirectoryIsAFile) {
  const auto dir = fresh_dir("io");
  write(dir / "plain", "x");
  EXPECT_THROW(save_session(sample(), dir / "plain"), IoError);
  EXPECT_THROW((void)load_session(dir / "missing.dloop.json"), IoError);
}

TEST(Store, ListingIsNewestFirstWithWarnings) {
  const auto dir = fresh_dir("list");
  auto a = sample(1);
  auto b = sample(2);
  a.modified_at = parse_timestamp("2026-01-01T00:00:00.000Z");
  b.modified_at = parse_timestamp("2026-06-01T00:00:00.000Z");
  a.created_at = b.created_at = parse_timestamp("2025-01-01T00:00:00.000Z");
  save_session(a, dir);
  save_session(b, dir);
  write(dir / "junk.dloop.json", "[]");
  write(dir / "ignored.txt", "not a session");
  const auto listing = list_sessions(dir);
  ASSERT_EQ(listing.sessions.size(), 2u);
  EXPECT_EQ(listing.sessions[0].id, b.id);
  EXPECT_EQ(listing.sessions[1].id, a.id);
  EXPECT_EQ(listing.warnings.size(), 1u) << (listing.warnings.empty() ? "" : listing.warnings[0]);
}

TEST(Store, SessionIdsAreSafeFileNames) {
  EXPECT_TRUE(valid_session_id("session_1-2"));
  EXPECT_TRUE(valid_session_id("66baca47-a7d3-4c0c-9fc1-3c40b7f7fe29"));
  EXPECT_FALSE(valid_session_id("../etc"));
  EXPECT_FALSE(valid_session_id(""));
  EXPECT_FALSE(valid_session_id("a/b"));
}

TEST(Store, StoreRemoveAndExists) {
  SessionStore store(fresh_dir("store"));
  const auto s = sample(3);
  store.save(s);
  EXPECT_TRUE(store.exists(s.id));
  EXPECT_EQ(store.load(s.id), s);
  store.remove(s.id);
  EXPECT_FALSE(store.exists(s.id));
  EXPECT_ANY_THROW((void)store.load(s.id));
}

TEST(Store, LeaseIsExclusivePerSession) {
  SessionStore store(fresh_dir("lease"));
  auto first = store.acquire("one");
  EXPECT_TRUE(first.owns());
  auto other = store.acquire("two");
  EXPECT_TRUE(other.owns());
}
