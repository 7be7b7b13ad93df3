#include <gtest/gtest.h>

#include "dloop/error.hpp"
#include "dloop/serialization.hpp"
#include "dloop/session.hpp"
#include "generators.hpp"

using namespace dloop;

namespace {

const FixedClock kClock(parse_timestamp("2026-02-01T10:00:00.000Z"));

bool has_invariant(const std::vector<Violation>& vs, const std::string& needle) {
  for (const auto& v : vs) {
    if (to_string(v).find(needle) != std::string::npos) return true;
  }
  return false;
}

// Session with one design node owning a three-node chain a -> b -> c.
Session chain_session() {
  RandomIdSource ids(7);
  auto s = create_session({"bg", "dg", {}}, ids, kClock);
  const NodeId design{"design-1"};
  SubCanvas sub;
  sub.id = SubCanvasId{"sub-1"};
  sub.parent = design;
  sub.goal = "goal";
  int order = 0;
  for (const char* id : {"a", "b", "c"}) {
    ChainNode n;
    n.id = NodeId{id};
    n.title = id;
    n.order_index = order++;
    sub.chain_nodes[n.id] = n;
  }
  sub.edges = {{EdgeId{"e1"}, NodeId{"a"}, NodeId{"b"}}, {EdgeId{"e2"}, NodeId{"b"}, NodeId{"c"}}};
  add_node(s, DesignNode{design, "Step", {}, {}, std::nullopt, sub.id}, kClock);
  s.subcanvases[sub.id] = sub;
  return s;
}

}  // namespace

TEST(Session, FreshSessionIsValid) {
  RandomIdSource ids(1);
  const auto s = create_session({"bg", "dg", {"calm"}}, ids, kClock);
  EXPECT_TRUE(is_uuid_v4(s.id));
  EXPECT_EQ(s.created_at, kClock.now());
  EXPECT_TRUE(validate(s).empty());
  EXPECT_TRUE(validate(chain_session()).empty());
}

TEST(Session, RationaleRequiresCompletedOrStale) {
  auto s = chain_session();
  auto& n = s.subcanvases.begin()->second.chain_nodes.at(NodeId{"a"});
  n.rationale = Rationale{"t", "1", "2", "3", "4"};
  EXPECT_FALSE(validate(s).empty());
  n.stage = DesignStage::Define;
  n.run_state = RunState::Completed;
  EXPECT_TRUE(validate(s).empty());
  n.run_state = RunState::Stale;
  EXPECT_TRUE(validate(s).empty());
}

TEST(Session, StageOnPendingNodeIsRejected) {
  auto s = chain_session();
  s.subcanvases.begin()->second.chain_nodes.at(NodeId{"b"}).stage = DesignStage::Deliver;
  EXPECT_FALSE(validate(s).empty());
}

TEST(Session, ChainMustHaveOneSourceAndNoCycle) {
  auto s = chain_session();
  auto& sub = s.subcanvases.begin()->second;
  sub.edges.pop_back();
  EXPECT_FALSE(validate(s).empty()) << "c is disconnected";
  sub.edges.push_back({EdgeId{"e2"}, NodeId{"b"}, NodeId{"c"}});
  sub.edges.push_back({EdgeId{"e3"}, NodeId{"c"}, NodeId{"b"}});
  EXPECT_FALSE(validate(s).empty()) << "b and c form a cycle";
}

TEST(Session, DuplicateModesAreRejected) {
  auto s = chain_session();
  s.subcanvases.begin()->second.modes = {ReasoningMode::Inductive, ReasoningMode::Inductive};
  EXPECT_TRUE(has_invariant(validate(s), "mode"));
}

TEST(Session, SubCanvasMustPointBackToItsParent) {
  auto s = chain_session();
  s.subcanvases.begin()->second.parent = NodeId{"nobody"};
  EXPECT_FALSE(validate(s).empty());
}

TEST(Session, RemovingTheDesignNodeDropsItsSubCanvas) {
  auto s = chain_session();
  remove_node(s, NodeId{"design-1"}, kClock);
  EXPECT_TRUE(s.subcanvases.empty());
  EXPECT_TRUE(validate(s).empty());
}

TEST(SessionProperty, RandomSessionsAreValidAndRoundTrip) {
  dloop::testing::Rng rng(42);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto s = dloop::testing::random_session(rng, i);
    ASSERT_TRUE(validate(s).empty()) << i;
    const auto text = canonical_session_json(s);
    const auto back = session_from_file_json(nlohmann::json::parse(text));
    ASSERT_EQ(back, s) << i;
    ASSERT_EQ(canonical_session_json(back), text) << i;
  }
}
