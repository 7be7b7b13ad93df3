// Regenerates the replay transcripts and the pinned flow session from the
// authored provider. Run from a build tree; writes into tests/fixtures.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dloop/session_store.hpp"
#include "fixture_support.hpp"

namespace fs = std::filesystem;
using namespace dloop;
using namespace dloop::testing;

int main() {
  try {
    const auto clock =
        std::make_shared<FixedClock>(parse_timestamp("2026-01-01T00:00:00.000Z"));
    auto authored = std::make_shared<AuthoredProvider>();
    fs::create_directories(fixture_dir() / "transcripts");
    fs::create_directories(fixture_dir() / "sessions");
    fs::remove(chain_suite_transcript());
    fs::remove(flow_transcript());

    exemplars().write_cache(exemplar_dir());

    {
      const auto gateway = record_mode(chain_suite_transcript(), authored, clock);
      const auto goals = chain_goals();
      for (std::size_t i = 0; i < goals.size(); ++i) (void)run_chain_goal(goals[i], gateway, i);
      std::cout << "recorded chain suite for " << goals.size() << " goals\n";
    }

    const auto scratch = fs::temp_directory_path() / "dloop-author";
    fs::remove_all(scratch);
    {
      const auto gateway = record_mode(flow_transcript(), authored, clock);
      (void)classify_interview_goal(gateway);
      (void)classify_competitor_step(gateway);
      const auto run = run_scripted_flow(gateway, scratch);
      std::ofstream out(pinned_flow_session(), std::ios::binary);
      out << run.canonical;
      std::cout << "pinned flow session " << run.session_id << " after " << run.statuses.size()
                << " requests\n";
    }

    fs::remove_all(scratch);
    const auto replayed = run_scripted_flow(replay_mode(flow_transcript()), scratch);
    fs::remove_all(scratch);
    if (replayed.canonical != read_file(pinned_flow_session())) {
      std::cerr << "replay of the flow does not reproduce the pinned session\n";
      return 1;
    }
    std::cout << "replay check ok\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "authoring failed: " << e.what() << "\n";
    return 1;
  }
}
