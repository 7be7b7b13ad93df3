#include "dloop/reasoning_types.hpp"

namespace dloop {

std::string_view to_string(ReasoningMode mode) {
  switch (mode) {
    case ReasoningMode::Inductive: return "Inductive";
    case ReasoningMode::Deductive: return "Deductive";
    case ReasoningMode::Abductive: return "Abductive";
    case ReasoningMode::Analogical: return "Analogical";
  }
  return "Abductive";
}

std::vector<ReasoningMode> ModeAssignment::modes() const {
  std::vector<ReasoningMode> out{primary};
  if (secondary) out.push_back(*secondary);
  return out;
}

std::string_view to_label(DesignStage stage) {
  switch (stage) {
    case DesignStage::DiscoverDivergent: return "Discover_Divergent";
    case DesignStage::DiscoverConvergent: return "Discover_Convergent";
    case DesignStage::Define: return "Define";
    case DesignStage::DevelopDivergent: return "Develop_Divergent";
    case DesignStage::DevelopConvergent: return "Develop_Convergent";
    case DesignStage::Deliver: return "Deliver";
  }
  return "Define";
}

std::string_view stage_goal(DesignStage stage) {
  switch (stage) {
    case DesignStage::DiscoverDivergent: return "Diverge, collect raw information widely.";
    case DesignStage::DiscoverConvergent:
      return "Converge, organize data to find patterns and insights.";
    case DesignStage::Define:
      return "Translate insights into core problems and design principles.";
    case DesignStage::DevelopDivergent: return "Brainstorm broadly, explore novel ideas.";
    case DesignStage::DevelopConvergent:
      return "Filter and combine ideas into feasible prototypes.";
    case DesignStage::Deliver: return "Finalize and communicate solution value.";
  }
  return "";
}

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::Pending: return "pending";
    case RunState::Classified: return "classified";
    case RunState::Completed: return "completed";
    case RunState::Failed: return "failed";
    case RunState::Stale: return "stale";
  }
  return "pending";
}

std::optional<RunState> run_state_from_string(std::string_view text) {
  for (auto s : {RunState::Pending, RunState::Classified, RunState::Completed, RunState::Failed,
                 RunState::Stale}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

}  // namespace dloop
