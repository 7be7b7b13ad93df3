#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dloop/ids.hpp"

namespace dloop {

enum class ReasoningMode { Inductive, Deductive, Abductive, Analogical };

inline constexpr std::array kAllModes{ReasoningMode::Inductive, ReasoningMode::Deductive,
                                      ReasoningMode::Abductive, ReasoningMode::Analogical};

std::string_view to_string(ReasoningMode mode);

/// One or two distinct modes; the first listed by the classifier is primary.
struct ModeAssignment {
  ReasoningMode primary = ReasoningMode::Abductive;
  std::optional<ReasoningMode> secondary;

  [[nodiscard]] std::size_t size() const noexcept { return secondary ? 2 : 1; }
  [[nodiscard]] std::vector<ReasoningMode> modes() const;
  [[nodiscard]] bool valid() const noexcept { return !secondary || *secondary != primary; }

  friend bool operator==(const ModeAssignment&, const ModeAssignment&) = default;
};

/// The six phases of the Double Diamond, split into divergent and convergent
/// halves for discover and develop.
enum class DesignStage {
  DiscoverDivergent,
  DiscoverConvergent,
  Define,
  DevelopDivergent,
  DevelopConvergent,
  Deliver,
};

inline constexpr std::array kAllStages{DesignStage::DiscoverDivergent,
                                       DesignStage::DiscoverConvergent,
                                       DesignStage::Define,
                                       DesignStage::DevelopDivergent,
                                       DesignStage::DevelopConvergent,
                                       DesignStage::Deliver};

/// Wire label, e.g. "Discover_Divergent".
std::string_view to_label(DesignStage stage);
/// Core goal sentence of the stage, used as the rationale stage description.
std::string_view stage_goal(DesignStage stage);

struct Rationale {
  std::string title;
  std::string rationale1;
  std::string rationale2;
  std::string rationale3;
  std::string rationale4;

  friend bool operator==(const Rationale&, const Rationale&) = default;
};

enum class RunState { Pending, Classified, Completed, Failed, Stale };

std::string_view to_string(RunState state);
std::optional<RunState> run_state_from_string(std::string_view text);

struct ChainNode {
  NodeId id;
  std::string title;
  std::string brief;
  std::optional<DesignStage> stage;
  ModeAssignment modes;
  std::optional<Rationale> rationale;
  RunState run_state = RunState::Pending;
  bool user_edited = false;
  int order_index = 0;
  std::optional<std::string> parallel_group;
  std::optional<std::string> last_error;

  friend bool operator==(const ChainNode&, const ChainNode&) = default;
};

struct ChainStep {
  std::string title;
  std::string brief;
  std::optional<std::string> parallel_group;

  friend bool operator==(const ChainStep&, const ChainStep&) = default;
};

struct ChainPlan {
  std::vector<ChainStep> steps;
  ModeAssignment modes;

  friend bool operator==(const ChainPlan&, const ChainPlan&) = default;
};

}  // namespace dloop
