#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace hara {

// The six pipeline stages, in execution order.
enum class Stage {
    Hazards,
    Geometries,
    Expansion,
    Severity,
    SafetyGoal,
    ClusterSelect,
};

inline constexpr std::array<Stage, 6> kAllStages{
    Stage::Hazards,    Stage::Geometries, Stage::Expansion,
    Stage::Severity,   Stage::SafetyGoal, Stage::ClusterSelect,
};

std::string to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);
int stage_index(Stage stage);

}  // namespace hara
