#include "hara/stage.hpp"

namespace hara {

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::Hazards: return "Hazards";
        case Stage::Geometries: return "Geometries";
        case Stage::Expansion: return "Expansion";
        case Stage::Severity: return "Severity";
        case Stage::SafetyGoal: return "SafetyGoal";
        case Stage::ClusterSelect: return "ClusterSelect";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
    for (Stage s : kAllStages) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

int stage_index(Stage stage) { return static_cast<int>(stage); }

}  // namespace hara
