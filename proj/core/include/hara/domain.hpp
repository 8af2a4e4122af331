#pragma once

#include <array>
#include <compare>
#include <map>
#include <utility>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hara {

enum class GuidewordKind { Omission, Commission };
enum class SeverityLevel { S0, S1, S2, S3 };
enum class SeverityBand { Low, High };  // Low = S0/S1, High = S2/S3

std::string to_string(GuidewordKind kind);
std::string to_string(SeverityLevel level);
std::string to_string(SeverityBand band);

// Strict token parse; "S4", "moderate" etc. are rejected, never coerced.
std::optional<SeverityLevel> parse_severity(std::string_view token);

SeverityBand band_of(SeverityLevel level);

// The sole functional input to a run.
struct ItemDefinition {
    std::string function_name;
    std::string description;
};

// Empty string when valid, otherwise the violated invariant.
std::string validate_item(const ItemDefinition& item);

struct Guideword {
    GuidewordKind kind = GuidewordKind::Omission;
    std::string qualifier;  // optional refinement, e.g. "too late"

    std::string display() const;
};

// Accepts "Omission", "commission (too much)", "Omission: too late",
// "Omission - too late". Anything not led by a primary guide-word fails.
std::optional<Guideword> parse_guideword(std::string_view cell);

struct Malfunction {
    std::string id;
    Guideword guideword;
    std::string statement;
};

struct RoadGeometry {
    std::string id;
    int lanes = 1;
    std::string shape;
    std::string slope;
    std::vector<std::string> features;

    // One-line rendering used as the "Core Scenario" cell and in prompts.
    std::string summary() const;
};

struct ScenarioAgent {
    std::string label;
    std::string trajectory;
};

struct DetailedScenario {
    std::string geometry_ref;
    std::vector<ScenarioAgent> agents;
    std::string narrative;
};

struct SeverityAssessment {
    SeverityLevel severity = SeverityLevel::S0;
    std::string rationale;
};

struct SafetyGoal {
    std::string id;
    std::string event_ref;
    std::string text;
};

struct HazardousEvent {
    std::string id;
    std::string malfunction_ref;
    DetailedScenario scenario;
    std::string consequence;
    std::optional<SeverityAssessment> assessment;
    std::optional<SafetyGoal> goal;
};

struct Quadrant {
    GuidewordKind guideword_kind = GuidewordKind::Omission;
    SeverityBand severity_band = SeverityBand::Low;

    auto operator<=>(const Quadrant&) const = default;
    std::string label() const;  // e.g. "Omission/Low"
};

inline constexpr std::array<std::pair<GuidewordKind, SeverityBand>, 4>
    kQuadrantOrder{{{GuidewordKind::Omission, SeverityBand::Low},
                    {GuidewordKind::Omission, SeverityBand::High},
                    {GuidewordKind::Commission, SeverityBand::Low},
                    {GuidewordKind::Commission, SeverityBand::High}}};

// Id tables for referential checks within one run.
struct RunContext {
    std::map<std::string, Malfunction> malfunctions;
    std::map<std::string, RoadGeometry> geometries;
};

// Rule-based quadrant assignment. Throws PreconditionError when the event
// has no assessment, IntegrityError when malfunction_ref does not resolve.
Quadrant classify_quadrant(const HazardousEvent& event, const RunContext& ctx);

struct Violation {
    std::string code;
    std::string detail;
};

// Violations are data, not failures; empty report means all invariants hold.
std::vector<Violation> validate_event(const HazardousEvent& event,
                                      const RunContext& ctx);

// Zero-padded sequential id, e.g. make_id("M", 3, 2) == "M03".
std::string make_id(std::string_view prefix, int n, int width);

// Numeric suffix of an id ("E013" -> 13); -1 when there is none.
int id_number(std::string_view id);

}  // namespace hara
