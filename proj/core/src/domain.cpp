#include "hara/domain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "hara/error.hpp"

namespace hara {
namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

}  // namespace

std::string to_string(GuidewordKind kind) {
    return kind == GuidewordKind::Omission ? "Omission" : "Commission";
}

std::string to_string(SeverityLevel level) {
    switch (level) {
        case SeverityLevel::S0: return "S0";
        case SeverityLevel::S1: return "S1";
        case SeverityLevel::S2: return "S2";
        case SeverityLevel::S3: return "S3";
    }
    return "?";
}

std::string to_string(SeverityBand band) {
    return band == SeverityBand::Low ? "Low" : "High";
}

std::optional<SeverityLevel> parse_severity(std::string_view token) {
    std::string t = trim(token);
    if (t == "S0") return SeverityLevel::S0;
    if (t == "S1") return SeverityLevel::S1;
    if (t == "S2") return SeverityLevel::S2;
    if (t == "S3") return SeverityLevel::S3;
    return std::nullopt;
}

SeverityBand band_of(SeverityLevel level) {
    return (level == SeverityLevel::S0 || level == SeverityLevel::S1)
               ? SeverityBand::Low
               : SeverityBand::High;
}

std::string validate_item(const ItemDefinition& item) {
    if (trim(item.description).empty()) return "description is empty";
    if (trim(item.function_name).empty()) return "function_name is empty";
    if (item.function_name.find_first_of("/\\,;\"\n\r") != std::string::npos)
        return "function_name contains a path separator or CSV delimiter";
    return {};
}

std::string Guideword::display() const {
    if (qualifier.empty()) return to_string(kind);
    return to_string(kind) + " (" + qualifier + ")";
}

std::optional<Guideword> parse_guideword(std::string_view cell) {
    std::string t = trim(cell);
    std::string low = lower(t);

    Guideword gw;
    size_t head = 0;
    if (low.rfind("commission", 0) == 0) {
        gw.kind = GuidewordKind::Commission;
        head = 10;
    } else if (low.rfind("omission", 0) == 0) {
        gw.kind = GuidewordKind::Omission;
        head = 8;
    } else {
        return std::nullopt;
    }

    std::string rest = trim(t.substr(head));
    if (!rest.empty()) {
        // strip one level of (), leading ':' / '-' / ','
        if (rest.front() == ':' || rest.front() == '-' || rest.front() == ',')
            rest = trim(rest.substr(1));
        if (rest.size() >= 2 && rest.front() == '(' && rest.back() == ')')
            rest = trim(rest.substr(1, rest.size() - 2));
        gw.qualifier = rest;
    }
    return gw;
}

std::string RoadGeometry::summary() const {
    std::string out = std::to_string(lanes) + "-lane " + shape;
    if (!slope.empty() && slope != "flat") out += ", " + slope;
    for (const auto& f : features) {
        if (!f.empty()) out += ", " + f;
    }
    return out;
}

std::string Quadrant::label() const {
    return to_string(guideword_kind) + "/" + to_string(severity_band);
}

Quadrant classify_quadrant(const HazardousEvent& event, const RunContext& ctx) {
    if (!event.assessment)
        throw PreconditionError("classify_quadrant: event " + event.id +
                                " has no severity assessment");
    auto it = ctx.malfunctions.find(event.malfunction_ref);
    if (it == ctx.malfunctions.end())
        throw IntegrityError("classify_quadrant: event " + event.id +
                             " references unknown malfunction '" +
                             event.malfunction_ref + "'");
    return Quadrant{it->second.guideword.kind,
                    band_of(event.assessment->severity)};
}

std::vector<Violation> validate_event(const HazardousEvent& event,
                                      const RunContext& ctx) {
    std::vector<Violation> out;
    auto add = [&](std::string code, std::string detail) {
        out.push_back({std::move(code), std::move(detail)});
    };

    if (!ctx.malfunctions.contains(event.malfunction_ref))
        add("unresolved-malfunction",
            event.id + " references malfunction '" + event.malfunction_ref + "'");
    if (!event.scenario.geometry_ref.empty() &&
        !ctx.geometries.contains(event.scenario.geometry_ref))
        add("unresolved-geometry",
            event.id + " references geometry '" + event.scenario.geometry_ref + "'");
    if (event.scenario.narrative.empty())
        add("empty-narrative", event.id + " has an empty scenario narrative");
    if (event.consequence.empty())
        add("empty-consequence", event.id + " has an empty consequence");

    if (event.assessment) {
        if (event.assessment->rationale.empty())
            add("empty-rationale", event.id + " has no severity rationale");
        bool needs_goal = event.assessment->severity > SeverityLevel::S0;
        if (needs_goal && !event.goal)
            add("goal-missing-for-S>0",
                event.id + " is " + to_string(event.assessment->severity) +
                    " but has no safety goal");
        if (!needs_goal && event.goal)
            add("goal-present-for-S0", event.id + " is S0 but has a safety goal");
    } else if (event.goal) {
        add("goal-without-assessment", event.id + " has a goal but no assessment");
    }

    if (event.goal) {
        if (event.goal->text.empty())
            add("empty-goal-text", event.id + " safety goal text is empty");
        if (event.goal->event_ref != event.id)
            add("goal-event-mismatch",
                event.id + " goal references '" + event.goal->event_ref + "'");
    }
    return out;
}

std::string make_id(std::string_view prefix, int n, int width) {
    std::string digits = std::to_string(n);
    std::string out(prefix);
    for (int i = static_cast<int>(digits.size()); i < width; ++i) out += '0';
    out += digits;
    return out;
}

int id_number(std::string_view id) {
    size_t i = 0;
    while (i < id.size() && !std::isdigit(static_cast<unsigned char>(id[i]))) ++i;
    if (i == id.size()) return -1;
    int value = 0;
    auto [ptr, ec] =
        std::from_chars(id.data() + i, id.data() + id.size(), value);
    if (ec != std::errc{}) return -1;
    return value;
}

}  // namespace hara
