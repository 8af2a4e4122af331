#include "hara/validate.hpp"

#include <algorithm>
#include <set>

#include "hara/csv.hpp"
#include "hara/orchestrator.hpp"

namespace hara {

std::vector<Violation> validate_exported_csv(std::string_view csv_text) {
    std::vector<Violation> out;
    auto parsed = parse_csv(csv_text);
    if (parsed.unterminated_quote) {
        out.push_back({"ill-formed-csv", "file ends inside a quoted cell"});
        return out;
    }
    if (parsed.rows.empty()) {
        out.push_back({"empty-file", "no rows"});
        return out;
    }
    if (csv_join(parsed.rows.front()) != kCsvHeader) {
        out.push_back({"header-mismatch",
                       "expected \"" + std::string(kCsvHeader) + "\""});
        return out;
    }

    std::set<std::string> ids;
    int prev_quadrant = -1;
    int prev_id_number = -1;
    for (size_t r = 1; r < parsed.rows.size(); ++r) {
        const auto& row = parsed.rows[r];
        std::string where = "row " + std::to_string(r);
        if (row.size() != 9) {
            out.push_back({"bad-arity", where + " has " +
                                            std::to_string(row.size()) +
                                            " cells, expected 9"});
            continue;
        }
        const std::string& id = row[0];
        if (id_number(id) < 0)
            out.push_back({"bad-id", where + ": \"" + id + "\""});
        if (!ids.insert(id).second)
            out.push_back({"duplicate-id", where + ": " + id});

        auto guideword = parse_guideword(row[1]);
        if (!guideword)
            out.push_back({"bad-guideword", where + ": \"" + row[1] + "\""});
        auto severity = parse_severity(row[6]);
        if (!severity)
            out.push_back({"bad-severity", where + ": \"" + row[6] + "\""});

        if (row[2].empty())
            out.push_back({"empty-malfunction", where});
        if (row[5].empty())
            out.push_back({"empty-consequence", where});
        if (severity && row[7].empty())
            out.push_back({"empty-rationale", where});

        if (severity) {
            bool needs_goal = *severity > SeverityLevel::S0;
            if (needs_goal && row[8].empty())
                out.push_back({"goal-missing-for-S>0",
                               where + " (" + id + ") is " + row[6] +
                                   " but Safety Goal is empty"});
            if (!needs_goal && !row[8].empty())
                out.push_back({"goal-present-for-S0",
                               where + " (" + id + ") is S0 but has a goal"});
        }

        // deterministic (quadrant, id) ordering
        if (guideword && severity) {
            Quadrant q{guideword->kind, band_of(*severity)};
            int q_index = 0;
            for (int i = 0; i < 4; ++i)
                if (kQuadrantOrder[i].first == q.guideword_kind &&
                    kQuadrantOrder[i].second == q.severity_band)
                    q_index = i;
            int n = id_number(id);
            if (q_index < prev_quadrant ||
                (q_index == prev_quadrant && n <= prev_id_number))
                out.push_back({"row-order",
                               where + " breaks (quadrant, id) ordering"});
            prev_quadrant = q_index;
            prev_id_number = n;
        }
    }
    return out;
}

}  // namespace hara
