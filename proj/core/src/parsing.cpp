#include "hara/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "hara/domain.hpp"

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

bool is_pipe_separator_row(const std::vector<std::string>& cells) {
    for (const auto& c : cells) {
        std::string t = trim(c);
        if (t.empty()) return false;
        for (size_t i = 0; i < t.size(); ++i) {
            char ch = t[i];
            bool edge_colon = (ch == ':') && (i == 0 || i + 1 == t.size());
            if (ch != '-' && !edge_colon) return false;
        }
    }
    return true;
}

// Rewrites markdown pipe-table lines ("| a | b |") as CSV records and strips
// code fences; everything else passes through unchanged.
std::string normalize_markdown(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    std::istringstream in{std::string(raw)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.rfind("```", 0) == 0) continue;
        if (t.size() >= 2 && t.front() == '|' && t.back() == '|') {
            std::vector<std::string> cells;
            std::string cell;
            for (size_t i = 1; i + 1 < t.size(); ++i) {
                if (t[i] == '|') {
                    cells.push_back(trim(cell));
                    cell.clear();
                } else {
                    cell += t[i];
                }
            }
            cells.push_back(trim(cell));
            if (is_pipe_separator_row(cells)) continue;
            out += csv_join(cells);
            out += '\n';
        } else {
            out += line;
            out += '\n';
        }
    }
    return out;
}

bool header_matches(const CsvRow& row, const StageSchema& schema) {
    if (row.size() != schema.columns.size()) return false;
    for (size_t i = 0; i < row.size(); ++i)
        if (lower(trim(row[i])) != lower(schema.columns[i].name)) return false;
    return true;
}

bool is_blank(const CsvRow& row) {
    for (const auto& c : row)
        if (!trim(c).empty()) return false;
    return true;
}

bool is_id_token(std::string_view s) {
    size_t i = 0;
    while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    if (i == 0 || i == s.size()) return false;
    for (size_t j = i; j < s.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
    return true;
}

std::optional<std::string> check_cell(const std::string& cell, CellKind kind) {
    std::string t = trim(cell);
    switch (kind) {
        case CellKind::text:
            return std::nullopt;
        case CellKind::nonempty_text:
            if (t.empty()) return "cell is empty";
            return std::nullopt;
        case CellKind::positive_integer: {
            int v = 0;
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (ec != std::errc{} || p != t.data() + t.size() || v < 1)
                return "expected a positive integer, got \"" + t + "\"";
            return std::nullopt;
        }
        case CellKind::severity_token:
            if (!parse_severity(t))
                return "invalid severity token \"" + t +
                       "\" (allowed: S0, S1, S2, S3)";
            return std::nullopt;
        case CellKind::guideword_token:
            if (!parse_guideword(t))
                return "invalid guideword \"" + t +
                       "\" (allowed: Omission, Commission, optionally with a "
                       "qualifier)";
            return std::nullopt;
        case CellKind::id_token:
            if (!is_id_token(t))
                return "invalid id \"" + t + "\" (expected letters then digits)";
            return std::nullopt;
    }
    return "unknown cell kind";
}

std::string excerpt_of(std::string_view text, size_t limit = 400) {
    if (text.size() <= limit) return std::string(text);
    return std::string(text.substr(0, limit)) + "...";
}

}  // namespace

std::string StageSchema::header_line() const {
    CsvRow names;
    names.reserve(columns.size());
    for (const auto& c : columns) names.push_back(c.name);
    return csv_join(names);
}

StageSchema schema_for(Stage stage, int geometries_requested,
                       int representatives_per_quadrant) {
    StageSchema s;
    s.stage = stage;
    switch (stage) {
        case Stage::Hazards:
            s.columns = {{"Guideword", CellKind::guideword_token},
                         {"Malfunction", CellKind::nonempty_text}};
            s.min_rows = 1;
            break;
        case Stage::Geometries:
            s.columns = {{"Lanes", CellKind::positive_integer},
                         {"Shape", CellKind::nonempty_text},
                         {"Slope", CellKind::text},
                         {"Features", CellKind::text}};
            s.min_rows = geometries_requested;
            s.max_rows = geometries_requested;
            break;
        case Stage::Expansion:
            s.columns = {{"Detailed Scenario", CellKind::nonempty_text},
                         {"Agents", CellKind::text},
                         {"Hazardous Event", CellKind::nonempty_text}};
            s.min_rows = 0;  // "no hazardous event for this combination"
            break;
        case Stage::Severity:
            s.columns = {{"Severity", CellKind::severity_token},
                         {"Rationale", CellKind::nonempty_text}};
            s.min_rows = 1;
            s.max_rows = 1;
            break;
        case Stage::SafetyGoal:
            s.columns = {{"Safety Goal", CellKind::nonempty_text}};
            s.min_rows = 1;
            s.max_rows = 1;
            break;
        case Stage::ClusterSelect:
            s.columns = {{"Selected ID", CellKind::id_token}};
            s.min_rows = 1;
            s.max_rows = representatives_per_quadrant;
            break;
    }
    return s;
}

std::string to_string(ParseFailureCode code) {
    switch (code) {
        case ParseFailureCode::no_table_found: return "no-table-found";
        case ParseFailureCode::header_mismatch: return "header-mismatch";
        case ParseFailureCode::bad_cell: return "bad-cell";
        case ParseFailureCode::row_count: return "row-count";
        case ParseFailureCode::truncated: return "truncated";
    }
    return "?";
}

ParseOutcome extract_table(std::string_view raw_text,
                           const StageSchema& schema) {
    ParseOutcome out;
    std::string text = normalize_markdown(raw_text);

    // Find the header line. Headers never span lines, so each line is
    // parsed as a standalone record; prose before the table cannot derail
    // the scan.
    size_t after_header = std::string::npos;
    std::string near_miss;
    size_t line_start = 0;
    while (line_start < text.size()) {
        size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string_view line(text.data() + line_start, line_end - line_start);
        size_t p = 0;
        auto record = parse_csv_record(line, p);
        if (record && p >= line.size()) {
            if (header_matches(*record, schema)) {
                after_header = line_end < text.size() ? line_end + 1 : line_end;
                break;
            }
            if (!record->empty() && record->size() > 1 &&
                lower(trim(record->front())) == lower(schema.columns[0].name) &&
                near_miss.empty()) {
                near_miss = std::string(line);
            }
        }
        line_start = line_end + 1;
    }
    if (after_header == std::string::npos) {
        if (!near_miss.empty()) {
            out.failure = {ParseFailureCode::header_mismatch,
                           "header does not match expected \"" +
                               schema.header_line() + "\"",
                           excerpt_of(near_miss)};
        } else {
            out.failure = {ParseFailureCode::no_table_found,
                           "no CSV table with header \"" +
                               schema.header_line() + "\" found",
                           excerpt_of(raw_text)};
        }
        return out;
    }

    // Parse rows until arity breaks, a blank line, or end of input.
    size_t pos = after_header;
    std::vector<CsvRow> rows;
    while (pos < text.size()) {
        size_t record_start = pos;
        auto record = parse_csv_record(text, pos);
        if (!record) {
            out.failure = {ParseFailureCode::truncated,
                           "response ends inside a quoted cell",
                           excerpt_of(text.substr(record_start))};
            return out;
        }
        if (is_blank(*record)) break;
        if (record->size() != schema.columns.size()) break;
        rows.push_back(std::move(*record));
    }

    for (size_t r = 0; r < rows.size(); ++r) {
        for (size_t c = 0; c < schema.columns.size(); ++c) {
            auto problem = check_cell(rows[r][c], schema.columns[c].kind);
            if (problem) {
                out.failure = {ParseFailureCode::bad_cell,
                               "row " + std::to_string(r + 1) + ", column \"" +
                                   schema.columns[c].name + "\": " + *problem,
                               excerpt_of(csv_join(rows[r]))};
                return out;
            }
        }
    }

    if (static_cast<int>(rows.size()) < schema.min_rows) {
        out.failure = {ParseFailureCode::row_count,
                       "expected at least " + std::to_string(schema.min_rows) +
                           " rows, got " + std::to_string(rows.size()),
                       excerpt_of(raw_text)};
        return out;
    }
    if (schema.max_rows && static_cast<int>(rows.size()) > *schema.max_rows) {
        out.failure = {ParseFailureCode::row_count,
                       "expected at most " + std::to_string(*schema.max_rows) +
                           " rows, got " + std::to_string(rows.size()),
                       excerpt_of(raw_text)};
        return out;
    }
    out.rows = std::move(rows);
    return out;
}

RenderedPrompt build_repair_prompt(const RenderedPrompt& original,
                                   const StageSchema& schema,
                                   const ParseFailure& failure) {
    std::string text;
    text += "Your previous response could not be processed.\n";
    text += "Problem (" + to_string(failure.code) + "): " + failure.detail + "\n";
    if (!failure.excerpt.empty()) {
        text += "Offending output:\n";
        text += failure.excerpt;
        text += "\n";
    }
    text += "\nOriginal task:\n";
    text += original.text;
    text += "\n\nRespond again, in full, with ONLY a CSV table using exactly "
            "this header:\n";
    text += schema.header_line();
    if (schema.min_rows == schema.max_rows && schema.max_rows) {
        text += "\nThe table must contain exactly " +
                std::to_string(*schema.max_rows) + " data row" +
                (*schema.max_rows == 1 ? "" : "s") + ".";
    }
    text += "\nDo not continue a previous answer; re-emit the complete table.";

    RenderedPrompt out;
    out.stage = original.stage;
    out.bindings = original.bindings;
    out.text = std::move(text);
    out.token_estimate = estimate_tokens(out.text);
    return out;
}

}  // namespace hara
