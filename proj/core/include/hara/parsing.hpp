#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hara/csv.hpp"
#include "hara/stage.hpp"
#include "hara/templates.hpp"

namespace hara {

enum class CellKind {
    text,           // may be empty
    nonempty_text,
    positive_integer,
    severity_token,   // exactly S0..S3
    guideword_token,  // Omission/Commission with optional qualifier
    id_token,         // letters then digits, e.g. E042
};

struct Column {
    std::string name;
    CellKind kind = CellKind::text;
};

struct StageSchema {
    Stage stage = Stage::Hazards;
    std::vector<Column> columns;
    int min_rows = 0;
    std::optional<int> max_rows;

    std::string header_line() const;
};

// Per-stage response schemas. These column sets are this project's output
// contract; docs/formats.md describes them.
StageSchema schema_for(Stage stage, int geometries_requested = 20,
                       int representatives_per_quadrant = 5);

enum class ParseFailureCode {
    no_table_found,
    header_mismatch,
    bad_cell,
    row_count,
    truncated,
};

std::string to_string(ParseFailureCode code);

struct ParseFailure {
    ParseFailureCode code = ParseFailureCode::no_table_found;
    std::string detail;
    std::string excerpt;  // offending slice of the raw response
};

struct ParseOutcome {
    std::vector<CsvRow> rows;
    std::optional<ParseFailure> failure;

    bool ok() const { return !failure.has_value(); }
};

// Locates the first CSV block whose header matches the schema (markdown pipe
// tables are normalized first), parses and validates rows. Total over
// arbitrary byte input; all failures are values, never exceptions.
ParseOutcome extract_table(std::string_view raw_text, const StageSchema& schema);

// New prompt carrying the original task, the failure, the offending excerpt
// and a restated response template. The caller increments attempt.
RenderedPrompt build_repair_prompt(const RenderedPrompt& original,
                                   const StageSchema& schema,
                                   const ParseFailure& failure);

}  // namespace hara
