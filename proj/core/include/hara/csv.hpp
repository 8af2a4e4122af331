#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hara {

using CsvRow = std::vector<std::string>;

// RFC-4180-ish dialect: comma delimiter, double-quote quoting, quote
// doubling, LF record separator (CRLF tolerated on input).
std::string csv_quote(std::string_view cell);
std::string csv_join(const CsvRow& row);

struct CsvParseResult {
    std::vector<CsvRow> rows;
    bool unterminated_quote = false;  // input ended inside a quoted cell
};

CsvParseResult parse_csv(std::string_view text);

// Parses a single CSV record starting at `pos`; advances past the record's
// terminating newline. Returns nullopt when the record has an unterminated
// quoted cell.
std::optional<CsvRow> parse_csv_record(std::string_view text, size_t& pos);

}  // namespace hara
