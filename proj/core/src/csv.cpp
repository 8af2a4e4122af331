#include "hara/csv.hpp"

namespace hara {

std::string csv_quote(std::string_view cell) {
    bool needs_quotes =
        cell.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string csv_join(const CsvRow& row) {
    std::string out;
    for (size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += csv_quote(row[i]);
    }
    return out;
}

std::optional<CsvRow> parse_csv_record(std::string_view text, size_t& pos) {
    CsvRow row;
    std::string cell;
    bool in_quotes = false;
    size_t i = pos;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"' && cell.empty()) {
            in_quotes = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            ++i;
            break;
        } else {
            cell += c;
        }
    }
    pos = i;
    if (in_quotes) return std::nullopt;
    row.push_back(std::move(cell));
    return row;
}

CsvParseResult parse_csv(std::string_view text) {
    CsvParseResult result;
    size_t pos = 0;
    while (pos < text.size()) {
        auto row = parse_csv_record(text, pos);
        if (!row) {
            result.unterminated_quote = true;
            return result;
        }
        result.rows.push_back(std::move(*row));
    }
    return result;
}

}  // namespace hara
