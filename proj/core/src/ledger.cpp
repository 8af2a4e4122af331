#include "hara/ledger.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "hara/error.hpp"
#include "hara/hash.hpp"

namespace hara {
namespace {

std::string now_iso8601_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec);
    return buf;
}

nlohmann::json entry_to_json(const LedgerEntry& e) {
    return {
        {"seq", e.sequence},
        {"stage", to_string(e.stage)},
        {"key", e.logical_key},
        {"attempt", e.attempt},
        {"request_digest", e.request_digest},
        {"request", e.request_text},
        {"response", e.response_text},
        {"finish", to_string(e.finish_reason)},
        {"ts", e.timestamp},
        {"prev", e.prev_hash},
        {"hash", e.entry_hash},
    };
}

LedgerEntry entry_from_json(const nlohmann::json& j) {
    LedgerEntry e;
    e.sequence = j.at("seq").get<std::uint64_t>();
    auto stage = parse_stage(j.at("stage").get<std::string>());
    if (!stage) throw IntegrityError("unknown stage in ledger entry");
    e.stage = *stage;
    e.logical_key = j.at("key").get<std::string>();
    e.attempt = j.at("attempt").get<int>();
    e.request_digest = j.at("request_digest").get<std::string>();
    e.request_text = j.at("request").get<std::string>();
    e.response_text = j.at("response").get<std::string>();
    e.finish_reason = parse_finish_reason(j.at("finish").get<std::string>());
    e.timestamp = j.at("ts").get<std::string>();
    e.prev_hash = j.at("prev").get<std::string>();
    e.entry_hash = j.at("hash").get<std::string>();
    return e;
}

nlohmann::json header_to_json(const LedgerHeader& h) {
    return {
        {"type", "header"},
        {"artifact_version", h.artifact_version},
        {"bundle_version", h.bundle_version},
        {"config_digest", h.config_digest},
        {"model_id", h.model_id},
        {"hash_algorithm", h.hash_algorithm},
        {"header_digest", compute_header_digest(h)},
    };
}

LedgerHeader header_from_json(const nlohmann::json& j) {
    LedgerHeader h;
    h.artifact_version = j.at("artifact_version").get<std::string>();
    h.bundle_version = j.at("bundle_version").get<std::string>();
    h.config_digest = j.at("config_digest").get<std::string>();
    h.model_id = j.at("model_id").get<std::string>();
    h.hash_algorithm = j.at("hash_algorithm").get<std::string>();
    return h;
}

void append_line(const std::filesystem::path& path, const std::string& line,
                 bool truncate) {
    std::ofstream out(path, truncate ? std::ios::binary | std::ios::trunc
                                     : std::ios::binary | std::ios::app);
    if (!out) throw LedgerError("cannot open ledger for writing: " +
                                path.string());
    out << line << '\n';
    out.flush();
    if (!out) throw LedgerError("ledger write failed: " + path.string());
    out.close();
    if (out.fail()) throw LedgerError("ledger close failed: " + path.string());
}

}  // namespace

std::string compute_entry_hash(const LedgerEntry& e) {
    std::string material;
    material += std::to_string(e.sequence);
    material += '\n';
    material += to_string(e.stage);
    material += '\n';
    material += e.logical_key;
    material += '\n';
    material += std::to_string(e.attempt);
    material += '\n';
    material += e.request_digest;
    material += '\n';
    material += e.request_text;
    material += '\n';
    material += e.response_text;
    material += '\n';
    material += to_string(e.finish_reason);
    material += '\n';
    material += e.timestamp;
    material += '\n';
    material += e.prev_hash;
    return sha256_hex(material);
}

std::string compute_header_digest(const LedgerHeader& h) {
    return sha256_hex(h.artifact_version + "\n" + h.bundle_version + "\n" +
                      h.config_digest + "\n" + h.model_id + "\n" +
                      h.hash_algorithm);
}

LedgerWriter LedgerWriter::create(const std::filesystem::path& path,
                                  const LedgerHeader& header) {
    LedgerWriter w;
    w.path_ = path;
    w.last_hash_ = kZeroHash;
    append_line(path, header_to_json(header).dump(), /*truncate=*/true);
    return w;
}

LedgerWriter LedgerWriter::open_existing(const std::filesystem::path& path) {
    auto contents = read_ledger(path);
    LedgerWriter w;
    w.path_ = path;
    w.next_sequence_ = contents.entries.size() + 1;
    w.last_hash_ = contents.entries.empty() ? kZeroHash
                                            : contents.entries.back().entry_hash;
    return w;
}

LedgerEntry LedgerWriter::append(Stage stage, const std::string& logical_key,
                                 int attempt,
                                 const std::string& request_text,
                                 const std::string& response_text,
                                 FinishReason finish_reason) {
    std::lock_guard lock(*mu_);
    LedgerEntry e;
    e.sequence = next_sequence_;
    e.stage = stage;
    e.logical_key = logical_key;
    e.attempt = attempt;
    e.request_digest = sha256_hex(request_text);
    e.request_text = request_text;
    e.response_text = response_text;
    e.finish_reason = finish_reason;
    e.timestamp = now_iso8601_utc();
    e.prev_hash = last_hash_;
    e.entry_hash = compute_entry_hash(e);
    append_line(path_, entry_to_json(e).dump(), /*truncate=*/false);
    last_hash_ = e.entry_hash;
    ++next_sequence_;
    return e;
}

LedgerContents read_ledger(const std::filesystem::path& path) {
    auto report = verify_ledger(path);
    if (!report.clean)
        throw IntegrityError("ledger " + path.string() +
                             " fails verification at sequence " +
                             std::to_string(report.first_bad_sequence) + ": " +
                             report.detail);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw LedgerError("cannot read ledger: " + path.string());
    LedgerContents contents;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (!have_header) {
            contents.header = header_from_json(j);
            have_header = true;
        } else {
            contents.entries.push_back(entry_from_json(j));
        }
    }
    return contents;
}

IntegrityReport verify_ledger(const std::filesystem::path& path) {
    IntegrityReport report;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        report.clean = false;
        report.detail = "cannot open " + path.string();
        return report;
    }

    std::string line;
    std::string prev_hash = kZeroHash;
    std::uint64_t expected_seq = 1;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::uint64_t at = have_header ? expected_seq : 0;
        try {
            auto j = nlohmann::json::parse(line);
            if (!have_header) {
                if (j.value("type", "") != "header")
                    throw IntegrityError("first record is not a header");
                LedgerHeader h = header_from_json(j);
                if (j.value("header_digest", "") != compute_header_digest(h))
                    throw IntegrityError("header digest mismatch");
                have_header = true;
                continue;
            }
            LedgerEntry e = entry_from_json(j);
            if (e.sequence != expected_seq)
                throw IntegrityError("sequence " + std::to_string(e.sequence) +
                                     " where " + std::to_string(expected_seq) +
                                     " was expected");
            if (e.prev_hash != prev_hash)
                throw IntegrityError("prev_hash does not match predecessor");
            if (e.entry_hash != compute_entry_hash(e))
                throw IntegrityError("entry hash mismatch");
            prev_hash = e.entry_hash;
            ++expected_seq;
        } catch (const std::exception& ex) {
            report.clean = false;
            report.first_bad_sequence = at;
            report.detail = ex.what();
            return report;
        }
    }
    if (!have_header) {
        report.clean = false;
        report.detail = "ledger has no header record";
    }
    return report;
}

}  // namespace hara
