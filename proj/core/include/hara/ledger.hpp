#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hara/provider.hpp"
#include "hara/stage.hpp"

namespace hara {

// File format: UTF-8 JSON lines. First line is the header object, every
// following line one entry. Hash algorithm: SHA-256 (recorded in the
// header); entries form a hash chain, entry 1 chains from the all-zero
// sentinel, and the header carries its own digest.
struct LedgerHeader {
    std::string artifact_version;
    std::string bundle_version;
    std::string config_digest;
    std::string model_id;
    std::string hash_algorithm;  // "SHA-256"
};

struct LedgerEntry {
    std::uint64_t sequence = 0;
    Stage stage = Stage::Hazards;
    std::string logical_key;  // entity ids bound to the exchange
    int attempt = 1;
    std::string request_digest;  // sha256 of request_text
    std::string request_text;
    std::string response_text;
    FinishReason finish_reason = FinishReason::complete;
    std::string timestamp;  // ISO-8601 UTC
    std::string prev_hash;
    std::string entry_hash;
};

// Hash over every field preceding entry_hash, in declaration order.
std::string compute_entry_hash(const LedgerEntry& entry);
std::string compute_header_digest(const LedgerHeader& header);

// Append-only writer, one serialized writer even under concurrent workers.
// Every append is durably flushed to disk before it returns; a storage
// failure throws LedgerError, so no exchange can proceed unrecorded.
class LedgerWriter {
public:
    // Creates the file and writes the header.
    static LedgerWriter create(const std::filesystem::path& path,
                               const LedgerHeader& header);
    // Opens an existing ledger for continued appends (resume).
    static LedgerWriter open_existing(const std::filesystem::path& path);

    LedgerEntry append(Stage stage, const std::string& logical_key,
                       int attempt, const std::string& request_text,
                       const std::string& response_text,
                       FinishReason finish_reason);

    std::uint64_t entry_count() const { return next_sequence_ - 1; }

    LedgerWriter(LedgerWriter&&) = default;
    LedgerWriter& operator=(LedgerWriter&&) = default;

private:
    LedgerWriter() = default;

    std::filesystem::path path_;
    std::uint64_t next_sequence_ = 1;
    std::string last_hash_;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

struct LedgerContents {
    LedgerHeader header;
    std::vector<LedgerEntry> entries;
};

// Strict read; throws IntegrityError on any malformed line or broken chain.
LedgerContents read_ledger(const std::filesystem::path& path);

struct IntegrityReport {
    bool clean = true;
    std::uint64_t first_bad_sequence = 0;  // 0 = header
    std::string detail;
};

// Full-chain verification, report-based (never throws on corrupt input).
IntegrityReport verify_ledger(const std::filesystem::path& path);

}  // namespace hara
