#pragma once

#include "onionlink/base58.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace onionlink {

// ---------------------------------------------------------------------------
// Ledger records
// ---------------------------------------------------------------------------

struct TxEntry {
    Address addr;
    int64_t sat = 0;

    bool operator==(const TxEntry&) const = default;
};

struct TxRecord {
    std::string txid; // 64-char lowercase hex
    int64_t time = 0; // Unix seconds UTC
    std::vector<TxEntry> inputs;
    std::vector<TxEntry> outputs;

    bool operator==(const TxRecord&) const = default;
    bool coinbase() const { return inputs.empty(); }
    // inputs - outputs; zero for coinbase
    int64_t fee() const;
};

using TxId = std::array<uint8_t, 32>;

TxId txid_from_hex(std::string_view hex); // throws InputError on malformed hex
std::string txid_to_hex(const TxId& id);

// ---------------------------------------------------------------------------
// TXJ line format: {"txid": hex64, "time": int, "in": [{"addr","sat"}...],
// "out": [...]}. Unknown fields rejected; all values validated.
// ---------------------------------------------------------------------------

// Cache of already-validated address strings; lets a ledger parse skip
// re-hashing addresses that repeat across lines.
struct AddressCache {
    std::unordered_set<std::string> ok;
};

TxRecord parse_txj_line(std::string_view line, const std::string& context,
                        size_t line_no, AddressCache* cache = nullptr);

// One canonical line, field order txid,time,in,out, no whitespace, no '\n'.
std::string serialize_txj_line(const TxRecord& tx);

// Whole-file parse preserving file order; rejects duplicate txids.
std::vector<TxRecord> parse_ledger(const std::string& path);

// Streaming variant for large ledgers; duplicate txids are caught later by
// IndexBuilder::finish (without a line number).
void parse_ledger_stream(const std::string& path,
                         const std::function<void(TxRecord&&)>& sink);

// ---------------------------------------------------------------------------
// ChainIndex: immutable address-centric view of a ledger
// ---------------------------------------------------------------------------

enum class TxRole { input, output, both };

struct StoredTx {
    TxId txid{};
    int64_t time = 0;
    // (address id, satoshi); duplicates within one side preserved
    std::vector<std::pair<uint32_t, int64_t>> ins;
    std::vector<std::pair<uint32_t, int64_t>> outs;
};

class ChainIndex {
public:
    size_t tx_count() const { return txs_.size(); }
    size_t address_count() const { return addr_text_.size(); }
    // (min, max) timestamp over all txs; nullopt when empty
    std::optional<std::pair<int64_t, int64_t>> time_range() const;

    std::optional<uint32_t> address_id(std::string_view addr) const;
    const std::string& address_text(uint32_t id) const;

    // Transactions in canonical (time, txid) order.
    const StoredTx& tx_at(size_t i) const { return txs_[i]; }
    const StoredTx* find_tx(std::string_view txid_hex) const;

    // Posting lists: indexes into the canonical tx order, ascending — hence
    // sorted by (time, txid). An address appears at most once per list per tx.
    std::span<const uint32_t> input_postings(uint32_t addr_id) const;
    std::span<const uint32_t> output_postings(uint32_t addr_id) const;

    struct HistoryEntry {
        uint32_t tx_index = 0;
        TxRole role = TxRole::input;
    };
    std::vector<HistoryEntry> tx_history(std::string_view addr) const;

    int64_t total_received(std::string_view addr) const;
    int64_t total_sent(std::string_view addr) const;
    int64_t total_received_by_id(uint32_t addr_id) const;
    int64_t total_sent_by_id(uint32_t addr_id) const;

    // Reconstructs the API-level record for tx i (addresses as text).
    TxRecord export_tx(size_t i) const;

    // Persistence: a directory holding the canonical ledger plus metadata.
    // load() re-parses and rebuilds, so query behavior is reproduced exactly.
    void save(const std::string& dir) const;
    static ChainIndex load(const std::string& dir);

private:
    friend class IndexBuilder;

    struct TxIdHash {
        size_t operator()(const TxId& id) const {
            size_t h;
            static_assert(sizeof h <= sizeof(TxId));
            std::memcpy(&h, id.data(), sizeof h);
            return h;
        }
    };

    std::vector<StoredTx> txs_;
    std::vector<std::string> addr_text_;
    std::unordered_map<std::string, uint32_t> addr_ids_;
    std::unordered_map<TxId, uint32_t, TxIdHash> tx_by_id_;
    std::vector<std::vector<uint32_t>> in_postings_;
    std::vector<std::vector<uint32_t>> out_postings_;
};

// Single-writer builder; the finished index is immutable.
class IndexBuilder {
public:
    void add(TxRecord&& tx);
    // Sorts into canonical order, interns addresses deterministically,
    // builds postings. Throws InputError on duplicate txids.
    ChainIndex finish();

    size_t pending_count() const { return raw_.size(); }

private:
    struct RawTx {
        TxId txid{};
        int64_t time = 0;
        std::vector<std::pair<uint32_t, int64_t>> ins, outs; // provisional ids
    };

    uint32_t provisional_id(const std::string& addr);

    std::vector<RawTx> raw_;
    std::unordered_map<std::string, uint32_t> prov_ids_;
    std::vector<std::string> prov_text_;
};

// Convenience: build straight from parsed records.
ChainIndex build_index(std::vector<TxRecord> txs);

} // namespace onionlink
