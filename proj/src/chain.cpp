#include "onionlink/chain.hpp"

#include "onionlink/errors.hpp"
#include "onionlink/jsonl.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>

namespace onionlink {

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

// Sums a tx side with overflow detection; `side` names the field in errors.
int64_t checked_sum(const std::vector<TxEntry>& entries, const std::string& where,
                    const char* side) {
    int64_t total = 0;
    for (const auto& e : entries) {
        if (__builtin_add_overflow(total, e.sat, &total))
            throw InputError(where + ": field '" + side + "': value sum overflows");
    }
    return total;
}

std::string field_path(const char* side, size_t i, const char* leaf) {
    return std::string(side) + "[" + std::to_string(i) + "]." + leaf;
}

void append_int(std::string& out, int64_t v) {
    char buf[24];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p);
}

TxEntry parse_entry(const json& j, const std::string& where, const char* side,
                    size_t i, AddressCache* cache) {
    if (!j.is_object())
        throw InputError(where + ": field '" + side + "[" + std::to_string(i) +
                         "]': must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "addr" && it.key() != "sat")
            throw InputError(where + ": unknown field '" +
                             field_path(side, i, it.key().c_str()) + "'");
    }
    if (!j.contains("addr"))
        throw InputError(where + ": missing field '" + field_path(side, i, "addr") + "'");
    if (!j.contains("sat"))
        throw InputError(where + ": missing field '" + field_path(side, i, "sat") + "'");

    const json& ja = j.at("addr");
    if (!ja.is_string())
        throw InputError(where + ": field '" + field_path(side, i, "addr") +
                         "': must be a string");
    std::string addr = ja.get<std::string>();

    TxEntry entry;
    if (cache && cache->ok.contains(addr)) {
        entry.addr.raw = addr;
        entry.addr.version =
            addr.front() == '1' ? AddressVersion::p2pkh : AddressVersion::p2sh;
    } else {
        AddressCheck check = validate_address(addr);
        if (!check.ok())
            throw InputError(where + ": field '" + field_path(side, i, "addr") +
                             "': invalid address (" + to_string(check.error) + ")");
        if (cache) cache->ok.insert(addr);
        entry.addr = std::move(check.address);
    }

    const json& js = j.at("sat");
    if (js.is_number_unsigned()) {
        uint64_t u = js.get<uint64_t>();
        if (u > static_cast<uint64_t>(INT64_MAX))
            throw InputError(where + ": field '" + field_path(side, i, "sat") +
                             "': value out of range");
        entry.sat = static_cast<int64_t>(u);
    } else if (js.is_number_integer()) {
        entry.sat = js.get<int64_t>();
    } else {
        throw InputError(where + ": field '" + field_path(side, i, "sat") +
                         "': must be a non-negative integer");
    }
    if (entry.sat < 0)
        throw InputError(where + ": field '" + field_path(side, i, "sat") +
                         "': must be a non-negative integer");
    return entry;
}

} // namespace

int64_t TxRecord::fee() const {
    if (coinbase()) return 0;
    int64_t in = 0, out = 0;
    for (const auto& e : inputs)
        if (__builtin_add_overflow(in, e.sat, &in))
            throw InternalError("fee: input sum overflows");
    for (const auto& e : outputs)
        if (__builtin_add_overflow(out, e.sat, &out))
            throw InternalError("fee: output sum overflows");
    return in - out;
}

TxId txid_from_hex(std::string_view hex) {
    if (hex.size() != 64) throw InputError("txid must be 64 hex chars");
    TxId id{};
    for (size_t i = 0; i < 32; ++i) {
        int hi = hex_digit(hex[2 * i]);
        int lo = hex_digit(hex[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw InputError("txid must be lowercase hex");
        id[i] = static_cast<uint8_t>(hi << 4 | lo);
    }
    return id;
}

std::string txid_to_hex(const TxId& id) {
    static const char* digits = "0123456789abcdef";
    std::string out(64, '0');
    for (size_t i = 0; i < 32; ++i) {
        out[2 * i] = digits[id[i] >> 4];
        out[2 * i + 1] = digits[id[i] & 0xf];
    }
    return out;
}

TxRecord parse_txj_line(std::string_view line, const std::string& context,
                        size_t line_no, AddressCache* cache) {
    const std::string where = context + ":" + std::to_string(line_no);
    json j = parse_json_line(line, context, line_no);
    if (!j.is_object()) throw InputError(where + ": record must be a JSON object");

    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "txid" && k != "time" && k != "in" && k != "out")
            throw InputError(where + ": unknown field '" + k + "'");
    }
    for (const char* k : {"txid", "time", "in", "out"})
        if (!j.contains(k))
            throw InputError(where + ": missing field '" + std::string(k) + "'");

    TxRecord tx;

    const json& jt = j.at("txid");
    if (!jt.is_string())
        throw InputError(where + ": field 'txid': must be a string");
    tx.txid = jt.get<std::string>();
    try {
        txid_from_hex(tx.txid); // format check only
    } catch (const InputError&) {
        throw InputError(where + ": field 'txid': must be 64-char lowercase hex");
    }

    const json& jtime = j.at("time");
    if (!jtime.is_number_integer() && !jtime.is_number_unsigned())
        throw InputError(where + ": field 'time': must be an integer");
    if (jtime.is_number_unsigned() && jtime.get<uint64_t>() > static_cast<uint64_t>(INT64_MAX))
        throw InputError(where + ": field 'time': value out of range");
    tx.time = jtime.get<int64_t>();

    const json& jin = j.at("in");
    if (!jin.is_array())
        throw InputError(where + ": field 'in': must be an array");
    tx.inputs.reserve(jin.size());
    for (size_t i = 0; i < jin.size(); ++i)
        tx.inputs.push_back(parse_entry(jin[i], where, "in", i, cache));

    const json& jout = j.at("out");
    if (!jout.is_array())
        throw InputError(where + ": field 'out': must be an array");
    if (jout.empty())
        throw InputError(where + ": field 'out': must be non-empty");
    tx.outputs.reserve(jout.size());
    for (size_t i = 0; i < jout.size(); ++i)
        tx.outputs.push_back(parse_entry(jout[i], where, "out", i, cache));

    if (!tx.coinbase()) {
        int64_t in_sum = checked_sum(tx.inputs, where, "in");
        int64_t out_sum = checked_sum(tx.outputs, where, "out");
        if (in_sum < out_sum)
            throw InputError(where + ": value conservation violated (inputs " +
                             std::to_string(in_sum) + " < outputs " +
                             std::to_string(out_sum) + ")");
    } else {
        checked_sum(tx.outputs, where, "out"); // overflow guard only
    }
    return tx;
}

std::string serialize_txj_line(const TxRecord& tx) {
    // Addresses and txids are base58/hex, so no JSON escaping is needed.
    std::string out;
    out.reserve(96 + 64 * (tx.inputs.size() + tx.outputs.size()));
    out += "{\"txid\":\"";
    out += tx.txid;
    out += "\",\"time\":";
    append_int(out, tx.time);
    out += ",\"in\":[";
    for (size_t i = 0; i < tx.inputs.size(); ++i) {
        if (i) out += ',';
        out += "{\"addr\":\"";
        out += tx.inputs[i].addr.raw;
        out += "\",\"sat\":";
        append_int(out, tx.inputs[i].sat);
        out += '}';
    }
    out += "],\"out\":[";
    for (size_t i = 0; i < tx.outputs.size(); ++i) {
        if (i) out += ',';
        out += "{\"addr\":\"";
        out += tx.outputs[i].addr.raw;
        out += "\",\"sat\":";
        append_int(out, tx.outputs[i].sat);
        out += '}';
    }
    out += "]}";
    return out;
}

std::vector<TxRecord> parse_ledger(const std::string& path) {
    std::vector<TxRecord> txs;
    AddressCache cache;
    std::unordered_set<std::string> seen;
    for_each_line(path, [&](size_t line_no, std::string_view line) {
        TxRecord tx = parse_txj_line(line, path, line_no, &cache);
        if (!seen.insert(tx.txid).second)
            throw InputError(path + ":" + std::to_string(line_no) +
                             ": duplicate txid '" + tx.txid + "'");
        txs.push_back(std::move(tx));
    });
    return txs;
}

void parse_ledger_stream(const std::string& path,
                         const std::function<void(TxRecord&&)>& sink) {
    AddressCache cache;
    for_each_line(path, [&](size_t line_no, std::string_view line) {
        sink(parse_txj_line(line, path, line_no, &cache));
    });
}

// ---------------------------------------------------------------------------
// ChainIndex
// ---------------------------------------------------------------------------

std::optional<std::pair<int64_t, int64_t>> ChainIndex::time_range() const {
    if (txs_.empty()) return std::nullopt;
    // canonical order is (time, txid) ascending
    return std::make_pair(txs_.front().time, txs_.back().time);
}

std::optional<uint32_t> ChainIndex::address_id(std::string_view addr) const {
    auto it = addr_ids_.find(std::string(addr));
    if (it == addr_ids_.end()) return std::nullopt;
    return it->second;
}

const std::string& ChainIndex::address_text(uint32_t id) const {
    if (id >= addr_text_.size()) throw InternalError("address id out of range");
    return addr_text_[id];
}

const StoredTx* ChainIndex::find_tx(std::string_view txid_hex) const {
    auto it = tx_by_id_.find(txid_from_hex(txid_hex));
    if (it == tx_by_id_.end()) return nullptr;
    return &txs_[it->second];
}

std::span<const uint32_t> ChainIndex::input_postings(uint32_t addr_id) const {
    if (addr_id >= in_postings_.size()) throw InternalError("address id out of range");
    return in_postings_[addr_id];
}

std::span<const uint32_t> ChainIndex::output_postings(uint32_t addr_id) const {
    if (addr_id >= out_postings_.size()) throw InternalError("address id out of range");
    return out_postings_[addr_id];
}

std::vector<ChainIndex::HistoryEntry> ChainIndex::tx_history(std::string_view addr) const {
    std::vector<HistoryEntry> out;
    auto id = address_id(addr);
    if (!id) return out;
    std::span<const uint32_t> ins = input_postings(*id);
    std::span<const uint32_t> outs = output_postings(*id);
    out.reserve(ins.size() + outs.size());
    size_t i = 0, o = 0;
    while (i < ins.size() || o < outs.size()) {
        if (o == outs.size() || (i < ins.size() && ins[i] < outs[o])) {
            out.push_back({ins[i], TxRole::input});
            ++i;
        } else if (i == ins.size() || outs[o] < ins[i]) {
            out.push_back({outs[o], TxRole::output});
            ++o;
        } else {
            out.push_back({ins[i], TxRole::both});
            ++i;
            ++o;
        }
    }
    return out;
}

int64_t ChainIndex::total_received_by_id(uint32_t addr_id) const {
    int64_t total = 0;
    for (uint32_t t : output_postings(addr_id))
        for (const auto& [a, sat] : txs_[t].outs)
            if (a == addr_id && __builtin_add_overflow(total, sat, &total))
                throw InternalError("total_received overflows");
    return total;
}

int64_t ChainIndex::total_sent_by_id(uint32_t addr_id) const {
    int64_t total = 0;
    for (uint32_t t : input_postings(addr_id))
        for (const auto& [a, sat] : txs_[t].ins)
            if (a == addr_id && __builtin_add_overflow(total, sat, &total))
                throw InternalError("total_sent overflows");
    return total;
}

int64_t ChainIndex::total_received(std::string_view addr) const {
    auto id = address_id(addr);
    return id ? total_received_by_id(*id) : 0;
}

int64_t ChainIndex::total_sent(std::string_view addr) const {
    auto id = address_id(addr);
    return id ? total_sent_by_id(*id) : 0;
}

TxRecord ChainIndex::export_tx(size_t i) const {
    if (i >= txs_.size()) throw InternalError("tx index out of range");
    const StoredTx& s = txs_[i];
    TxRecord tx;
    tx.txid = txid_to_hex(s.txid);
    tx.time = s.time;
    auto to_entries = [&](const std::vector<std::pair<uint32_t, int64_t>>& side) {
        std::vector<TxEntry> entries;
        entries.reserve(side.size());
        for (const auto& [id, sat] : side) {
            TxEntry e;
            e.addr.raw = addr_text_[id];
            e.addr.version =
                e.addr.raw.front() == '1' ? AddressVersion::p2pkh : AddressVersion::p2sh;
            e.sat = sat;
            entries.push_back(std::move(e));
        }
        return entries;
    };
    tx.inputs = to_entries(s.ins);
    tx.outputs = to_entries(s.outs);
    return tx;
}

void ChainIndex::save(const std::string& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create index directory " + dir + ": " + ec.message());

    std::string ledger;
    ledger.reserve(txs_.size() * 192);
    for (size_t i = 0; i < txs_.size(); ++i) {
        ledger += serialize_txj_line(export_tx(i));
        ledger += '\n';
    }
    write_text_file(dir + "/ledger.txj", ledger);

    json meta;
    meta["format"] = "onionlink-index-v1";
    meta["tx_count"] = txs_.size();
    meta["addr_count"] = addr_text_.size();
    auto range = time_range();
    meta["time_min"] = range ? json(range->first) : json(nullptr);
    meta["time_max"] = range ? json(range->second) : json(nullptr);
    write_text_file(dir + "/meta.json", meta.dump() + "\n");
}

ChainIndex ChainIndex::load(const std::string& dir) {
    std::string meta_path = dir + "/meta.json";
    json meta = json::parse(read_text_file(meta_path), nullptr, false);
    if (meta.is_discarded() || !meta.is_object() ||
        meta.value("format", std::string()) != "onionlink-index-v1")
        throw InputError(meta_path + ": not an index metadata file");

    IndexBuilder builder;
    parse_ledger_stream(dir + "/ledger.txj",
                        [&](TxRecord&& tx) { builder.add(std::move(tx)); });
    ChainIndex ix = builder.finish();

    if (meta.value("tx_count", uint64_t{0}) != ix.tx_count() ||
        meta.value("addr_count", uint64_t{0}) != ix.address_count())
        throw InputError(meta_path + ": index metadata mismatch with ledger contents");
    return ix;
}

// ---------------------------------------------------------------------------
// IndexBuilder
// ---------------------------------------------------------------------------

uint32_t IndexBuilder::provisional_id(const std::string& addr) {
    auto [it, inserted] = prov_ids_.try_emplace(addr, static_cast<uint32_t>(prov_text_.size()));
    if (inserted) prov_text_.push_back(addr);
    return it->second;
}

void IndexBuilder::add(TxRecord&& tx) {
    RawTx raw;
    raw.txid = txid_from_hex(tx.txid);
    raw.time = tx.time;
    raw.ins.reserve(tx.inputs.size());
    for (const auto& e : tx.inputs)
        raw.ins.emplace_back(provisional_id(e.addr.raw), e.sat);
    raw.outs.reserve(tx.outputs.size());
    if (tx.outputs.empty())
        throw InputError("tx '" + tx.txid + "': outputs must be non-empty");
    for (const auto& e : tx.outputs)
        raw.outs.emplace_back(provisional_id(e.addr.raw), e.sat);
    raw_.push_back(std::move(raw));
}

ChainIndex IndexBuilder::finish() {
    // Canonical order: (time, txid) ascending.
    std::sort(raw_.begin(), raw_.end(), [](const RawTx& a, const RawTx& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.txid < b.txid;
    });
    {
        std::unordered_map<TxId, uint32_t, ChainIndex::TxIdHash> seen;
        seen.reserve(raw_.size() * 2);
        for (const auto& r : raw_)
            if (!seen.emplace(r.txid, 0).second)
                throw InputError("duplicate txid '" + txid_to_hex(r.txid) + "'");
    }

    // Re-intern addresses in first-appearance order over the canonical
    // sequence so ids are independent of input order.
    ChainIndex ix;
    std::vector<uint32_t> remap(prov_text_.size(), UINT32_MAX);
    ix.addr_text_.reserve(prov_text_.size());
    auto canon_id = [&](uint32_t prov) {
        if (remap[prov] == UINT32_MAX) {
            remap[prov] = static_cast<uint32_t>(ix.addr_text_.size());
            ix.addr_text_.push_back(prov_text_[prov]);
        }
        return remap[prov];
    };

    ix.txs_.reserve(raw_.size());
    for (auto& r : raw_) {
        StoredTx s;
        s.txid = r.txid;
        s.time = r.time;
        s.ins.reserve(r.ins.size());
        for (auto& [prov, sat] : r.ins) s.ins.emplace_back(canon_id(prov), sat);
        s.outs.reserve(r.outs.size());
        for (auto& [prov, sat] : r.outs) s.outs.emplace_back(canon_id(prov), sat);
        ix.txs_.push_back(std::move(s));
    }
    raw_.clear();
    raw_.shrink_to_fit();
    prov_ids_.clear();
    prov_text_.clear();

    ix.addr_ids_.reserve(ix.addr_text_.size() * 2);
    for (uint32_t id = 0; id < ix.addr_text_.size(); ++id)
        ix.addr_ids_.emplace(ix.addr_text_[id], id);

    ix.tx_by_id_.reserve(ix.txs_.size() * 2);
    for (uint32_t i = 0; i < ix.txs_.size(); ++i)
        ix.tx_by_id_.emplace(ix.txs_[i].txid, i);

    ix.in_postings_.resize(ix.addr_text_.size());
    ix.out_postings_.resize(ix.addr_text_.size());
    std::vector<uint32_t> scratch;
    for (uint32_t i = 0; i < ix.txs_.size(); ++i) {
        const StoredTx& s = ix.txs_[i];
        auto post_once = [&](const std::vector<std::pair<uint32_t, int64_t>>& side,
                             std::vector<std::vector<uint32_t>>& postings) {
            scratch.clear();
            for (const auto& [id, sat] : side) scratch.push_back(id);
            std::sort(scratch.begin(), scratch.end());
            scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
            for (uint32_t id : scratch) postings[id].push_back(i);
        };
        post_once(s.ins, ix.in_postings_);
        post_once(s.outs, ix.out_postings_);
    }
    return ix;
}

ChainIndex build_index(std::vector<TxRecord> txs) {
    IndexBuilder builder;
    for (auto& tx : txs) builder.add(std::move(tx));
    return builder.finish();
}

} // namespace onionlink
