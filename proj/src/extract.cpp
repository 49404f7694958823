#include "onionlink/extract.hpp"

#include "onionlink/errors.hpp"
#include "onionlink/jsonl.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <thread>

namespace onionlink {

const char* to_string(DocSource s) {
    switch (s) {
    case DocSource::onion_page: return "onion_page";
    case DocSource::tweet: return "tweet";
    case DocSource::forum_profile: return "forum_profile";
    case DocSource::other: return "other";
    }
    throw InternalError("unknown DocSource");
}

std::optional<DocSource> doc_source_from_string(std::string_view s) {
    if (s == "onion_page") return DocSource::onion_page;
    if (s == "tweet") return DocSource::tweet;
    if (s == "forum_profile") return DocSource::forum_profile;
    if (s == "other") return DocSource::other;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scanning
// ---------------------------------------------------------------------------

std::vector<std::string> scan_text(std::string_view body, const std::string& context) {
    size_t bad_offset = 0;
    if (!validate_utf8(body, &bad_offset))
        throw InputError(context + ": invalid UTF-8 at byte offset " +
                         std::to_string(bad_offset));

    std::vector<std::string> out;
    size_t i = 0;
    const size_t n = body.size();
    while (i < n) {
        if (!is_base58_char(body[i])) {
            ++i;
            continue;
        }
        size_t start = i;
        while (i < n && is_base58_char(body[i])) ++i;
        size_t len = i - start;
        // a maximal base58 run qualifies only at address length starting 1/3
        if (len >= 26 && len <= 35 && (body[start] == '1' || body[start] == '3'))
            out.emplace_back(body.substr(start, len));
    }
    return out;
}

std::vector<std::string> scan_document(const Document& d) {
    return scan_text(d.body, "doc '" + d.doc_id + "'");
}

// ---------------------------------------------------------------------------
// Seed dataset
// ---------------------------------------------------------------------------

std::vector<SeedAddressRecord> filter_active(std::vector<SeedAddressRecord> records,
                                             const ChainIndex& ix, int64_t min_received) {
    if (min_received < 0) throw InputError("min_received must be >= 0");
    for (auto& r : records) {
        bool has_tx = false;
        if (auto id = ix.address_id(r.address.raw))
            has_tx = !ix.input_postings(*id).empty() || !ix.output_postings(*id).empty();
        r.active = has_tx && ix.total_received(r.address.raw) >= min_received;
    }
    std::vector<SeedAddressRecord> kept;
    kept.reserve(records.size());
    for (auto& r : records)
        if (r.active) kept.push_back(std::move(r));
    return kept;
}

namespace {

bool user_source(DocSource s) {
    return s == DocSource::tweet || s == DocSource::forum_profile;
}

// Scans docs [begin, end) into per-document candidate lists.
void scan_range(const std::vector<Document>& docs, size_t begin, size_t end,
                std::vector<std::vector<std::string>>& candidates) {
    for (size_t i = begin; i < end; ++i)
        candidates[i] = scan_document(docs[i]);
}

} // namespace

std::vector<SeedAddressRecord> build_seed_dataset(std::vector<Document> corpus,
                                                  const ChainIndex& ix,
                                                  int64_t min_received,
                                                  unsigned n_threads) {
    // Deterministic processing order regardless of corpus file order.
    std::stable_sort(corpus.begin(), corpus.end(),
                     [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });

    for (const auto& d : corpus)
        if (user_source(d.source) && !d.identity)
            throw InputError("doc '" + d.doc_id + "': user-source document lacks identity");

    std::vector<std::vector<std::string>> candidates(corpus.size());
    if (n_threads <= 1 || corpus.size() < 2) {
        scan_range(corpus, 0, corpus.size(), candidates);
    } else {
        unsigned workers =
            std::min<unsigned>(n_threads, static_cast<unsigned>(corpus.size()));
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(workers);
        size_t chunk = (corpus.size() + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            size_t begin = w * chunk;
            size_t end = std::min(corpus.size(), begin + chunk);
            threads.emplace_back([&, w, begin, end] {
                try {
                    scan_range(corpus, begin, end, candidates);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    struct Accum {
        Address address;
        std::string network, handle;
        std::set<std::string> evidence;
    };
    std::map<std::pair<std::string, std::string>, Accum> by_addr_identity;
    std::map<std::string, std::set<std::string>> identities_of_addr;

    for (size_t i = 0; i < corpus.size(); ++i) {
        const Document& d = corpus[i];
        if (!d.identity) continue; // nothing to attribute the finds to
        for (const auto& cand : candidates[i]) {
            AddressCheck check = validate_address(cand);
            if (!check.ok()) continue; // regex false positive or corrupted paste
            auto key = std::make_pair(cand, d.identity->id);
            auto [it, inserted] = by_addr_identity.try_emplace(key);
            if (inserted) {
                it->second.address = check.address;
                it->second.network = d.identity->network;
                it->second.handle = d.identity->handle;
            }
            it->second.evidence.insert(d.doc_id);
            identities_of_addr[cand].insert(d.identity->id);
        }
    }

    std::vector<SeedAddressRecord> records;
    records.reserve(by_addr_identity.size());
    for (auto& [key, acc] : by_addr_identity) {
        SeedAddressRecord r;
        r.address = std::move(acc.address);
        r.identity = key.second;
        r.network = std::move(acc.network);
        r.handle = std::move(acc.handle);
        r.evidence.assign(acc.evidence.begin(), acc.evidence.end());
        r.contested = identities_of_addr[key.first].size() > 1;
        records.push_back(std::move(r));
    }
    return filter_active(std::move(records), ix, min_received);
}

// ---------------------------------------------------------------------------
// Wire formats
// ---------------------------------------------------------------------------

namespace {

std::string require_string(const json& j, const char* field, const std::string& where,
                           bool allow_empty = true) {
    if (!j.contains(field) || !j.at(field).is_string())
        throw InputError(where + ": field '" + field + "': must be a string");
    std::string v = j.at(field).get<std::string>();
    if (!allow_empty && v.empty())
        throw InputError(where + ": field '" + field + "': must be non-empty");
    return v;
}

bool valid_network(std::string_view n) {
    return n == "twitter" || n == "forum" || n == "onion" || n == "other";
}

} // namespace

Document parse_document_line(std::string_view line, const std::string& context,
                             size_t line_no) {
    const std::string where = context + ":" + std::to_string(line_no);
    json j = parse_json_line(line, context, line_no);
    if (!j.is_object()) throw InputError(where + ": record must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "doc_id" && k != "source" && k != "identity" && k != "body")
            throw InputError(where + ": unknown field '" + k + "'");
    }
    for (const char* k : {"doc_id", "source", "identity", "body"})
        if (!j.contains(k))
            throw InputError(where + ": missing field '" + std::string(k) + "'");

    Document d;
    d.doc_id = require_string(j, "doc_id", where, /*allow_empty=*/false);
    std::string source = require_string(j, "source", where);
    auto src = doc_source_from_string(source);
    if (!src)
        throw InputError(where + ": field 'source': unknown source '" + source + "'");
    d.source = *src;

    const json& ji = j.at("identity");
    if (ji.is_object()) {
        Identity ident;
        for (auto it = ji.begin(); it != ji.end(); ++it) {
            const auto& k = it.key();
            if (k != "id" && k != "network" && k != "handle" && k != "profile")
                throw InputError(where + ": unknown field 'identity." + k + "'");
        }
        ident.id = require_string(ji, "id", where, /*allow_empty=*/false);
        ident.network = require_string(ji, "network", where);
        if (!valid_network(ident.network))
            throw InputError(where + ": field 'identity.network': unknown network '" +
                             ident.network + "'");
        ident.handle = require_string(ji, "handle", where, /*allow_empty=*/false);
        if (ji.contains("profile")) {
            const json& jp = ji.at("profile");
            if (!jp.is_object())
                throw InputError(where + ": field 'identity.profile': must be an object");
            for (auto it = jp.begin(); it != jp.end(); ++it) {
                if (!it.value().is_string())
                    throw InputError(where + ": field 'identity.profile." + it.key() +
                                     "': must be a string");
                ident.profile[it.key()] = it.value().get<std::string>();
            }
        }
        d.identity = std::move(ident);
    } else if (!ji.is_null()) {
        throw InputError(where + ": field 'identity': must be an object or null");
    }

    if (!j.at("body").is_string())
        throw InputError(where + ": field 'body': must be a string");
    d.body = j.at("body").get<std::string>();
    return d;
}

std::string serialize_document_line(const Document& d) {
    json j;
    j["doc_id"] = d.doc_id;
    j["source"] = to_string(d.source);
    if (d.identity) {
        json ji;
        ji["id"] = d.identity->id;
        ji["network"] = d.identity->network;
        ji["handle"] = d.identity->handle;
        ji["profile"] = json::object();
        for (const auto& [k, v] : d.identity->profile) ji["profile"][k] = v;
        j["identity"] = std::move(ji);
    } else {
        j["identity"] = nullptr;
    }
    j["body"] = d.body;
    return j.dump();
}

std::vector<Document> parse_corpus_file(const std::string& path) {
    std::vector<Document> out;
    for_each_line(path, [&](size_t line_no, std::string_view line) {
        out.push_back(parse_document_line(line, path, line_no));
    });
    return out;
}

std::string serialize_seed_line(const SeedAddressRecord& r) {
    json j;
    j["address"] = r.address.raw;
    j["identity"] = r.identity;
    j["network"] = r.network;
    j["handle"] = r.handle;
    j["evidence"] = r.evidence;
    j["active"] = r.active;
    j["contested"] = r.contested;
    return j.dump();
}

SeedAddressRecord parse_seed_line(std::string_view line, const std::string& context,
                                  size_t line_no) {
    const std::string where = context + ":" + std::to_string(line_no);
    json j = parse_json_line(line, context, line_no);
    if (!j.is_object()) throw InputError(where + ": record must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "address" && k != "identity" && k != "network" && k != "handle" &&
            k != "evidence" && k != "active" && k != "contested")
            throw InputError(where + ": unknown field '" + k + "'");
    }
    for (const char* k : {"address", "identity", "network", "handle", "evidence",
                          "active", "contested"})
        if (!j.contains(k))
            throw InputError(where + ": missing field '" + std::string(k) + "'");

    SeedAddressRecord r;
    std::string addr = require_string(j, "address", where);
    AddressCheck check = validate_address(addr);
    if (!check.ok())
        throw InputError(where + ": field 'address': invalid address (" +
                         to_string(check.error) + ")");
    r.address = std::move(check.address);
    r.identity = require_string(j, "identity", where, /*allow_empty=*/false);
    r.network = require_string(j, "network", where);
    r.handle = require_string(j, "handle", where);
    if (!j.at("evidence").is_array())
        throw InputError(where + ": field 'evidence': must be an array");
    for (const auto& e : j.at("evidence")) {
        if (!e.is_string())
            throw InputError(where + ": field 'evidence': must contain only strings");
        r.evidence.push_back(e.get<std::string>());
    }
    if (!j.at("active").is_boolean())
        throw InputError(where + ": field 'active': must be a boolean");
    r.active = j.at("active").get<bool>();
    if (!j.at("contested").is_boolean())
        throw InputError(where + ": field 'contested': must be a boolean");
    r.contested = j.at("contested").get<bool>();
    return r;
}

std::vector<SeedAddressRecord> parse_seeds_file(const std::string& path) {
    std::vector<SeedAddressRecord> out;
    for_each_line(path, [&](size_t line_no, std::string_view line) {
        out.push_back(parse_seed_line(line, path, line_no));
    });
    return out;
}

} // namespace onionlink
