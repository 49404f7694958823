#include "onionlink/link.hpp"

#include "onionlink/errors.hpp"
#include "onionlink/jsonl.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace onionlink {

std::vector<LinkRecord> link(const ChainIndex& ix, const std::vector<Closure>& users,
                             const std::vector<ServiceRecord>& services) {
    // closure address -> identities owning it (deduplicated, insertion order)
    std::unordered_map<uint32_t, std::vector<std::string>> owners;
    for (const auto& c : users) {
        if (!c.identity)
            throw InputError("link: closure '" + c.closure_id + "' carries no identity");
        for (const auto& a : c.addresses) {
            auto id = ix.address_id(a);
            if (!id) continue; // never on chain, cannot appear in a tx
            auto& v = owners[*id];
            if (std::find(v.begin(), v.end(), *c.identity) == v.end())
                v.push_back(*c.identity);
        }
    }

    std::map<std::pair<std::string, std::string>, std::vector<LinkEvidence>> found;

    for (const auto& svc : services) {
        std::unordered_set<uint32_t> svc_addrs;
        std::vector<uint32_t> tx_indexes;
        for (const auto& a : svc.addresses) {
            auto id = ix.address_id(a.raw);
            if (!id) continue;
            svc_addrs.insert(*id);
            auto postings = ix.output_postings(*id);
            tx_indexes.insert(tx_indexes.end(), postings.begin(), postings.end());
        }
        std::sort(tx_indexes.begin(), tx_indexes.end());
        tx_indexes.erase(std::unique(tx_indexes.begin(), tx_indexes.end()),
                         tx_indexes.end());

        for (uint32_t t : tx_indexes) {
            const StoredTx& tx = ix.tx_at(t);

            int64_t paid = 0;
            uint32_t first_svc_addr = UINT32_MAX;
            for (const auto& [a, sat] : tx.outs) {
                if (!svc_addrs.contains(a)) continue;
                if (first_svc_addr == UINT32_MAX) first_svc_addr = a;
                if (__builtin_add_overflow(paid, sat, &paid))
                    throw InternalError("link: service payment sum overflows");
            }

            std::set<std::string> seen; // identities already evidenced for this tx
            for (const auto& [a, sat] : tx.ins) {
                auto it = owners.find(a);
                if (it == owners.end()) continue;
                for (const auto& identity : it->second) {
                    if (!seen.insert(identity).second) continue;
                    LinkEvidence ev;
                    ev.txid = txid_to_hex(tx.txid);
                    ev.time = tx.time;
                    ev.input_addr = ix.address_text(a);
                    ev.service_addr = ix.address_text(first_svc_addr);
                    ev.sat = paid;
                    // tx indexes ascend in (time, txid) order, so evidence
                    // lists come out already sorted
                    found[{identity, svc.service_id}].push_back(std::move(ev));
                }
            }
        }
    }

    std::vector<LinkRecord> out;
    out.reserve(found.size());
    for (auto& [key, evidence] : found) {
        LinkRecord r;
        r.identity = key.first;
        r.service_id = key.second;
        r.returning = evidence.size() >= 2;
        r.evidence = std::move(evidence);
        out.push_back(std::move(r));
    }
    // map iteration order is already (identity, service_id) ascending
    return out;
}

std::vector<LinkSummaryRow> link_summary(const std::vector<LinkRecord>& links,
                                         const std::vector<ServiceRecord>& services,
                                         const std::map<std::string, std::string>& network_of) {
    std::map<std::string, const ServiceRecord*> svc_by_id;
    for (const auto& s : services) svc_by_id[s.service_id] = &s;

    std::map<std::string, LinkSummaryRow> rows;
    for (const auto& l : links) {
        auto [it, inserted] = rows.try_emplace(l.service_id);
        LinkSummaryRow& row = it->second;
        if (inserted) {
            row.service_id = l.service_id;
            auto svc = svc_by_id.find(l.service_id);
            if (svc != svc_by_id.end()) row.name = svc->second->name;
        }
        auto net = network_of.find(l.identity);
        if (net != network_of.end() && net->second == "twitter")
            ++row.users_twitter;
        else if (net != network_of.end() && net->second == "forum")
            ++row.users_forum;
        else
            ++row.users_other;
        ++row.total_users;
        row.evidence_txs += l.evidence.size();
    }

    std::vector<LinkSummaryRow> out;
    out.reserve(rows.size());
    for (auto& [id, row] : rows) out.push_back(std::move(row));
    return out;
}

std::string summary_csv(const std::vector<LinkSummaryRow>& rows) {
    std::string out =
        "service_id,name,users_twitter,users_forum,users_other,total_users,evidence_txs\n";
    for (const auto& r : rows) {
        out += csv_field(r.service_id);
        out += ',';
        out += csv_field(r.name);
        out += ',';
        out += std::to_string(r.users_twitter);
        out += ',';
        out += std::to_string(r.users_forum);
        out += ',';
        out += std::to_string(r.users_other);
        out += ',';
        out += std::to_string(r.total_users);
        out += ',';
        out += std::to_string(r.evidence_txs);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Wire formats
// ---------------------------------------------------------------------------

ServiceRecord parse_service_line(std::string_view line, const std::string& context,
                                 size_t line_no) {
    const std::string where = context + ":" + std::to_string(line_no);
    json j = parse_json_line(line, context, line_no);
    if (!j.is_object()) throw InputError(where + ": record must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "service_id" && k != "name" && k != "addresses")
            throw InputError(where + ": unknown field '" + k + "'");
    }
    for (const char* k : {"service_id", "name", "addresses"})
        if (!j.contains(k))
            throw InputError(where + ": missing field '" + std::string(k) + "'");

    ServiceRecord s;
    if (!j["service_id"].is_string() || j["service_id"].get<std::string>().empty())
        throw InputError(where + ": field 'service_id': must be a non-empty string");
    s.service_id = j["service_id"].get<std::string>();
    if (!j["name"].is_string())
        throw InputError(where + ": field 'name': must be a string");
    s.name = j["name"].get<std::string>();
    if (!j["addresses"].is_array() || j["addresses"].empty())
        throw InputError(where + ": field 'addresses': must be a non-empty array");
    for (size_t i = 0; i < j["addresses"].size(); ++i) {
        const json& ja = j["addresses"][i];
        if (!ja.is_string())
            throw InputError(where + ": field 'addresses[" + std::to_string(i) +
                             "]': must be a string");
        AddressCheck check = validate_address(ja.get<std::string>());
        if (!check.ok())
            throw InputError(where + ": field 'addresses[" + std::to_string(i) +
                             "]': invalid address (" + to_string(check.error) + ")");
        s.addresses.push_back(std::move(check.address));
    }
    return s;
}

std::string serialize_service_line(const ServiceRecord& s) {
    json j;
    j["service_id"] = s.service_id;
    j["name"] = s.name;
    json addrs = json::array();
    for (const auto& a : s.addresses) addrs.push_back(a.raw);
    j["addresses"] = std::move(addrs);
    return j.dump();
}

std::vector<ServiceRecord> parse_services_file(const std::string& path) {
    std::vector<ServiceRecord> out;
    std::unordered_set<std::string> seen;
    for_each_line(path, [&](size_t line_no, std::string_view line) {
        ServiceRecord s = parse_service_line(line, path, line_no);
        if (!seen.insert(s.service_id).second)
            throw InputError(path + ":" + std::to_string(line_no) +
                             ": duplicate service_id '" + s.service_id + "'");
        out.push_back(std::move(s));
    });
    return out;
}

std::string serialize_link_line(const LinkRecord& r) {
    json j;
    j["identity"] = r.identity;
    j["service_id"] = r.service_id;
    json ev = json::array();
    for (const auto& e : r.evidence) {
        json je;
        je["txid"] = e.txid;
        je["time"] = e.time;
        je["input_addr"] = e.input_addr;
        je["service_addr"] = e.service_addr;
        je["sat"] = e.sat;
        ev.push_back(std::move(je));
    }
    j["evidence"] = std::move(ev);
    j["returning"] = r.returning;
    return j.dump();
}

LinkRecord parse_link_line(std::string_view line, const std::string& context,
                           size_t line_no) {
    const std::string where = context + ":" + std::to_string(line_no);
    json j = parse_json_line(line, context, line_no);
    if (!j.is_object()) throw InputError(where + ": record must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "identity" && k != "service_id" && k != "evidence" && k != "returning")
            throw InputError(where + ": unknown field '" + k + "'");
    }
    for (const char* k : {"identity", "service_id", "evidence", "returning"})
        if (!j.contains(k))
            throw InputError(where + ": missing field '" + std::string(k) + "'");

    LinkRecord r;
    if (!j["identity"].is_string())
        throw InputError(where + ": field 'identity': must be a string");
    r.identity = j["identity"].get<std::string>();
    if (!j["service_id"].is_string())
        throw InputError(where + ": field 'service_id': must be a string");
    r.service_id = j["service_id"].get<std::string>();
    if (!j["evidence"].is_array() || j["evidence"].empty())
        throw InputError(where + ": field 'evidence': must be a non-empty array");
    for (const auto& je : j["evidence"]) {
        if (!je.is_object())
            throw InputError(where + ": field 'evidence': must contain objects");
        LinkEvidence e;
        if (!je.contains("txid") || !je["txid"].is_string())
            throw InputError(where + ": field 'evidence.txid': must be a string");
        e.txid = je["txid"].get<std::string>();
        if (!je.contains("time") || !je["time"].is_number_integer())
            throw InputError(where + ": field 'evidence.time': must be an integer");
        e.time = je["time"].get<int64_t>();
        if (!je.contains("input_addr") || !je["input_addr"].is_string())
            throw InputError(where + ": field 'evidence.input_addr': must be a string");
        e.input_addr = je["input_addr"].get<std::string>();
        if (!je.contains("service_addr") || !je["service_addr"].is_string())
            throw InputError(where + ": field 'evidence.service_addr': must be a string");
        e.service_addr = je["service_addr"].get<std::string>();
        if (!je.contains("sat") || !je["sat"].is_number_integer())
            throw InputError(where + ": field 'evidence.sat': must be an integer");
        e.sat = je["sat"].get<int64_t>();
        r.evidence.push_back(std::move(e));
    }
    if (!j["returning"].is_boolean())
        throw InputError(where + ": field 'returning': must be a boolean");
    r.returning = j["returning"].get<bool>();
    if (r.returning != (r.evidence.size() >= 2))
        throw InputError(where + ": 'returning' inconsistent with evidence count");
    return r;
}

std::vector<LinkRecord> parse_links_file(const std::string& path) {
    std::vector<LinkRecord> out;
    for_each_line(path, [&](size_t line_no, std::string_view line) {
        out.push_back(parse_link_line(line, path, line_no));
    });
    return out;
}

} // namespace onionlink
