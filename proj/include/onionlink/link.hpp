#pragma once

#include "onionlink/chain.hpp"
#include "onionlink/closure.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace onionlink {

struct ServiceRecord {
    std::string service_id;
    std::string name;
    std::optional<std::string> onion_hint;
    std::vector<Address> addresses; // non-empty, validated

    bool operator==(const ServiceRecord&) const = default;
};

struct LinkEvidence {
    std::string txid;
    int64_t time = 0;
    std::string input_addr;   // first input address owned by the identity
    std::string service_addr; // first output address owned by the service
    int64_t sat = 0;          // total paid to the service's addresses in this tx

    bool operator==(const LinkEvidence&) const = default;
};

struct LinkRecord {
    std::string identity;
    std::string service_id;
    std::vector<LinkEvidence> evidence; // sorted by (time, txid)
    bool returning = false;             // |evidence| >= 2

    bool operator==(const LinkRecord&) const = default;
};

// One LinkRecord per (identity, service) pair with at least one transaction
// spending a closure address into a service address. Uncleaned (overlapping)
// closures are allowed: an input address owned by several identities
// evidences each of them. Output sorted by (identity, service_id).
std::vector<LinkRecord> link(const ChainIndex& ix, const std::vector<Closure>& users,
                             const std::vector<ServiceRecord>& services);

struct LinkSummaryRow {
    std::string service_id;
    std::string name;
    uint64_t users_twitter = 0;
    uint64_t users_forum = 0;
    uint64_t users_other = 0; // networks other than twitter/forum, or unknown
    uint64_t total_users = 0;
    uint64_t evidence_txs = 0; // summed over the service's links

    bool operator==(const LinkSummaryRow&) const = default;
};

// Per-service user counts split by identity network. network_of maps identity
// id -> network; identities missing from it count as "other".
std::vector<LinkSummaryRow> link_summary(const std::vector<LinkRecord>& links,
                                         const std::vector<ServiceRecord>& services,
                                         const std::map<std::string, std::string>& network_of);

std::string summary_csv(const std::vector<LinkSummaryRow>& rows);

// Services wire format: {"service_id": str, "name": str, "addresses": [str...]}.
ServiceRecord parse_service_line(std::string_view line, const std::string& context,
                                 size_t line_no);
std::string serialize_service_line(const ServiceRecord& s);
// Rejects duplicate service_ids.
std::vector<ServiceRecord> parse_services_file(const std::string& path);

// Links wire format mirrors LinkRecord.
std::string serialize_link_line(const LinkRecord& r);
LinkRecord parse_link_line(std::string_view line, const std::string& context,
                           size_t line_no);
std::vector<LinkRecord> parse_links_file(const std::string& path);

} // namespace onionlink
