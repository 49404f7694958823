#pragma once

#include "onionlink/chain.hpp"
#include "onionlink/link.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace onionlink {

struct EconReport {
    std::string service_id;
    std::string name;
    uint64_t volume = 0;    // distinct txs touching any service address
    int64_t incoming = 0;   // satoshi received across service addresses
    int64_t outgoing = 0;   // satoshi sent across service addresses
    int64_t first_tx = 0;   // Unix seconds
    int64_t last_tx = 0;
    int64_t lifetime_days = 0;     // floor((last_tx - first_tx) / 86400)
    std::vector<int> active_years; // calendar years with >= 1 tx, ascending

    bool operator==(const EconReport&) const = default;
};

// Throws InputError "inactive service" when no tx touches the service.
EconReport econ_report(const ChainIndex& ix, const ServiceRecord& s);

struct CdfPoint {
    int64_t value = 0;
    double fraction = 0.0; // share of reports with metric <= value

    bool operator==(const CdfPoint&) const = default;
};

// Empirical CDFs over per-service metrics: distinct values ascending, final
// fraction exactly 1.0. Empty report list -> InputError.
std::vector<CdfPoint> volume_cdf(const std::vector<EconReport>& reports);
std::vector<CdfPoint> flow_cdf(const std::vector<EconReport>& reports); // over incoming

// Fraction of services active in each year of [year_from, year_to].
std::vector<double> yearly_activity(const std::vector<EconReport>& reports,
                                    int year_from, int year_to);

// incoming - outgoing (signed)
int64_t balance_retention(const EconReport& r);
// true when |retention| / max(incoming, 1) < 0.01
bool pass_through(const EconReport& r);

// CSV report: header
// service_id,name,volume,incoming_sat,outgoing_sat,first_tx,last_tx,lifetime_days
// with ISO-8601 UTC timestamps. The JSON variant adds active_years,
// retention_sat, and pass_through.
std::string econ_csv(const std::vector<EconReport>& reports);
std::string serialize_econ_line(const EconReport& r);
std::string cdf_csv(const std::vector<CdfPoint>& points);
std::string yearly_csv(const std::vector<EconReport>& reports, int year_from, int year_to);

} // namespace onionlink
