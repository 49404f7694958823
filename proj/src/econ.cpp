#include "onionlink/econ.hpp"

#include "onionlink/errors.hpp"
#include "onionlink/jsonl.hpp"
#include "onionlink/time_util.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_set>

namespace onionlink {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw InternalError("double formatting failed");
    return std::string(buf, p);
}

std::vector<CdfPoint> metric_cdf(std::vector<int64_t> values) {
    if (values.empty()) throw InputError("CDF of an empty report list");
    std::sort(values.begin(), values.end());
    std::vector<CdfPoint> out;
    const double n = static_cast<double>(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        // emit one point per distinct value, at its last occurrence
        if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
        out.push_back({values[i], static_cast<double>(i + 1) / n});
    }
    out.back().fraction = 1.0; // exact, regardless of division rounding
    return out;
}

} // namespace

EconReport econ_report(const ChainIndex& ix, const ServiceRecord& s) {
    std::unordered_set<uint32_t> addr_ids;
    for (const auto& a : s.addresses)
        if (auto id = ix.address_id(a.raw)) addr_ids.insert(*id);

    std::vector<uint32_t> tx_indexes;
    for (uint32_t id : addr_ids) {
        auto ins = ix.input_postings(id);
        auto outs = ix.output_postings(id);
        tx_indexes.insert(tx_indexes.end(), ins.begin(), ins.end());
        tx_indexes.insert(tx_indexes.end(), outs.begin(), outs.end());
    }
    std::sort(tx_indexes.begin(), tx_indexes.end());
    tx_indexes.erase(std::unique(tx_indexes.begin(), tx_indexes.end()), tx_indexes.end());

    if (tx_indexes.empty())
        throw InputError("inactive service '" + s.service_id + "': no transactions");

    EconReport r;
    r.service_id = s.service_id;
    r.name = s.name;
    r.volume = tx_indexes.size();
    for (uint32_t id : addr_ids) {
        int64_t recv = ix.total_received_by_id(id);
        int64_t sent = ix.total_sent_by_id(id);
        if (__builtin_add_overflow(r.incoming, recv, &r.incoming) ||
            __builtin_add_overflow(r.outgoing, sent, &r.outgoing))
            throw InternalError("econ_report: flow sum overflows");
    }
    r.first_tx = ix.tx_at(tx_indexes.front()).time;
    r.last_tx = ix.tx_at(tx_indexes.back()).time;
    r.lifetime_days = lifetime_days(r.first_tx, r.last_tx);

    std::set<int> years;
    for (uint32_t t : tx_indexes) years.insert(utc_year(ix.tx_at(t).time));
    r.active_years.assign(years.begin(), years.end());
    return r;
}

std::vector<CdfPoint> volume_cdf(const std::vector<EconReport>& reports) {
    std::vector<int64_t> values;
    values.reserve(reports.size());
    for (const auto& r : reports) values.push_back(static_cast<int64_t>(r.volume));
    return metric_cdf(std::move(values));
}

std::vector<CdfPoint> flow_cdf(const std::vector<EconReport>& reports) {
    std::vector<int64_t> values;
    values.reserve(reports.size());
    for (const auto& r : reports) values.push_back(r.incoming);
    return metric_cdf(std::move(values));
}

std::vector<double> yearly_activity(const std::vector<EconReport>& reports,
                                    int year_from, int year_to) {
    if (year_from > year_to) throw InputError("empty year range");
    std::vector<double> out(static_cast<size_t>(year_to - year_from + 1), 0.0);
    if (reports.empty()) return out;
    for (const auto& r : reports)
        for (int y : r.active_years)
            if (y >= year_from && y <= year_to)
                out[static_cast<size_t>(y - year_from)] += 1.0;
    for (auto& v : out) v /= static_cast<double>(reports.size());
    return out;
}

int64_t balance_retention(const EconReport& r) { return r.incoming - r.outgoing; }

bool pass_through(const EconReport& r) {
    int64_t ret = balance_retention(r);
    uint64_t mag = ret < 0 ? static_cast<uint64_t>(-(ret + 1)) + 1 : static_cast<uint64_t>(ret);
    int64_t base = std::max<int64_t>(r.incoming, 1);
    // |retention| / base < 0.01  <=>  100 * |retention| < base
    if (mag > UINT64_MAX / 100) return false;
    return mag * 100 < static_cast<uint64_t>(base);
}

std::string econ_csv(const std::vector<EconReport>& reports) {
    std::string out =
        "service_id,name,volume,incoming_sat,outgoing_sat,first_tx,last_tx,lifetime_days\n";
    for (const auto& r : reports) {
        out += csv_field(r.service_id);
        out += ',';
        out += csv_field(r.name);
        out += ',';
        out += std::to_string(r.volume);
        out += ',';
        out += std::to_string(r.incoming);
        out += ',';
        out += std::to_string(r.outgoing);
        out += ',';
        out += format_iso8601(r.first_tx);
        out += ',';
        out += format_iso8601(r.last_tx);
        out += ',';
        out += std::to_string(r.lifetime_days);
        out += '\n';
    }
    return out;
}

std::string serialize_econ_line(const EconReport& r) {
    json j;
    j["service_id"] = r.service_id;
    j["name"] = r.name;
    j["volume"] = r.volume;
    j["incoming_sat"] = r.incoming;
    j["outgoing_sat"] = r.outgoing;
    j["first_tx"] = format_iso8601(r.first_tx);
    j["last_tx"] = format_iso8601(r.last_tx);
    j["lifetime_days"] = r.lifetime_days;
    j["active_years"] = r.active_years;
    j["retention_sat"] = balance_retention(r);
    j["pass_through"] = pass_through(r);
    return j.dump();
}

std::string cdf_csv(const std::vector<CdfPoint>& points) {
    std::string out = "value,fraction\n";
    for (const auto& p : points) {
        out += std::to_string(p.value);
        out += ',';
        out += format_double(p.fraction);
        out += '\n';
    }
    return out;
}

std::string yearly_csv(const std::vector<EconReport>& reports, int year_from, int year_to) {
    std::vector<double> fractions = yearly_activity(reports, year_from, year_to);
    std::string out = "year,fraction\n";
    for (size_t i = 0; i < fractions.size(); ++i) {
        out += std::to_string(year_from + static_cast<int>(i));
        out += ',';
        out += format_double(fractions[i]);
        out += '\n';
    }
    return out;
}

} // namespace onionlink
