#pragma once

#include "onionlink/chain.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace onionlink {

// Disjoint-set forest with path compression and union by size.
class DisjointSet {
public:
    explicit DisjointSet(size_t n);
    uint32_t find(uint32_t x);
    // true if a and b were in different sets
    bool unite(uint32_t a, uint32_t b);
    uint32_t set_size(uint32_t x);

private:
    std::vector<uint32_t> parent_;
    std::vector<uint32_t> size_;
};

// A set of addresses attributed to one owner. closure_id is the
// lexicographically smallest member, which makes ids order-independent.
struct Closure {
    std::string closure_id;
    std::optional<std::string> identity;
    std::vector<std::string> addresses; // sorted ascending
    std::vector<std::string> seeds;     // sorted ascending, subset of addresses
    bool cleaned = false;

    bool operator==(const Closure&) const = default;
};

struct SeedAssignment {
    std::string address;
    std::string identity;
};

// Connected components of the co-input graph: two addresses are joined when
// they appear together in one transaction's inputs. Addresses that never
// appear as inputs are not materialized; they form singletons on demand.
class ClosurePartition {
public:
    static ClosurePartition build(const ChainIndex& ix);

    size_t component_count() const { return components_.size(); }
    // members (address ids) of component c, ascending
    const std::vector<uint32_t>& component(size_t c) const { return components_[c]; }
    // component index for an address id; nullopt if never input-appearing
    std::optional<uint32_t> component_of(uint32_t addr_id) const;

    // Sorted member texts of the component containing seed; {seed} when the
    // seed never co-spent (or is unknown to the index).
    std::vector<std::string> members_of(const ChainIndex& ix, std::string_view seed) const;

private:
    std::vector<uint32_t> comp_of_;               // addr id -> component, UINT32_MAX if none
    std::vector<std::vector<uint32_t>> components_;
};

// Single-seed closure; identity left empty.
Closure closure_of(const ChainIndex& ix, const ClosurePartition& p, std::string_view seed);

// One Closure per (identity, component) pair, sorted by (closure_id, identity).
std::vector<Closure> assign_closures(const ChainIndex& ix, const ClosurePartition& p,
                                     const std::vector<SeedAssignment>& seeds);

// Removes every closure that shares at least one address with a closure of a
// different identity; survivors are marked cleaned. Records with equal
// (closure_id, identity) are merged first. Throws InputError on a missing
// identity.
std::vector<Closure> clean_closures(std::vector<Closure> closures);

struct ClosureStats {
    // size -> (count before cleaning, count after cleaning)
    std::map<uint64_t, std::pair<uint64_t, uint64_t>> size_hist;
    uint64_t count_before = 0;
    uint64_t count_after = 0;
    // lower median and nearest-rank 90th percentile; zero when empty
    uint64_t median_before = 0;
    uint64_t median_after = 0;
    uint64_t p90_before = 0;
    uint64_t p90_after = 0;
};

ClosureStats closure_stats(const std::vector<Closure>& before,
                           const std::vector<Closure>& after);

// Wire formats: one JSON object per closure line; stats as CSV
// `size,count_before,count_after`.
std::string serialize_closure_line(const Closure& c);
Closure parse_closure_line(std::string_view line, const std::string& context, size_t line_no);
std::vector<Closure> parse_closures_file(const std::string& path);
std::string stats_csv(const ClosureStats& stats);

} // namespace onionlink
