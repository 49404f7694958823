#include "onionlink/closure.hpp"

#include "onionlink/errors.hpp"
#include "onionlink/jsonl.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace onionlink {

// ---------------------------------------------------------------------------
// DisjointSet
// ---------------------------------------------------------------------------

DisjointSet::DisjointSet(size_t n)
    : parent_(n), size_(n, 1) {
    for (size_t i = 0; i < n; ++i) parent_[i] = static_cast<uint32_t>(i);
}

uint32_t DisjointSet::find(uint32_t x) {
    uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) { // path compression
        uint32_t next = parent_[x];
        parent_[x] = root;
        x = next;
    }
    return root;
}

bool DisjointSet::unite(uint32_t a, uint32_t b) {
    uint32_t ra = find(a), rb = find(b);
    if (ra == rb) return false;
    if (size_[ra] < size_[rb]) std::swap(ra, rb);
    parent_[rb] = ra;
    size_[ra] += size_[rb];
    return true;
}

uint32_t DisjointSet::set_size(uint32_t x) { return size_[find(x)]; }

// ---------------------------------------------------------------------------
// ClosurePartition
// ---------------------------------------------------------------------------

ClosurePartition ClosurePartition::build(const ChainIndex& ix) {
    const size_t n = ix.address_count();
    DisjointSet dsu(n);
    std::vector<bool> is_input(n, false);

    for (size_t t = 0; t < ix.tx_count(); ++t) {
        const StoredTx& tx = ix.tx_at(t);
        if (tx.ins.empty()) continue;
        uint32_t first = tx.ins.front().first;
        is_input[first] = true;
        for (size_t k = 1; k < tx.ins.size(); ++k) {
            uint32_t a = tx.ins[k].first;
            is_input[a] = true;
            dsu.unite(first, a);
        }
    }

    ClosurePartition p;
    p.comp_of_.assign(n, UINT32_MAX);
    std::vector<uint32_t> comp_of_root(n, UINT32_MAX);
    for (uint32_t id = 0; id < n; ++id) {
        if (!is_input[id]) continue;
        uint32_t root = dsu.find(id);
        uint32_t c = comp_of_root[root];
        if (c == UINT32_MAX) {
            c = static_cast<uint32_t>(p.components_.size());
            comp_of_root[root] = c;
            p.components_.emplace_back();
        }
        p.comp_of_[id] = c;
        p.components_[c].push_back(id); // ids ascend, so members stay sorted
    }
    return p;
}

std::optional<uint32_t> ClosurePartition::component_of(uint32_t addr_id) const {
    if (addr_id >= comp_of_.size() || comp_of_[addr_id] == UINT32_MAX)
        return std::nullopt;
    return comp_of_[addr_id];
}

std::vector<std::string> ClosurePartition::members_of(const ChainIndex& ix,
                                                      std::string_view seed) const {
    auto id = ix.address_id(seed);
    if (id) {
        auto c = component_of(*id);
        if (c) {
            std::vector<std::string> out;
            out.reserve(components_[*c].size());
            for (uint32_t m : components_[*c]) out.push_back(ix.address_text(m));
            std::sort(out.begin(), out.end());
            return out;
        }
    }
    return {std::string(seed)};
}

Closure closure_of(const ChainIndex& ix, const ClosurePartition& p, std::string_view seed) {
    Closure c;
    c.addresses = p.members_of(ix, seed);
    c.closure_id = c.addresses.front(); // sorted, so front is the lex minimum
    c.seeds = {std::string(seed)};
    return c;
}

// ---------------------------------------------------------------------------
// Seed assignment and cleaning
// ---------------------------------------------------------------------------

std::vector<Closure> assign_closures(const ChainIndex& ix, const ClosurePartition& p,
                                     const std::vector<SeedAssignment>& seeds) {
    // Group seeds by (component key, identity). Singleton seeds use the
    // address itself as key, prefixed to avoid clashing with component ids.
    struct Group {
        std::optional<uint32_t> component;
        std::string singleton_addr;
        std::vector<std::string> seed_addrs;
    };
    std::map<std::pair<std::string, std::string>, Group> groups; // (key, identity)

    for (const auto& s : seeds) {
        std::optional<uint32_t> comp;
        if (auto id = ix.address_id(s.address)) comp = p.component_of(*id);
        std::string key = comp ? "c:" + std::to_string(*comp) : "a:" + s.address;
        Group& g = groups[{key, s.identity}];
        g.component = comp;
        if (!comp) g.singleton_addr = s.address;
        g.seed_addrs.push_back(s.address);
    }

    std::vector<Closure> out;
    out.reserve(groups.size());
    for (auto& [key, g] : groups) {
        Closure c;
        c.identity = key.second;
        if (g.component) {
            const auto& members = p.component(*g.component);
            c.addresses.reserve(members.size());
            for (uint32_t m : members) c.addresses.push_back(ix.address_text(m));
            std::sort(c.addresses.begin(), c.addresses.end());
        } else {
            c.addresses = {g.singleton_addr};
        }
        c.closure_id = c.addresses.front();
        std::sort(g.seed_addrs.begin(), g.seed_addrs.end());
        g.seed_addrs.erase(std::unique(g.seed_addrs.begin(), g.seed_addrs.end()),
                           g.seed_addrs.end());
        c.seeds = std::move(g.seed_addrs);
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const Closure& a, const Closure& b) {
        if (a.closure_id != b.closure_id) return a.closure_id < b.closure_id;
        return a.identity < b.identity;
    });
    return out;
}

std::vector<Closure> clean_closures(std::vector<Closure> closures) {
    for (const auto& c : closures)
        if (!c.identity)
            throw InputError("clean_closures: closure '" + c.closure_id +
                             "' carries no identity");

    // Merge records with equal (closure_id, identity).
    std::map<std::pair<std::string, std::string>, Closure> merged;
    for (auto& c : closures) {
        auto key = std::make_pair(c.closure_id, *c.identity);
        auto it = merged.find(key);
        if (it == merged.end()) {
            merged.emplace(key, std::move(c));
        } else {
            Closure& m = it->second;
            m.addresses.insert(m.addresses.end(), c.addresses.begin(), c.addresses.end());
            std::sort(m.addresses.begin(), m.addresses.end());
            m.addresses.erase(std::unique(m.addresses.begin(), m.addresses.end()),
                              m.addresses.end());
            m.seeds.insert(m.seeds.end(), c.seeds.begin(), c.seeds.end());
            std::sort(m.seeds.begin(), m.seeds.end());
            m.seeds.erase(std::unique(m.seeds.begin(), m.seeds.end()), m.seeds.end());
        }
    }

    // An address shared by two different identities condemns every closure
    // containing it.
    std::unordered_map<std::string, std::string> first_identity;
    std::unordered_set<std::string> contested_addrs;
    for (const auto& [key, c] : merged) {
        for (const auto& a : c.addresses) {
            auto [it, inserted] = first_identity.try_emplace(a, *c.identity);
            if (!inserted && it->second != *c.identity) contested_addrs.insert(a);
        }
    }

    std::vector<Closure> out;
    for (auto& [key, c] : merged) {
        bool condemned = std::any_of(c.addresses.begin(), c.addresses.end(),
                                     [&](const std::string& a) {
                                         return contested_addrs.contains(a);
                                     });
        if (condemned) continue;
        c.cleaned = true;
        out.push_back(std::move(c));
    }
    // map order is already (closure_id, identity) ascending
    return out;
}

// ---------------------------------------------------------------------------
// Stats
// ---------------------------------------------------------------------------

namespace {

uint64_t lower_median(std::vector<uint64_t>& sizes) {
    if (sizes.empty()) return 0;
    std::sort(sizes.begin(), sizes.end());
    return sizes[(sizes.size() - 1) / 2];
}

uint64_t nearest_rank_p90(std::vector<uint64_t>& sizes) {
    if (sizes.empty()) return 0;
    std::sort(sizes.begin(), sizes.end());
    size_t rank = (sizes.size() * 9 + 9) / 10; // ceil(0.9 n)
    return sizes[rank - 1];
}

} // namespace

ClosureStats closure_stats(const std::vector<Closure>& before,
                           const std::vector<Closure>& after) {
    ClosureStats st;
    std::vector<uint64_t> sizes_before, sizes_after;
    sizes_before.reserve(before.size());
    for (const auto& c : before) {
        uint64_t size = c.addresses.size();
        sizes_before.push_back(size);
        ++st.size_hist[size].first;
    }
    sizes_after.reserve(after.size());
    for (const auto& c : after) {
        uint64_t size = c.addresses.size();
        sizes_after.push_back(size);
        ++st.size_hist[size].second;
    }
    st.count_before = before.size();
    st.count_after = after.size();
    st.median_before = lower_median(sizes_before);
    st.median_after = lower_median(sizes_after);
    st.p90_before = nearest_rank_p90(sizes_before);
    st.p90_after = nearest_rank_p90(sizes_after);
    return st;
}

// ---------------------------------------------------------------------------
// Wire formats
// ---------------------------------------------------------------------------

std::string serialize_closure_line(const Closure& c) {
    json j;
    j["closure_id"] = c.closure_id;
    j["identity"] = c.identity ? json(*c.identity) : json(nullptr);
    j["addresses"] = c.addresses;
    j["seeds"] = c.seeds;
    j["cleaned"] = c.cleaned;
    return j.dump();
}

Closure parse_closure_line(std::string_view line, const std::string& context,
                           size_t line_no) {
    const std::string where = context + ":" + std::to_string(line_no);
    json j = parse_json_line(line, context, line_no);
    if (!j.is_object()) throw InputError(where + ": record must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "closure_id" && k != "identity" && k != "addresses" && k != "seeds" &&
            k != "cleaned")
            throw InputError(where + ": unknown field '" + k + "'");
    }
    for (const char* k : {"closure_id", "identity", "addresses", "seeds", "cleaned"})
        if (!j.contains(k))
            throw InputError(where + ": missing field '" + std::string(k) + "'");

    Closure c;
    if (!j["closure_id"].is_string())
        throw InputError(where + ": field 'closure_id': must be a string");
    c.closure_id = j["closure_id"].get<std::string>();
    if (j["identity"].is_string())
        c.identity = j["identity"].get<std::string>();
    else if (!j["identity"].is_null())
        throw InputError(where + ": field 'identity': must be a string or null");
    auto read_list = [&](const char* k, std::vector<std::string>& out) {
        if (!j[k].is_array())
            throw InputError(where + ": field '" + std::string(k) + "': must be an array");
        for (const auto& e : j[k]) {
            if (!e.is_string())
                throw InputError(where + ": field '" + std::string(k) +
                                 "': must contain only strings");
            out.push_back(e.get<std::string>());
        }
    };
    read_list("addresses", c.addresses);
    read_list("seeds", c.seeds);
    if (!j["cleaned"].is_boolean())
        throw InputError(where + ": field 'cleaned': must be a boolean");
    c.cleaned = j["cleaned"].get<bool>();

    if (c.addresses.empty())
        throw InputError(where + ": field 'addresses': must be non-empty");
    std::sort(c.addresses.begin(), c.addresses.end());
    std::sort(c.seeds.begin(), c.seeds.end());
    for (const auto& s : c.seeds)
        if (!std::binary_search(c.addresses.begin(), c.addresses.end(), s))
            throw InputError(where + ": seed '" + s + "' not in addresses");
    return c;
}

std::vector<Closure> parse_closures_file(const std::string& path) {
    std::vector<Closure> out;
    for_each_line(path, [&](size_t line_no, std::string_view line) {
        out.push_back(parse_closure_line(line, path, line_no));
    });
    return out;
}

std::string stats_csv(const ClosureStats& stats) {
    std::string out = "size,count_before,count_after\n";
    for (const auto& [size, counts] : stats.size_hist) {
        out += std::to_string(size);
        out += ',';
        out += std::to_string(counts.first);
        out += ',';
        out += std::to_string(counts.second);
        out += '\n';
    }
    return out;
}

} // namespace onionlink
