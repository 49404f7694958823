#include "onionlink/synth.hpp"

#include "onionlink/errors.hpp"
#include "onionlink/time_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace onionlink {

// ---------------------------------------------------------------------------
// RNG helpers
// ---------------------------------------------------------------------------

uint64_t SynthRng::below(uint64_t n) {
    if (n == 0) throw InternalError("SynthRng::below(0)");
    return next() % n;
}

int64_t SynthRng::range(int64_t lo, int64_t hi) {
    if (lo > hi) throw InternalError("SynthRng::range: lo > hi");
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
}

std::string mint_address(SynthRng& rng, uint8_t version) {
    std::array<uint8_t, 20> payload{};
    uint64_t d0 = rng.next(), d1 = rng.next(), d2 = rng.next();
    for (int i = 0; i < 8; ++i) payload[static_cast<size_t>(i)] = uint8_t(d0 >> (8 * i));
    for (int i = 0; i < 8; ++i) payload[static_cast<size_t>(8 + i)] = uint8_t(d1 >> (8 * i));
    for (int i = 0; i < 4; ++i) payload[static_cast<size_t>(16 + i)] = uint8_t(d2 >> (8 * i));
    return base58check_encode(version, payload);
}

std::string corrupt_address(SynthRng& rng, const std::string& addr) {
    if (addr.size() < 2) throw InternalError("corrupt_address: address too short");
    std::string_view alphabet = base58_alphabet();
    for (;;) {
        // never touch the first character, so length and the 1/3 prefix survive
        size_t pos = 1 + rng.below(addr.size() - 1);
        char orig = addr[pos];
        char c;
        do {
            c = alphabet[rng.below(alphabet.size())];
        } while (c == orig);
        std::string mutated = addr;
        mutated[pos] = c;
        if (!validate_address(mutated).ok()) return mutated;
        // astronomically unlikely (a second valid encoding); draw again
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

// keeps timestamps well inside chrono's civil-calendar range
constexpr int64_t k_max_time = 32503680000; // 3000-01-01T00:00:00Z

uint64_t mixed_wallet_target(const GeneratorConfig& cfg) {
    return static_cast<uint64_t>(std::llround(cfg.mixing_rate * static_cast<double>(cfg.n_wallets)));
}

// identities whose wallets get routed through mix txs
uint64_t mixed_identity_count(const GeneratorConfig& cfg) {
    uint64_t target = mixed_wallet_target(cfg);
    if (cfg.mixing_rate <= 0.0 || target == 0) return 0;
    return std::clamp<uint64_t>(target, 2, cfg.n_user_identities);
}

uint64_t corrupted_identity_count(const GeneratorConfig& cfg) {
    auto n = static_cast<uint64_t>(
        std::llround(cfg.corruption_rate * static_cast<double>(cfg.n_user_identities)));
    return std::min(n, cfg.n_user_identities);
}

} // namespace

void validate_config(const GeneratorConfig& cfg) {
    auto fail = [](const std::string& msg) { throw InputError("infeasible config: " + msg); };
    if (cfg.n_wallets == 0) fail("n_wallets must be positive");
    if (cfg.n_user_identities == 0) fail("n_user_identities must be positive");
    if (cfg.n_services == 0) fail("n_services must be positive");
    if (cfg.n_payment_txs == 0) fail("n_payment_txs must be positive");
    if (cfg.addr_min == 0) fail("addresses_per_wallet.min must be positive");
    if (cfg.addr_min > cfg.addr_max) fail("addresses_per_wallet.min exceeds max");
    if (!(cfg.mixing_rate >= 0.0 && cfg.mixing_rate <= 1.0))
        fail("mixing_rate must be in [0,1]");
    if (!(cfg.corruption_rate >= 0.0 && cfg.corruption_rate <= 1.0))
        fail("corruption_rate must be in [0,1]");
    if (cfg.n_user_identities > cfg.n_wallets)
        fail("n_user_identities exceeds n_wallets");
    if (cfg.time_start < 0 || cfg.time_end > k_max_time || cfg.time_start >= cfg.time_end)
        fail("time_range must satisfy 0 <= start < end <= " + std::to_string(k_max_time));
    if (cfg.mixing_rate > 0.0 && mixed_wallet_target(cfg) > 0 && cfg.n_user_identities < 2)
        fail("mixing requires at least 2 user identities");
    // mixed and corrupted identities must not overlap: a mixed identity with
    // only corrupted partners would keep its merged closure uncontested,
    // making contamination unobservable
    if (mixed_identity_count(cfg) + corrupted_identity_count(cfg) > cfg.n_user_identities)
        fail("mixing and corruption together exceed the identity pool");
}

GeneratorConfig config_from_json(const json& j, const std::string& context) {
    if (!j.is_object()) throw InputError(context + ": config must be a JSON object");
    GeneratorConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "rng_seed" && k != "n_wallets" && k != "addresses_per_wallet" &&
            k != "n_user_identities" && k != "n_services" && k != "n_payment_txs" &&
            k != "mixing_rate" && k != "time_range" && k != "corruption_rate")
            throw InputError(context + ": unknown config field '" + k + "'");
    }
    auto get_u64 = [&](const char* k, uint64_t& out) {
        if (!j.contains(k)) return;
        if (!j.at(k).is_number_unsigned() && !j.at(k).is_number_integer())
            throw InputError(context + ": field '" + k + "': must be an integer");
        if (j.at(k).is_number_integer() && j.at(k).get<int64_t>() < 0)
            throw InputError(context + ": field '" + k + "': must be non-negative");
        out = j.at(k).get<uint64_t>();
    };
    auto get_rate = [&](const char* k, double& out) {
        if (!j.contains(k)) return;
        if (!j.at(k).is_number())
            throw InputError(context + ": field '" + k + "': must be a number");
        out = j.at(k).get<double>();
    };
    get_u64("rng_seed", cfg.rng_seed);
    get_u64("n_wallets", cfg.n_wallets);
    get_u64("n_user_identities", cfg.n_user_identities);
    get_u64("n_services", cfg.n_services);
    get_u64("n_payment_txs", cfg.n_payment_txs);
    get_rate("mixing_rate", cfg.mixing_rate);
    get_rate("corruption_rate", cfg.corruption_rate);
    if (j.contains("addresses_per_wallet")) {
        const json& ja = j.at("addresses_per_wallet");
        if (!ja.is_object())
            throw InputError(context + ": field 'addresses_per_wallet': must be an object");
        for (auto it = ja.begin(); it != ja.end(); ++it)
            if (it.key() != "min" && it.key() != "max")
                throw InputError(context + ": unknown config field 'addresses_per_wallet." +
                                 it.key() + "'");
        if (!ja.contains("min") || !ja.contains("max") ||
            !ja.at("min").is_number_unsigned() || !ja.at("max").is_number_unsigned())
            throw InputError(context +
                             ": field 'addresses_per_wallet': needs unsigned 'min' and 'max'");
        cfg.addr_min = ja.at("min").get<uint64_t>();
        cfg.addr_max = ja.at("max").get<uint64_t>();
    }
    if (j.contains("time_range")) {
        const json& jt = j.at("time_range");
        if (!jt.is_object())
            throw InputError(context + ": field 'time_range': must be an object");
        for (auto it = jt.begin(); it != jt.end(); ++it)
            if (it.key() != "start" && it.key() != "end")
                throw InputError(context + ": unknown config field 'time_range." + it.key() +
                                 "'");
        if (!jt.contains("start") || !jt.contains("end") ||
            !jt.at("start").is_number_integer() || !jt.at("end").is_number_integer())
            throw InputError(context + ": field 'time_range': needs integer 'start' and 'end'");
        cfg.time_start = jt.at("start").get<int64_t>();
        cfg.time_end = jt.at("end").get<int64_t>();
    }
    validate_config(cfg);
    return cfg;
}

json config_to_json(const GeneratorConfig& cfg) {
    json j;
    j["rng_seed"] = cfg.rng_seed;
    j["n_wallets"] = cfg.n_wallets;
    j["addresses_per_wallet"] = {{"min", cfg.addr_min}, {"max", cfg.addr_max}};
    j["n_user_identities"] = cfg.n_user_identities;
    j["n_services"] = cfg.n_services;
    j["n_payment_txs"] = cfg.n_payment_txs;
    j["mixing_rate"] = cfg.mixing_rate;
    j["time_range"] = {{"start", cfg.time_start}, {"end", cfg.time_end}};
    j["corruption_rate"] = cfg.corruption_rate;
    return j;
}

// ---------------------------------------------------------------------------
// Plan: every random draw happens here, in a fixed phase order. Timestamps
// and txids are assigned later at emission, once the total count is known.
//
// Draw order: P1 wallet sizes; P2 wallet addresses; P3 service addresses;
// P4 sink address; P5 coinbase values; P6 connect-tx values; P7 mix
// selection, grouping, and values; P8 payments; P9 (outflows, no draws);
// P10 per-identity doc counts and body variants; P11 corruption selection
// and per-doc mutations.
// ---------------------------------------------------------------------------

namespace {

struct Blueprint {
    enum class Kind : uint8_t { coinbase, connect, mix, payment, outflow };
    Kind kind = Kind::coinbase;
    uint32_t identity = UINT32_MAX; // payments: payer
    uint32_t service = UINT32_MAX;  // payments and outflows
    std::vector<std::pair<uint32_t, int64_t>> ins, outs; // minted-address index → sat
};

struct Plan {
    GeneratorConfig cfg;
    std::vector<std::string> minted;
    std::vector<std::pair<uint32_t, uint32_t>> wallet_span; // (first, count)
    std::vector<std::pair<uint32_t, uint32_t>> svc_span;
    uint32_t sink = UINT32_MAX;
    std::vector<Blueprint> txs;
    std::vector<TruthIdentity> identities;
    std::vector<Document> corpus;
    std::vector<std::vector<uint64_t>> mix_groups;
    std::vector<std::pair<std::string, std::string>> corrupted_addresses;
};

constexpr int64_t k_val_lo = 1000;
constexpr int64_t k_val_hi = 1000000000;

std::string zero_pad(const char* prefix, uint64_t n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*llu", prefix, width,
                  static_cast<unsigned long long>(n));
    return buf;
}

void fisher_yates(SynthRng& rng, std::vector<uint64_t>& v) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = rng.below(i);
        std::swap(v[i - 1], v[j]);
    }
}

Plan build_plan(const GeneratorConfig& cfg) {
    validate_config(cfg);
    Plan p;
    p.cfg = cfg;
    SynthRng rng(cfg.rng_seed);

    // P1: addresses per wallet
    std::vector<uint32_t> wallet_size(cfg.n_wallets);
    for (auto& k : wallet_size) {
        k = static_cast<uint32_t>(
            cfg.addr_min == cfg.addr_max
                ? cfg.addr_min
                : cfg.addr_min + rng.below(cfg.addr_max - cfg.addr_min + 1));
    }

    uint64_t mint_counter = 0;
    std::unordered_set<std::string> used;
    auto mint_unique = [&]() {
        for (;;) {
            uint8_t version = (mint_counter % 7 == 6) ? 0x05 : 0x00;
            ++mint_counter;
            std::string a = mint_address(rng, version);
            if (used.insert(a).second) return a;
        }
    };

    // P2: wallet addresses
    p.wallet_span.reserve(cfg.n_wallets);
    for (uint64_t w = 0; w < cfg.n_wallets; ++w) {
        p.wallet_span.emplace_back(static_cast<uint32_t>(p.minted.size()), wallet_size[w]);
        for (uint32_t k = 0; k < wallet_size[w]; ++k) p.minted.push_back(mint_unique());
    }
    // P3: service addresses (every third service gets a second one)
    p.svc_span.reserve(cfg.n_services);
    for (uint64_t s = 0; s < cfg.n_services; ++s) {
        uint32_t count = (s % 3 == 2) ? 2 : 1;
        p.svc_span.emplace_back(static_cast<uint32_t>(p.minted.size()), count);
        for (uint32_t k = 0; k < count; ++k) p.minted.push_back(mint_unique());
    }
    // P4: sink address for service outflows
    p.sink = static_cast<uint32_t>(p.minted.size());
    p.minted.push_back(mint_unique());

    auto wallet_addr = [&](uint64_t w, uint64_t k) {
        return p.wallet_span[w].first + static_cast<uint32_t>(k);
    };
    auto svc_addr = [&](uint64_t s, uint64_t k) {
        return p.svc_span[s].first + static_cast<uint32_t>(k);
    };

    // P5: one coinbase per wallet funding every address
    for (uint64_t w = 0; w < cfg.n_wallets; ++w) {
        Blueprint b;
        b.kind = Blueprint::Kind::coinbase;
        for (uint32_t k = 0; k < wallet_size[w]; ++k)
            b.outs.emplace_back(wallet_addr(w, k), rng.range(k_val_lo, k_val_hi));
        p.txs.push_back(std::move(b));
    }

    // P6: one co-spend per multi-address wallet joining all its addresses
    for (uint64_t w = 0; w < cfg.n_wallets; ++w) {
        if (wallet_size[w] < 2) continue;
        Blueprint b;
        b.kind = Blueprint::Kind::connect;
        int64_t total = 0;
        for (uint32_t k = 0; k < wallet_size[w]; ++k) {
            int64_t v = rng.range(k_val_lo, k_val_hi);
            total += v;
            b.ins.emplace_back(wallet_addr(w, k), v);
        }
        b.outs.emplace_back(wallet_addr(w, 0), total - total / 100);
        p.txs.push_back(std::move(b));
    }

    // P7: mix transactions over identity-owned wallets only, so that exactly
    // the mixed identities lose their closures during cleaning
    std::unordered_set<uint64_t> mixed_identity_set;
    uint64_t n_mixed = mixed_identity_count(cfg);
    if (n_mixed > 0) {
        std::vector<uint64_t> ids(cfg.n_user_identities);
        for (uint64_t i = 0; i < ids.size(); ++i) ids[i] = i;
        fisher_yates(rng, ids);
        ids.resize(n_mixed);
        mixed_identity_set.insert(ids.begin(), ids.end());
        size_t at = 0;
        while (at < ids.size()) {
            size_t rem = ids.size() - at;
            size_t g;
            if (rem >= 5)
                g = 2 + rng.below(2);
            else if (rem == 4)
                g = 2;
            else
                g = rem; // 2 or 3
            std::vector<uint64_t> group(ids.begin() + at, ids.begin() + at + g);
            std::sort(group.begin(), group.end());
            at += g;

            Blueprint b;
            b.kind = Blueprint::Kind::mix;
            int64_t total = 0;
            for (uint64_t w : group) {
                int64_t v = rng.range(k_val_lo, k_val_hi);
                total += v;
                b.ins.emplace_back(wallet_addr(w, rng.below(wallet_size[w])), v);
            }
            int64_t out_total = total - total / 100;
            int64_t share = out_total / static_cast<int64_t>(group.size());
            for (size_t i = 0; i < group.size(); ++i) {
                int64_t v = i + 1 == group.size()
                                ? out_total - share * static_cast<int64_t>(group.size() - 1)
                                : share;
                b.outs.emplace_back(wallet_addr(group[i], rng.below(wallet_size[group[i]])), v);
            }
            p.txs.push_back(std::move(b));
            p.mix_groups.push_back(std::move(group));
        }
    }

    // P8: payments — inputs from a single identity wallet, outputs to one
    // service address plus change, 1% fee
    std::vector<int64_t> svc_incoming(cfg.n_services, 0);
    for (uint64_t pay = 0; pay < cfg.n_payment_txs; ++pay) {
        uint64_t identity = pay % cfg.n_user_identities;
        uint64_t svc = rng.below(cfg.n_services);
        uint64_t k = wallet_size[identity];

        uint64_t n_in = 1 + rng.below(2);
        if (k < 2) n_in = 1;
        uint64_t idx0 = rng.below(k);
        uint64_t idx1 = idx0;
        if (n_in == 2)
            do { idx1 = rng.below(k); } while (idx1 == idx0);

        int64_t amt = rng.range(k_val_lo, k_val_hi);
        int64_t change = rng.range(k_val_lo, k_val_hi);
        int64_t total_out = amt + change;
        int64_t x = total_out * 100 / 99;
        while (x - x / 100 < total_out) ++x;
        change += (x - x / 100) - total_out;

        uint64_t change_idx = rng.below(k);
        uint64_t svc_count = p.svc_span[svc].second;
        uint64_t svc_idx = svc_count > 1 ? rng.below(svc_count) : 0;

        Blueprint b;
        b.kind = Blueprint::Kind::payment;
        b.identity = static_cast<uint32_t>(identity);
        b.service = static_cast<uint32_t>(svc);
        if (n_in == 1) {
            b.ins.emplace_back(wallet_addr(identity, idx0), x);
        } else {
            b.ins.emplace_back(wallet_addr(identity, idx0), x - x / 2);
            b.ins.emplace_back(wallet_addr(identity, idx1), x / 2);
        }
        b.outs.emplace_back(svc_addr(svc, svc_idx), amt);
        b.outs.emplace_back(wallet_addr(identity, change_idx), change);
        svc_incoming[svc] += amt;
        p.txs.push_back(std::move(b));
    }

    // P9: pass-through outflows (no draws): each paid service, except every
    // fourth, forwards its coins minus a 0.5% residue
    for (uint64_t s = 0; s < cfg.n_services; ++s) {
        if (svc_incoming[s] == 0 || s % 4 == 3) continue;
        int64_t x = svc_incoming[s] - svc_incoming[s] / 200;
        Blueprint b;
        b.kind = Blueprint::Kind::outflow;
        b.service = static_cast<uint32_t>(s);
        b.ins.emplace_back(svc_addr(s, 0), x);
        b.outs.emplace_back(p.sink, x - x / 100);
        p.txs.push_back(std::move(b));
    }

    // Identities: identity i owns wallet i; seed address is the wallet's first
    for (uint64_t i = 0; i < cfg.n_user_identities; ++i) {
        TruthIdentity ident;
        ident.id = zero_pad("u", i, 6);
        ident.network = (i % 2 == 0) ? "twitter" : "forum";
        ident.handle = (i % 2 == 0 ? "@user" : "user") + std::to_string(i);
        ident.wallet = i;
        ident.seed_address = p.minted[wallet_addr(i, 0)];
        p.identities.push_back(std::move(ident));
    }

    // P10: doc counts and filler variants
    static constexpr const char* k_filler[4][2] = {
        {"donations welcome at ", " thanks"},
        {"my wallet: ", ""},
        {"send btc to ", " asap"},
        {"tip jar ", " for my work"},
    };
    std::vector<uint64_t> doc_count(cfg.n_user_identities);
    std::vector<std::vector<uint64_t>> doc_variant(cfg.n_user_identities);
    for (uint64_t i = 0; i < cfg.n_user_identities; ++i) {
        doc_count[i] = 1 + rng.below(5);
        doc_variant[i].reserve(doc_count[i]);
        for (uint64_t d = 0; d < doc_count[i]; ++d)
            doc_variant[i].push_back(rng.below(4));
    }

    // P11: corruption — selected identities get every mention mutated; drawn
    // from the non-mixed pool (see validate_config)
    uint64_t n_corrupt = corrupted_identity_count(cfg);
    std::unordered_set<uint64_t> corrupted_ids;
    if (n_corrupt > 0) {
        std::vector<uint64_t> pool;
        pool.reserve(cfg.n_user_identities);
        for (uint64_t i = 0; i < cfg.n_user_identities; ++i)
            if (!mixed_identity_set.contains(i)) pool.push_back(i);
        if (pool.size() < n_corrupt)
            throw InternalError("corruption pool smaller than target");
        fisher_yates(rng, pool);
        corrupted_ids.insert(pool.begin(), pool.begin() + static_cast<long>(n_corrupt));
    }

    uint64_t doc_counter = 0;
    for (uint64_t i = 0; i < cfg.n_user_identities; ++i) {
        TruthIdentity& ident = p.identities[i];
        ident.corrupted = corrupted_ids.contains(i);
        for (uint64_t d = 0; d < doc_count[i]; ++d) {
            std::string mention = ident.seed_address;
            if (ident.corrupted) {
                mention = corrupt_address(rng, ident.seed_address);
                p.corrupted_addresses.emplace_back(ident.seed_address, mention);
            }
            const auto& filler = k_filler[doc_variant[i][d]];
            Document doc;
            doc.doc_id = zero_pad("d", doc_counter++, 8);
            doc.source = ident.network == "twitter" ? DocSource::tweet
                                                    : DocSource::forum_profile;
            Identity docid;
            docid.id = ident.id;
            docid.network = ident.network;
            docid.handle = ident.handle;
            doc.identity = std::move(docid);
            doc.body = std::string(filler[0]) + mention + filler[1];
            p.corpus.push_back(std::move(doc));
        }
    }
    return p;
}

int64_t tx_time(const GeneratorConfig& cfg, uint64_t i, uint64_t total) {
    int64_t span = cfg.time_end - cfg.time_start - 1;
    if (total <= 1 || span <= 0) return cfg.time_start;
    return cfg.time_start +
           static_cast<int64_t>(static_cast<__int128>(i) * span /
                                static_cast<__int128>(total - 1));
}

std::string txid_at(uint64_t seed, uint64_t counter) {
    std::array<uint8_t, 16> buf{};
    for (int i = 0; i < 8; ++i) buf[static_cast<size_t>(i)] = uint8_t(seed >> (8 * i));
    for (int i = 0; i < 8; ++i)
        buf[static_cast<size_t>(8 + i)] = uint8_t(counter >> (8 * i));
    auto digest = sha256(buf);
    TxId id;
    std::memcpy(id.data(), digest.data(), id.size());
    return txid_to_hex(id);
}

Address make_address(const std::string& raw) {
    Address a;
    a.raw = raw;
    a.version = raw.front() == '1' ? AddressVersion::p2pkh : AddressVersion::p2sh;
    return a;
}

GroundTruth emit(const Plan& p, const std::function<void(const TxRecord&)>& sink) {
    const GeneratorConfig& cfg = p.cfg;
    GroundTruth t;
    t.tx_count = p.txs.size();

    t.wallets.reserve(p.wallet_span.size());
    for (const auto& [first, count] : p.wallet_span) {
        std::vector<std::string> addrs;
        addrs.reserve(count);
        for (uint32_t k = 0; k < count; ++k) addrs.push_back(p.minted[first + k]);
        t.wallets.push_back(std::move(addrs));
    }
    t.identities = p.identities;
    t.mix_groups = p.mix_groups;
    for (const auto& g : p.mix_groups)
        t.mixed_wallets.insert(t.mixed_wallets.end(), g.begin(), g.end());
    std::sort(t.mixed_wallets.begin(), t.mixed_wallets.end());
    t.corrupted_addresses = p.corrupted_addresses;

    t.services.resize(cfg.n_services);
    std::vector<uint32_t> svc_of_addr(p.minted.size(), UINT32_MAX);
    for (uint64_t s = 0; s < cfg.n_services; ++s) {
        TruthService& svc = t.services[s];
        svc.service_id = zero_pad("s", s, 5);
        svc.name = "service-" + std::to_string(s);
        auto [first, count] = p.svc_span[s];
        for (uint32_t k = 0; k < count; ++k) {
            svc.addresses.push_back(p.minted[first + k]);
            svc_of_addr[first + k] = static_cast<uint32_t>(s);
        }
    }

    std::vector<AddressFlow> flows(p.minted.size());
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> planted;
    std::vector<std::set<int>> svc_years(cfg.n_services);

    for (uint64_t i = 0; i < p.txs.size(); ++i) {
        const Blueprint& b = p.txs[i];
        TxRecord tx;
        tx.txid = txid_at(cfg.rng_seed, i);
        tx.time = tx_time(cfg, i, p.txs.size());
        tx.inputs.reserve(b.ins.size());
        tx.outputs.reserve(b.outs.size());

        std::set<uint32_t> touched; // services in this tx, counted once
        for (const auto& [idx, sat] : b.ins) {
            tx.inputs.push_back({make_address(p.minted[idx]), sat});
            flows[idx].sent += sat;
            if (svc_of_addr[idx] != UINT32_MAX) touched.insert(svc_of_addr[idx]);
        }
        for (const auto& [idx, sat] : b.outs) {
            tx.outputs.push_back({make_address(p.minted[idx]), sat});
            flows[idx].received += sat;
            if (svc_of_addr[idx] != UINT32_MAX) touched.insert(svc_of_addr[idx]);
        }
        for (uint32_t s : touched) {
            TruthService& svc = t.services[s];
            if (svc.volume == 0) svc.first_tx = tx.time;
            svc.last_tx = tx.time; // emission order is time-ascending
            ++svc.volume;
            svc_years[s].insert(utc_year(tx.time));
        }
        if (b.kind == Blueprint::Kind::payment)
            planted[{p.identities[b.identity].id, t.services[b.service].service_id}]
                .push_back(tx.txid);
        sink(tx);
    }

    for (uint64_t s = 0; s < cfg.n_services; ++s) {
        TruthService& svc = t.services[s];
        auto [first, count] = p.svc_span[s];
        for (uint32_t k = 0; k < count; ++k) {
            svc.incoming += flows[first + k].received;
            svc.outgoing += flows[first + k].sent;
        }
        svc.active_years.assign(svc_years[s].begin(), svc_years[s].end());
    }
    for (auto& [key, txids] : planted)
        t.planted_links.push_back({key.first, key.second, std::move(txids)});
    for (size_t i = 0; i < p.minted.size(); ++i)
        t.address_flows.emplace(p.minted[i], flows[i]);
    return t;
}

std::vector<ServiceRecord> service_records(const GroundTruth& t) {
    std::vector<ServiceRecord> out;
    out.reserve(t.services.size());
    for (const auto& s : t.services) {
        ServiceRecord r;
        r.service_id = s.service_id;
        r.name = s.name;
        for (const auto& a : s.addresses) r.addresses.push_back(make_address(a));
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

SynthData generate(const GeneratorConfig& cfg) {
    Plan plan = build_plan(cfg);
    SynthData data;
    data.txs.reserve(plan.txs.size());
    data.truth = emit(plan, [&](const TxRecord& tx) { data.txs.push_back(tx); });
    data.corpus = std::move(plan.corpus);
    data.services = service_records(data.truth);
    return data;
}

namespace {

void write_sidecar_files(const std::vector<Document>& corpus, const GroundTruth& truth,
                         const std::string& dir) {
    std::string corpus_out;
    for (const auto& d : corpus) {
        corpus_out += serialize_document_line(d);
        corpus_out += '\n';
    }
    write_text_file(dir + "/corpus.jsonl", corpus_out);

    std::string svc_out;
    for (const auto& s : service_records(truth)) {
        svc_out += serialize_service_line(s);
        svc_out += '\n';
    }
    write_text_file(dir + "/services.jsonl", svc_out);

    write_text_file(dir + "/truth.json", truth_to_json(truth).dump() + "\n");
}

} // namespace

void generate_bundle(const GeneratorConfig& cfg, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());

    Plan plan = build_plan(cfg);
    std::string tmp = dir + "/ledger.txj.tmp";
    GroundTruth truth;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot open file for writing: " + tmp);
        std::string buf;
        truth = emit(plan, [&](const TxRecord& tx) {
            buf += serialize_txj_line(tx);
            buf += '\n';
            if (buf.size() >= 1 << 20) {
                out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
                buf.clear();
            }
        });
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw InputError("write error on file: " + tmp);
    }
    std::filesystem::rename(tmp, dir + "/ledger.txj", ec);
    if (ec) throw InputError("cannot finalize " + dir + "/ledger.txj: " + ec.message());

    write_sidecar_files(plan.corpus, truth, dir);
}

void write_bundle(const SynthData& data, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());

    std::string ledger;
    for (const auto& tx : data.txs) {
        ledger += serialize_txj_line(tx);
        ledger += '\n';
    }
    write_text_file(dir + "/ledger.txj", ledger);
    write_sidecar_files(data.corpus, data.truth, dir);
}

// ---------------------------------------------------------------------------
// Truth serialization
// ---------------------------------------------------------------------------

json truth_to_json(const GroundTruth& t) {
    json j;
    j["tx_count"] = t.tx_count;
    j["wallets"] = t.wallets;
    json ids = json::array();
    for (const auto& i : t.identities) {
        json ji;
        ji["id"] = i.id;
        ji["network"] = i.network;
        ji["handle"] = i.handle;
        ji["wallet"] = i.wallet;
        ji["seed_address"] = i.seed_address;
        ji["corrupted"] = i.corrupted;
        ids.push_back(std::move(ji));
    }
    j["identities"] = std::move(ids);
    json svcs = json::array();
    for (const auto& s : t.services) {
        json js;
        js["service_id"] = s.service_id;
        js["name"] = s.name;
        js["addresses"] = s.addresses;
        js["volume"] = s.volume;
        js["incoming"] = s.incoming;
        js["outgoing"] = s.outgoing;
        js["first_tx"] = s.volume ? json(s.first_tx) : json(nullptr);
        js["last_tx"] = s.volume ? json(s.last_tx) : json(nullptr);
        js["active_years"] = s.active_years;
        svcs.push_back(std::move(js));
    }
    j["services"] = std::move(svcs);
    json links = json::array();
    for (const auto& l : t.planted_links) {
        json jl;
        jl["identity"] = l.identity;
        jl["service_id"] = l.service_id;
        jl["txids"] = l.txids;
        links.push_back(std::move(jl));
    }
    j["planted_links"] = std::move(links);
    j["mixed_wallets"] = t.mixed_wallets;
    j["mix_groups"] = t.mix_groups;
    json corr = json::array();
    for (const auto& [orig, mut] : t.corrupted_addresses)
        corr.push_back({{"original", orig}, {"mutated", mut}});
    j["corrupted_addresses"] = std::move(corr);
    // an array, not an object keyed by address: ordered_json objects pay a
    // linear key scan per insert, which is quadratic at chain scale
    json flows = json::array();
    for (const auto& [addr, f] : t.address_flows)
        flows.push_back({{"address", addr}, {"received", f.received}, {"sent", f.sent}});
    j["address_flows"] = std::move(flows);
    return j;
}

GroundTruth truth_from_json(const json& j, const std::string& context) {
    if (!j.is_object()) throw InputError(context + ": truth must be a JSON object");
    GroundTruth t;
    try {
        t.tx_count = j.at("tx_count").get<uint64_t>();
        t.wallets = j.at("wallets").get<std::vector<std::vector<std::string>>>();
        for (const auto& ji : j.at("identities")) {
            TruthIdentity i;
            i.id = ji.at("id").get<std::string>();
            i.network = ji.at("network").get<std::string>();
            i.handle = ji.at("handle").get<std::string>();
            i.wallet = ji.at("wallet").get<uint64_t>();
            i.seed_address = ji.at("seed_address").get<std::string>();
            i.corrupted = ji.at("corrupted").get<bool>();
            t.identities.push_back(std::move(i));
        }
        for (const auto& js : j.at("services")) {
            TruthService s;
            s.service_id = js.at("service_id").get<std::string>();
            s.name = js.at("name").get<std::string>();
            s.addresses = js.at("addresses").get<std::vector<std::string>>();
            s.volume = js.at("volume").get<uint64_t>();
            s.incoming = js.at("incoming").get<int64_t>();
            s.outgoing = js.at("outgoing").get<int64_t>();
            if (!js.at("first_tx").is_null()) s.first_tx = js.at("first_tx").get<int64_t>();
            if (!js.at("last_tx").is_null()) s.last_tx = js.at("last_tx").get<int64_t>();
            s.active_years = js.at("active_years").get<std::vector<int>>();
            t.services.push_back(std::move(s));
        }
        for (const auto& jl : j.at("planted_links")) {
            PlantedLink l;
            l.identity = jl.at("identity").get<std::string>();
            l.service_id = jl.at("service_id").get<std::string>();
            l.txids = jl.at("txids").get<std::vector<std::string>>();
            t.planted_links.push_back(std::move(l));
        }
        t.mixed_wallets = j.at("mixed_wallets").get<std::vector<uint64_t>>();
        t.mix_groups = j.at("mix_groups").get<std::vector<std::vector<uint64_t>>>();
        for (const auto& jc : j.at("corrupted_addresses"))
            t.corrupted_addresses.emplace_back(jc.at("original").get<std::string>(),
                                               jc.at("mutated").get<std::string>());
        for (const auto& jf : j.at("address_flows")) {
            AddressFlow f;
            f.received = jf.at("received").get<int64_t>();
            f.sent = jf.at("sent").get<int64_t>();
            t.address_flows.emplace(jf.at("address").get<std::string>(), f);
        }
    } catch (const json::exception& e) {
        throw InputError(context + ": malformed truth file: " + e.what());
    }
    return t;
}

GroundTruth load_truth(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw InputError(path + ": malformed JSON");
    return truth_from_json(j, path);
}

} // namespace onionlink
