#pragma once

#include "onionlink/chain.hpp"
#include "onionlink/extract.hpp"
#include "onionlink/jsonl.hpp"
#include "onionlink/link.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace onionlink {

struct GeneratorConfig {
    uint64_t rng_seed = 1;
    uint64_t n_wallets = 10;
    uint64_t addr_min = 1; // addresses per wallet, uniform in [addr_min, addr_max]
    uint64_t addr_max = 3;
    uint64_t n_user_identities = 5;
    uint64_t n_services = 2;
    uint64_t n_payment_txs = 20;
    double mixing_rate = 0.0;    // fraction of wallets routed through a mix tx
    int64_t time_start = 1356998400; // 2013-01-01T00:00:00Z
    int64_t time_end = 1498867200;   // 2017-07-01T00:00:00Z
    double corruption_rate = 0.0; // fraction of identities with mutated mentions

    bool operator==(const GeneratorConfig&) const = default;
};

// Throws InputError on an invalid or infeasible config.
void validate_config(const GeneratorConfig& cfg);

// JSON round trip; field names follow the config file format (see README).
GeneratorConfig config_from_json(const json& j, const std::string& context);
json config_to_json(const GeneratorConfig& cfg);

// All generator randomness comes from one mt19937_64 stream consumed through
// these helpers, so outputs are byte-stable across platforms and releases.
class SynthRng {
public:
    explicit SynthRng(uint64_t seed) : gen_(seed) {}
    uint64_t next() { return gen_(); }
    // uniform-ish [0, n) by modulo; the tiny bias is irrelevant here and the
    // result, unlike std::uniform_int_distribution, is implementation-free
    uint64_t below(uint64_t n);
    int64_t range(int64_t lo, int64_t hi); // inclusive bounds

private:
    std::mt19937_64 gen_;
};

// Random checksum-valid address: 3 draws give the 20-byte payload.
std::string mint_address(SynthRng& rng, uint8_t version);
// Mutates one non-leading character until validation fails; never returns a
// valid address.
std::string corrupt_address(SynthRng& rng, const std::string& addr);

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

struct AddressFlow {
    int64_t received = 0;
    int64_t sent = 0;

    bool operator==(const AddressFlow&) const = default;
};

struct TruthIdentity {
    std::string id, network, handle;
    uint64_t wallet = 0;
    std::string seed_address;
    bool corrupted = false;

    bool operator==(const TruthIdentity&) const = default;
};

struct TruthService {
    std::string service_id, name;
    std::vector<std::string> addresses;
    uint64_t volume = 0;
    int64_t incoming = 0, outgoing = 0;
    int64_t first_tx = 0, last_tx = 0; // meaningful only when volume > 0
    std::vector<int> active_years;

    bool operator==(const TruthService&) const = default;
};

struct PlantedLink {
    std::string identity, service_id;
    std::vector<std::string> txids; // emission (= time) order

    bool operator==(const PlantedLink&) const = default;
};

struct GroundTruth {
    uint64_t tx_count = 0;
    std::vector<std::vector<std::string>> wallets;
    std::vector<TruthIdentity> identities;
    std::vector<TruthService> services;
    std::vector<PlantedLink> planted_links; // sorted by (identity, service_id)
    std::vector<uint64_t> mixed_wallets;    // sorted
    std::vector<std::vector<uint64_t>> mix_groups;
    std::vector<std::pair<std::string, std::string>> corrupted_addresses;
    std::map<std::string, AddressFlow> address_flows;
};

struct SynthData {
    std::vector<TxRecord> txs; // emission order (time ascending)
    std::vector<Document> corpus;
    std::vector<ServiceRecord> services;
    GroundTruth truth;
};

// In-memory generation; same seed gives identical data.
SynthData generate(const GeneratorConfig& cfg);

// Writes ledger.txj (streamed), corpus.jsonl, services.jsonl, truth.json into
// dir. Byte-identical to write_bundle(generate(cfg), dir).
void generate_bundle(const GeneratorConfig& cfg, const std::string& dir);
void write_bundle(const SynthData& data, const std::string& dir);

json truth_to_json(const GroundTruth& t);
GroundTruth truth_from_json(const json& j, const std::string& context);
GroundTruth load_truth(const std::string& path);

} // namespace onionlink
