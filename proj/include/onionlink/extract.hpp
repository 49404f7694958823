#pragma once

#include "onionlink/chain.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace onionlink {

enum class DocSource { onion_page, tweet, forum_profile, other };

const char* to_string(DocSource s);
std::optional<DocSource> doc_source_from_string(std::string_view s);

struct Identity {
    std::string id;
    std::string network; // twitter | forum | onion | other
    std::string handle;
    std::map<std::string, std::string> profile;

    bool operator==(const Identity&) const = default;
};

struct Document {
    std::string doc_id;
    DocSource source = DocSource::other;
    std::optional<Identity> identity;
    std::string body; // UTF-8, may be HTML

    bool operator==(const Document&) const = default;
};

// Candidate harvesting: every maximal run of base58 characters delimited by
// non-base58 characters or string boundaries that is 26-35 chars long and
// starts with '1' or '3', in document order, duplicates preserved.
// Throws InputError naming the byte offset on invalid UTF-8.
std::vector<std::string> scan_text(std::string_view body, const std::string& context);
std::vector<std::string> scan_document(const Document& d);

struct SeedAddressRecord {
    Address address;
    std::string identity; // identity id, or service label for onion sources
    std::string network;
    std::string handle;
    std::vector<std::string> evidence; // doc ids, sorted
    bool active = false;
    bool contested = false;

    bool operator==(const SeedAddressRecord&) const = default;
};

// Keeps records whose address has at least one tx and total_received >=
// min_received; sets the active flag on every input record first.
std::vector<SeedAddressRecord> filter_active(std::vector<SeedAddressRecord> records,
                                             const ChainIndex& ix, int64_t min_received);

constexpr int64_t k_default_min_received = 1000; // satoshi, i.e. 0.00001 BTC

// Scans the corpus, validates candidates, deduplicates (address, identity)
// pairs aggregating evidence, flags contested addresses, then filters by
// activity. Documents are processed in doc_id order; n_threads > 1 splits the
// scan with a deterministic merge.
std::vector<SeedAddressRecord> build_seed_dataset(std::vector<Document> corpus,
                                                  const ChainIndex& ix,
                                                  int64_t min_received = k_default_min_received,
                                                  unsigned n_threads = 1);

// Corpus wire format: one JSON object per line
// {"doc_id", "source", "identity": {...}|null, "body"}.
Document parse_document_line(std::string_view line, const std::string& context,
                             size_t line_no);
std::string serialize_document_line(const Document& d);
std::vector<Document> parse_corpus_file(const std::string& path);

// Seed dataset wire format mirroring SeedAddressRecord.
std::string serialize_seed_line(const SeedAddressRecord& r);
SeedAddressRecord parse_seed_line(std::string_view line, const std::string& context,
                                  size_t line_no);
std::vector<SeedAddressRecord> parse_seeds_file(const std::string& path);

} // namespace onionlink
