#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "onionlink/extract.hpp"
#include "onionlink/errors.hpp"
#include "onionlink/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace onionlink;

namespace {

const std::string k_ransom = "1AEoiHY23fbBn8QiJ5y6oAjrhRY1Fb85uc";

Address addr(const std::string& raw) {
    auto c = validate_address(raw);
    REQUIRE_MESSAGE(c.ok(), raw);
    return c.address;
}

std::string hexid(uint64_t n) {
    char buf[65];
    std::snprintf(buf, sizeof buf, "%064llx", static_cast<unsigned long long>(n));
    return buf;
}

std::vector<std::string> mint_pool(size_t n, uint64_t seed) {
    SynthRng rng(seed);
    std::set<std::string> uniq;
    while (uniq.size() < n) uniq.insert(mint_address(rng, 0x00));
    return {uniq.begin(), uniq.end()};
}

Document doc(const std::string& id, DocSource src, const std::string& ident,
             const std::string& body) {
    Document d;
    d.doc_id = id;
    d.source = src;
    if (!ident.empty()) {
        Identity i;
        i.id = ident;
        i.network = src == DocSource::tweet ? "twitter" : "forum";
        i.handle = "@" + ident;
        d.identity = i;
    }
    d.body = body;
    return d;
}

// one coinbase paying each address the given amount
ChainIndex fund(const std::vector<std::pair<std::string, int64_t>>& grants) {
    std::vector<TxRecord> txs;
    uint64_t n = 1;
    for (const auto& [a, sat] : grants) {
        TxRecord tx;
        tx.txid = hexid(n++);
        tx.time = int64_t(n);
        tx.outputs.push_back({addr(a), sat});
        txs.push_back(std::move(tx));
    }
    return build_index(txs);
}

} // namespace

TEST_CASE("scan finds a lone address and respects boundaries") {
    CHECK(scan_text(k_ransom, "t") == std::vector<std::string>{k_ransom});
    CHECK(scan_text("", "t").empty());
    // flanked by base58 characters: the maximal run is too long, no match
    CHECK(scan_text("xx" + k_ransom + "yy", "t").empty());
    // flanked by non-base58 characters: delimited, so it matches
    CHECK(scan_text("pay to:" + k_ransom + "!", "t") ==
          std::vector<std::string>{k_ransom});
    // '0' is outside the alphabet, hence a delimiter
    CHECK(scan_text("0" + k_ransom + "0", "t") == std::vector<std::string>{k_ransom});
    // duplicates preserved, document order
    auto two = scan_text(k_ransom + " and again " + k_ransom, "t");
    CHECK(two == std::vector<std::string>{k_ransom, k_ransom});
}

TEST_CASE("scan yields only 26-35 char runs starting with 1 or 3") {
    // 25 chars starting '1': too short
    CHECK(scan_text("1" + std::string(24, 'a'), "t").empty());
    // run starting '2'
    CHECK(scan_text("2" + std::string(30, 'a'), "t").empty());
    // 26 chars starting '3': shape-valid candidate (checksum comes later)
    auto got = scan_text("3" + std::string(25, 'a'), "t");
    REQUIRE(got.size() == 1);
    CHECK(got[0].size() == 26);
    // 36-char run: too long, and no substring is taken
    CHECK(scan_text("1" + std::string(35, 'a'), "t").empty());
}

TEST_CASE("scan names the byte offset of invalid UTF-8") {
    std::string body = "abc\x80xyz";
    try {
        scan_text(body, "doc7");
        FAIL("expected InputError");
    } catch (const InputError& e) {
        std::string msg = e.what();
        CHECK(msg.find("doc7") != std::string::npos);
        CHECK(msg.find("invalid UTF-8 at byte offset 3") != std::string::npos);
    }
    // truncated 3-byte sequence at the end
    std::string tail = "ok\xE2\x82";
    try {
        scan_text(tail, "t");
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("byte offset 2") != std::string::npos);
    }
    // overlong encoding
    std::string overlong = "\xC0\x80";
    CHECK_THROWS_AS(scan_text(overlong, "t"), InputError);
    // well-formed multibyte passes and does not break runs
    std::string utf = "\xC3\xA9 " + k_ransom + " \xE2\x82\xBF";
    CHECK(scan_text(utf, "t") == std::vector<std::string>{k_ransom});
}

TEST_CASE("165 documents with one address yield one record with 165 evidence entries") {
    std::vector<Document> corpus;
    for (int i = 0; i < 165; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "d%04d", i);
        corpus.push_back(doc(id, DocSource::tweet, "alice", "tip " + k_ransom + " pls"));
    }
    ChainIndex ix = fund({{k_ransom, 100000}});
    auto records = build_seed_dataset(corpus, ix);
    REQUIRE(records.size() == 1);
    CHECK(records[0].address.raw == k_ransom);
    CHECK(records[0].identity == "alice");
    CHECK(records[0].evidence.size() == 165);
    CHECK(records[0].active);
    CHECK(!records[0].contested);
    CHECK(std::is_sorted(records[0].evidence.begin(), records[0].evidence.end()));
}

TEST_CASE("an address claimed by two identities flags both records contested") {
    auto pool = mint_pool(2, 1);
    std::vector<Document> corpus = {
        doc("d1", DocSource::tweet, "alice", "mine: " + pool[0]),
        doc("d2", DocSource::forum_profile, "bob", "mine: " + pool[0]),
        doc("d3", DocSource::tweet, "alice", "also " + pool[1]),
    };
    ChainIndex ix = fund({{pool[0], 5000}, {pool[1], 5000}});
    auto records = build_seed_dataset(corpus, ix);
    REQUIRE(records.size() == 3);
    int contested = 0;
    for (const auto& r : records) {
        if (r.address.raw == pool[0]) {
            CHECK(r.contested);
            ++contested;
        } else {
            CHECK(!r.contested);
        }
    }
    CHECK(contested == 2);
}

TEST_CASE("user-source documents must carry an identity") {
    std::vector<Document> corpus = {doc("d1", DocSource::tweet, "", k_ransom)};
    ChainIndex ix = fund({});
    try {
        build_seed_dataset(corpus, ix);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("user-source document lacks identity") !=
              std::string::npos);
    }
    // onion pages and misc documents may be anonymous; they attribute nothing
    std::vector<Document> anon = {doc("d1", DocSource::onion_page, "", k_ransom),
                                  doc("d2", DocSource::other, "", k_ransom)};
    CHECK(build_seed_dataset(anon, fund({{k_ransom, 100000}})).empty());
}

TEST_CASE("corrupted mentions are dropped: 95 of 100 planted addresses survive") {
    auto pool = mint_pool(100, 2);
    SynthRng rng(3);
    std::vector<Document> corpus;
    std::vector<std::pair<std::string, int64_t>> grants;
    std::set<std::string> valid_planted;
    int n_doc = 0;
    for (size_t i = 0; i < pool.size(); ++i) {
        grants.emplace_back(pool[i], 100000);
        bool corrupt = i % 20 == 7; // exactly 5 of 100
        std::string mention = corrupt ? corrupt_address(rng, pool[i]) : pool[i];
        if (!corrupt) valid_planted.insert(pool[i]);
        for (int d = 0; d < 10; ++d) {
            char id[16];
            std::snprintf(id, sizeof id, "d%06d", n_doc++);
            corpus.push_back(doc(id, DocSource::tweet, "u" + std::to_string(i),
                                 "addr " + mention + " here"));
        }
    }
    REQUIRE(corpus.size() == 1000);
    REQUIRE(valid_planted.size() == 95);
    ChainIndex ix = fund(grants);
    auto records = build_seed_dataset(corpus, ix);
    std::set<std::string> got;
    for (const auto& r : records) {
        got.insert(r.address.raw);
        CHECK(r.evidence.size() == 10);
    }
    CHECK(got == valid_planted);
}

TEST_CASE("filter_active keeps funded addresses only, strict threshold") {
    auto pool = mint_pool(3, 4);
    ChainIndex ix = fund({{pool[0], 999}, {pool[1], 1000}});
    auto rec = [&](const std::string& a) {
        SeedAddressRecord r;
        r.address = addr(a);
        r.identity = "u";
        r.network = "twitter";
        r.handle = "@u";
        r.evidence = {"d1"};
        return r;
    };
    // pool[2] has no transactions at all
    auto kept = filter_active({rec(pool[0]), rec(pool[1]), rec(pool[2])}, ix, 1000);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].address.raw == pool[1]);
    CHECK(kept[0].active);

    // at threshold 999 the boundary address comes back
    auto kept2 = filter_active({rec(pool[0]), rec(pool[1]), rec(pool[2])}, ix, 999);
    CHECK(kept2.size() == 2);

    // an address with a transaction but zero received still needs >= min
    auto kept3 = filter_active({rec(pool[0])}, ix, 0);
    CHECK(kept3.size() == 1);

    CHECK_THROWS_AS(filter_active({}, ix, -1), InputError);
}

TEST_CASE("raising min_received never adds records") {
    auto pool = mint_pool(50, 5);
    std::vector<std::pair<std::string, int64_t>> grants;
    std::vector<SeedAddressRecord> records;
    SynthRng rng(6);
    for (size_t i = 0; i < pool.size(); ++i) {
        grants.emplace_back(pool[i], int64_t(rng.below(5000)));
        SeedAddressRecord r;
        r.address = addr(pool[i]);
        r.identity = "u" + std::to_string(i);
        r.network = "forum";
        r.handle = "h";
        r.evidence = {"d"};
        records.push_back(std::move(r));
    }
    ChainIndex ix = fund(grants);
    size_t prev = SIZE_MAX;
    for (int64_t thr : {0, 100, 1000, 2500, 6000}) {
        auto kept = filter_active(records, ix, thr);
        std::set<std::string> kept_set;
        for (const auto& r : kept) kept_set.insert(r.address.raw);
        for (const auto& [a, sat] : grants) {
            bool want = sat >= thr; // every pool address has exactly one tx
            CHECK(kept_set.contains(a) == want);
        }
        CHECK(kept.size() <= prev);
        prev = kept.size();
    }
}

TEST_CASE("duplicating the corpus changes nothing (dedup idempotence)") {
    auto pool = mint_pool(5, 7);
    std::vector<Document> corpus;
    for (size_t i = 0; i < 20; ++i)
        corpus.push_back(doc("d" + std::to_string(100 + i), DocSource::tweet,
                             "u" + std::to_string(i % 3),
                             "a " + pool[i % pool.size()] + " b"));
    std::vector<std::pair<std::string, int64_t>> grants;
    for (const auto& a : pool) grants.emplace_back(a, 100000);
    ChainIndex ix = fund(grants);

    auto once = build_seed_dataset(corpus, ix);
    std::vector<Document> doubled = corpus;
    doubled.insert(doubled.end(), corpus.begin(), corpus.end());
    auto twice = build_seed_dataset(doubled, ix);
    CHECK(once == twice);
    REQUIRE(!once.empty());
}

TEST_CASE("parallel scan merges deterministically") {
    auto pool = mint_pool(30, 8);
    std::vector<Document> corpus;
    for (size_t i = 0; i < 200; ++i) {
        std::string body;
        for (size_t k = 0; k <= i % 3; ++k) body += pool[(i * 7 + k) % pool.size()] + " ";
        corpus.push_back(
            doc("d" + std::to_string(1000 + i), DocSource::forum_profile,
                "u" + std::to_string(i % 11), body));
    }
    std::vector<std::pair<std::string, int64_t>> grants;
    for (const auto& a : pool) grants.emplace_back(a, 77777);
    ChainIndex ix = fund(grants);

    auto seq = build_seed_dataset(corpus, ix, k_default_min_received, 1);
    for (unsigned threads : {2u, 4u, 8u}) {
        auto par = build_seed_dataset(corpus, ix, k_default_min_received, threads);
        CHECK(par == seq);
    }
    // corpus order must not matter either
    std::reverse(corpus.begin(), corpus.end());
    CHECK(build_seed_dataset(corpus, ix, k_default_min_received, 3) == seq);
}

TEST_CASE("document wire format: round trip and strictness") {
    Document d = doc("d9", DocSource::tweet, "alice", "hello " + k_ransom);
    d.identity->profile = {{"bio", "card {}\" quotes"}, {"location", "berlin"}};
    std::string line = serialize_document_line(d);
    CHECK(parse_document_line(line, "t", 1) == d);

    Document anon = doc("d10", DocSource::onion_page, "", "<html>" + k_ransom + "</html>");
    std::string line2 = serialize_document_line(anon);
    CHECK(line2.find("\"identity\":null") != std::string::npos);
    CHECK(parse_document_line(line2, "t", 1) == anon);

    CHECK_THROWS_AS(parse_document_line(R"({"doc_id":"d","source":"tweet","identity":null,)"
                                        R"("body":"","extra":1})",
                                        "t", 1),
                    InputError);
    CHECK_THROWS_AS(parse_document_line(R"({"doc_id":"d","source":"telegram",)"
                                        R"("identity":null,"body":""})",
                                        "t", 1),
                    InputError);
}

TEST_CASE("seed record wire format round trip") {
    SeedAddressRecord r;
    r.address = addr(k_ransom);
    r.identity = "alice";
    r.network = "twitter";
    r.handle = "@alice";
    r.evidence = {"d1", "d2"};
    r.active = true;
    r.contested = false;
    std::string line = serialize_seed_line(r);
    CHECK(parse_seed_line(line, "t", 1) == r);

    std::string bad = line;
    bad.replace(bad.find(k_ransom), k_ransom.size(), std::string(34, '1'));
    CHECK_THROWS_AS(parse_seed_line(bad, "t", 1), InputError);
}

TEST_CASE("doc source names round trip") {
    for (DocSource s : {DocSource::onion_page, DocSource::tweet, DocSource::forum_profile,
                        DocSource::other}) {
        auto back = doc_source_from_string(to_string(s));
        REQUIRE(back.has_value());
        CHECK(*back == s);
    }
    CHECK(!doc_source_from_string("blog").has_value());
}
