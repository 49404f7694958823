#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "onionlink/extract.hpp"
#include "onionlink/jsonl.hpp"
#include "onionlink/link.hpp"
#include "onionlink/synth.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

using namespace onionlink;

namespace {

std::string scratch_root() {
    static std::string root = [] {
        auto dir = std::filesystem::temp_directory_path() /
                   ("onionlink_cli_" + std::to_string(getpid()));
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        return dir.string();
    }();
    return root;
}

std::string scratch(const std::string& tag) {
    std::string dir = scratch_root() + "/" + tag;
    std::filesystem::create_directories(dir);
    return dir;
}

std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'')
            q += "'\\''";
        else
            q += c;
    }
    q += "'";
    return q;
}

struct CliResult {
    int code = -1;
    std::string out, err;
};

// Runs the real binary through /bin/sh; env is an optional VAR=value prefix.
CliResult run_cli(const std::vector<std::string>& args, const std::string& env = "") {
    static std::atomic<int> serial{0};
    int n = serial++;
    std::string out_path = scratch_root() + "/cap_out_" + std::to_string(n);
    std::string err_path = scratch_root() + "/cap_err_" + std::to_string(n);
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += shell_quote(ONIONLINK_CLI_PATH);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " > " + shell_quote(out_path) + " 2> " + shell_quote(err_path);
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    CliResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = read_text_file(out_path);
    r.err = read_text_file(err_path);
    return r;
}

size_t line_count(const std::string& path) {
    std::string text = read_text_file(path);
    size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

bool one_line_error(const CliResult& r) {
    return r.err.rfind("error: ", 0) == 0 &&
           std::count(r.err.begin(), r.err.end(), '\n') == 1;
}

} // namespace

TEST_CASE("help exits 0, usage mistakes exit 1") {
    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({"--help"}).out.find("ingest") != std::string::npos);
    CHECK(run_cli({"synth", "--help"}).code == 0);
    CHECK(run_cli({"synth", "--help"}).out.find("--seed") != std::string::npos);

    CliResult none = run_cli({});
    CHECK(none.code == 1);
    CHECK(one_line_error(none));
    CHECK(run_cli({"frobnicate"}).code == 1);
    CHECK(run_cli({"ingest", "--bogus", "x"}).code == 1);
    CHECK(run_cli({"extract", "--min-received", "lots"}).code == 1);
}

TEST_CASE("pipeline end to end: runs clean, writes only files, reruns byte-identical") {
    std::string d = scratch("pipe");
    std::vector<std::string> synth_args = {
        "synth",          "--seed",   "21", "--wallets",         "12",
        "--identities",   "6",        "--services", "3",
        "--payments",     "40",       "--mixing-rate", "0.34",
        "--corruption-rate", "0.17",  "--out", d + "/bundle"};
    CliResult r = run_cli(synth_args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.empty());
    CHECK(!r.err.empty());

    auto step = [&](std::vector<std::string> args) {
        CliResult s = run_cli(args);
        REQUIRE_MESSAGE(s.code == 0, s.err);
        CHECK(s.out.empty());
        CHECK(!s.err.empty());
    };
    step({"ingest", "--ledger", d + "/bundle/ledger.txj", "--out", d + "/index"});
    step({"extract", "--corpus", d + "/bundle/corpus.jsonl", "--index", d + "/index",
          "--out", d + "/seeds.jsonl"});
    step({"cluster", "--index", d + "/index", "--seeds", d + "/seeds.jsonl", "--out",
          d + "/closures.jsonl", "--stats", d + "/stats.csv"});
    step({"cluster", "--index", d + "/index", "--seeds", d + "/seeds.jsonl", "--out",
          d + "/closures_raw.jsonl", "--no-clean"});
    step({"link", "--index", d + "/index", "--closures", d + "/closures.jsonl",
          "--services", d + "/bundle/services.jsonl", "--out", d + "/links.jsonl",
          "--summary", d + "/summary.csv", "--seeds", d + "/seeds.jsonl"});
    step({"econ", "--index", d + "/index", "--services", d + "/bundle/services.jsonl",
          "--out", d + "/econ.csv", "--json", d + "/econ.jsonl", "--volume-cdf",
          d + "/vcdf.csv", "--flow-cdf", d + "/fcdf.csv", "--yearly", d + "/yearly.csv"});

    // counts agree with the generator's ground truth
    GroundTruth t = load_truth(d + "/bundle/truth.json");
    std::set<uint64_t> mixed(t.mixed_wallets.begin(), t.mixed_wallets.end());
    size_t seeded = 0, survivors = 0;
    for (const auto& ident : t.identities) {
        if (!ident.corrupted) ++seeded;
        if (!ident.corrupted && !mixed.contains(ident.wallet)) ++survivors;
    }
    CHECK(line_count(d + "/seeds.jsonl") == seeded);
    CHECK(line_count(d + "/closures_raw.jsonl") == seeded);
    CHECK(line_count(d + "/closures.jsonl") == survivors);
    CHECK(survivors < seeded); // this config plants removable contamination
    CHECK(line_count(d + "/links.jsonl") >= 1);
    CHECK(line_count(d + "/econ.csv") == t.services.size() + 1); // header + rows

    // identical invocations reproduce every artifact byte for byte
    std::string d2 = scratch("pipe_again");
    synth_args.back() = d2 + "/bundle";
    REQUIRE(run_cli(synth_args).code == 0);
    step({"ingest", "--ledger", d2 + "/bundle/ledger.txj", "--out", d2 + "/index"});
    step({"extract", "--corpus", d2 + "/bundle/corpus.jsonl", "--index", d2 + "/index",
          "--out", d2 + "/seeds.jsonl"});
    step({"cluster", "--index", d2 + "/index", "--seeds", d2 + "/seeds.jsonl", "--out",
          d2 + "/closures.jsonl", "--stats", d2 + "/stats.csv"});
    step({"link", "--index", d2 + "/index", "--closures", d2 + "/closures.jsonl",
          "--services", d2 + "/bundle/services.jsonl", "--out", d2 + "/links.jsonl",
          "--summary", d2 + "/summary.csv", "--seeds", d2 + "/seeds.jsonl"});
    step({"econ", "--index", d2 + "/index", "--services", d2 + "/bundle/services.jsonl",
          "--out", d2 + "/econ.csv", "--json", d2 + "/econ.jsonl", "--volume-cdf",
          d2 + "/vcdf.csv", "--flow-cdf", d2 + "/fcdf.csv", "--yearly", d2 + "/yearly.csv"});
    for (const char* f :
         {"/bundle/ledger.txj", "/bundle/corpus.jsonl", "/bundle/services.jsonl",
          "/bundle/truth.json", "/bundle/config.json", "/index/ledger.txj",
          "/index/meta.json", "/seeds.jsonl", "/closures.jsonl", "/links.jsonl",
          "/summary.csv", "/econ.csv", "/econ.jsonl", "/vcdf.csv", "/fcdf.csv",
          "/yearly.csv"})
        CHECK_MESSAGE(read_text_file(d + f) == read_text_file(d2 + f), f);

    // a worker bound never changes results, whether set by flag or environment
    step({"extract", "--corpus", d + "/bundle/corpus.jsonl", "--index", d + "/index",
          "--out", d + "/seeds_t8.jsonl", "--threads", "8"});
    CHECK(read_text_file(d + "/seeds_t8.jsonl") == read_text_file(d + "/seeds.jsonl"));
    CliResult env_run = run_cli({"extract", "--corpus", d + "/bundle/corpus.jsonl",
                                 "--index", d + "/index", "--out", d + "/seeds_env.jsonl"},
                                "ONIONLINK_THREADS=8");
    REQUIRE_MESSAGE(env_run.code == 0, env_run.err);
    CHECK(read_text_file(d + "/seeds_env.jsonl") == read_text_file(d + "/seeds.jsonl"));
}

TEST_CASE("config file supplies defaults, passed flags win") {
    std::string d = scratch("cfg");
    REQUIRE(run_cli({"synth", "--seed", "33", "--wallets", "8", "--identities", "4",
                     "--services", "2", "--payments", "25", "--out", d + "/bundle"})
                .code == 0);
    REQUIRE(run_cli({"ingest", "--ledger", d + "/bundle/ledger.txj", "--out",
                     d + "/index"})
                .code == 0);

    json cfg = {{"corpus", d + "/bundle/corpus.jsonl"},
                {"index", d + "/index"},
                {"out", d + "/seeds_cfg.jsonl"},
                {"min_received", 4000000000000LL}};
    write_text_file(d + "/extract.json", cfg.dump() + "\n");
    CliResult all_cfg = run_cli({"extract", "--config", d + "/extract.json"});
    REQUIRE_MESSAGE(all_cfg.code == 0, all_cfg.err);
    CHECK(line_count(d + "/seeds_cfg.jsonl") == 0); // absurd threshold from config

    CliResult overridden = run_cli({"extract", "--config", d + "/extract.json",
                                    "--min-received", "0", "--out", d + "/seeds_flag.jsonl"});
    REQUIRE_MESSAGE(overridden.code == 0, overridden.err);
    CHECK(line_count(d + "/seeds_flag.jsonl") > 0);
    CHECK(line_count(d + "/seeds_cfg.jsonl") == 0); // config-named file untouched

    json bad = cfg;
    bad["corpuz"] = "typo";
    write_text_file(d + "/bad.json", bad.dump() + "\n");
    CliResult unknown = run_cli({"extract", "--config", d + "/bad.json"});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("unknown config field 'corpuz'") != std::string::npos);

    write_text_file(d + "/not_object.json", "[1,2]\n");
    CHECK(run_cli({"extract", "--config", d + "/not_object.json"}).code == 1);
    write_text_file(d + "/broken.json", "{\"corpus\": \n");
    CliResult broken = run_cli({"extract", "--config", d + "/broken.json"});
    CHECK(broken.code == 1);
    CHECK(broken.err.find("malformed JSON") != std::string::npos);

    json wrong_type = {{"corpus", 7}};
    write_text_file(d + "/wrong_type.json", wrong_type.dump() + "\n");
    CliResult typed = run_cli({"extract", "--config", d + "/wrong_type.json"});
    CHECK(typed.code == 1);
    CHECK(typed.err.find("must be a string") != std::string::npos);

    json no_out = {{"corpus", d + "/bundle/corpus.jsonl"}, {"index", d + "/index"}};
    write_text_file(d + "/no_out.json", no_out.dump() + "\n");
    CliResult missing = run_cli({"extract", "--config", d + "/no_out.json"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("missing required option --out") != std::string::npos);

    // cluster honors a config-supplied clean=false like the --no-clean flag
    REQUIRE(run_cli({"extract", "--corpus", d + "/bundle/corpus.jsonl", "--index",
                     d + "/index", "--out", d + "/seeds.jsonl"})
                .code == 0);
    json raw = {{"clean", false}};
    write_text_file(d + "/raw.json", raw.dump() + "\n");
    REQUIRE(run_cli({"cluster", "--index", d + "/index", "--seeds", d + "/seeds.jsonl",
                     "--out", d + "/closures_cfg.jsonl", "--config", d + "/raw.json"})
                .code == 0);
    REQUIRE(run_cli({"cluster", "--index", d + "/index", "--seeds", d + "/seeds.jsonl",
                     "--out", d + "/closures_flag.jsonl", "--no-clean"})
                .code == 0);
    CHECK(read_text_file(d + "/closures_cfg.jsonl") ==
          read_text_file(d + "/closures_flag.jsonl"));
}

TEST_CASE("thread bound validated wherever it comes from") {
    std::string d = scratch("threads");
    REQUIRE(run_cli({"synth", "--seed", "40", "--wallets", "4", "--identities", "2",
                     "--services", "1", "--payments", "5", "--out", d + "/bundle"})
                .code == 0);
    REQUIRE(run_cli({"ingest", "--ledger", d + "/bundle/ledger.txj", "--out",
                     d + "/index"})
                .code == 0);
    std::vector<std::string> base = {"extract", "--corpus", d + "/bundle/corpus.jsonl",
                                     "--index", d + "/index", "--out", d + "/s.jsonl"};

    auto with_threads = [&](const std::string& v) {
        auto args = base;
        args.push_back("--threads");
        args.push_back(v);
        return run_cli(args);
    };
    CliResult zero = with_threads("0");
    CHECK(zero.code == 1);
    CHECK(zero.err.find("[1,64]") != std::string::npos);
    CHECK(with_threads("65").code == 1);
    CHECK(with_threads("-3").code == 1);
    CHECK(run_cli(base, "ONIONLINK_THREADS=0").code == 1);
    CHECK(run_cli(base, "ONIONLINK_THREADS=banana").code == 1);

    json cfg = {{"threads", 70}};
    write_text_file(d + "/t.json", cfg.dump() + "\n");
    auto args = base;
    args.push_back("--config");
    args.push_back(d + "/t.json");
    CHECK(run_cli(args).code == 1);
}

TEST_CASE("synth config file with flag overrides, recorded in the bundle") {
    std::string d = scratch("synthcfg");
    json gen = {{"rng_seed", 5}, {"n_wallets", 9},      {"n_user_identities", 3},
                {"n_services", 2}, {"n_payment_txs", 12}, {"mixing_rate", 0.0}};
    write_text_file(d + "/gen.json", gen.dump() + "\n");
    CliResult r = run_cli({"synth", "--config", d + "/gen.json", "--seed", "123",
                           "--out", d + "/bundle"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    json recorded = json::parse(read_text_file(d + "/bundle/config.json"));
    CHECK(recorded.at("rng_seed").get<uint64_t>() == 123); // flag beat the file
    CHECK(recorded.at("n_wallets").get<uint64_t>() == 9);  // file kept elsewhere

    json bad = gen;
    bad["wallets"] = 9; // wrong key name
    write_text_file(d + "/bad.json", bad.dump() + "\n");
    CHECK(run_cli({"synth", "--config", d + "/bad.json", "--out", d + "/b2"}).code == 1);

    CliResult infeasible = run_cli(
        {"synth", "--wallets", "5", "--identities", "9", "--out", d + "/b3"});
    CHECK(infeasible.code == 1);
    CHECK(infeasible.err.find("infeasible config") != std::string::npos);
    CHECK(run_cli({"synth", "--seed", "1"}).code == 1); // no --out
}

TEST_CASE("input problems exit 1 with a single error line") {
    std::string d = scratch("errs");
    CliResult gone = run_cli({"ingest", "--ledger", d + "/nope.txj", "--out", d + "/ix"});
    CHECK(gone.code == 1);
    CHECK(one_line_error(gone));

    write_text_file(d + "/junk.txj", "not json at all\n");
    CliResult junk = run_cli({"ingest", "--ledger", d + "/junk.txj", "--out", d + "/ix"});
    CHECK(junk.code == 1);
    CHECK(one_line_error(junk));

    REQUIRE(run_cli({"synth", "--seed", "50", "--wallets", "4", "--identities", "2",
                     "--services", "1", "--payments", "5", "--out", d + "/bundle"})
                .code == 0);
    std::string ledger = read_text_file(d + "/bundle/ledger.txj");
    std::string first_line = ledger.substr(0, ledger.find('\n') + 1);
    write_text_file(d + "/dup.txj", ledger + first_line);
    CliResult dup = run_cli({"ingest", "--ledger", d + "/dup.txj", "--out", d + "/ix"});
    CHECK(dup.code == 1);
    CHECK(dup.err.find("duplicate") != std::string::npos);

    REQUIRE(run_cli({"ingest", "--ledger", d + "/bundle/ledger.txj", "--out", d + "/ix"})
                .code == 0);
    CliResult policy = run_cli({"cluster", "--index", d + "/ix", "--seeds",
                                d + "/bundle/corpus.jsonl", "--out", d + "/c.jsonl",
                                "--contested", "sometimes"});
    CHECK(policy.code == 1);
    CHECK(policy.err.find("--contested") != std::string::npos);

    // services nobody pays: econ warns but succeeds; yearly inference then fails
    ServiceRecord ghost;
    ghost.service_id = "s9";
    ghost.name = "ghost";
    ghost.addresses = {validate_address("1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa").address};
    write_text_file(d + "/ghost.jsonl", serialize_service_line(ghost) + "\n");
    CliResult warn = run_cli({"econ", "--index", d + "/ix", "--services",
                              d + "/ghost.jsonl", "--out", d + "/econ.csv"});
    REQUIRE_MESSAGE(warn.code == 0, warn.err);
    CHECK(warn.err.find("warning:") != std::string::npos);
    CHECK(line_count(d + "/econ.csv") == 1); // header only

    CliResult yearly = run_cli({"econ", "--index", d + "/ix", "--services",
                                d + "/ghost.jsonl", "--out", d + "/econ.csv",
                                "--yearly", d + "/y.csv"});
    CHECK(yearly.code == 1);
    CHECK(yearly.err.find("cannot infer year range") != std::string::npos);
}

TEST_CASE("empty corpus flows through the pipeline as empty outputs") {
    std::string d = scratch("empty");
    REQUIRE(run_cli({"synth", "--seed", "60", "--wallets", "4", "--identities", "2",
                     "--services", "1", "--payments", "5", "--out", d + "/bundle"})
                .code == 0);
    REQUIRE(run_cli({"ingest", "--ledger", d + "/bundle/ledger.txj", "--out", d + "/ix"})
                .code == 0);
    write_text_file(d + "/empty.jsonl", "");
    CliResult ex = run_cli({"extract", "--corpus", d + "/empty.jsonl", "--index",
                            d + "/ix", "--out", d + "/seeds.jsonl"});
    REQUIRE_MESSAGE(ex.code == 0, ex.err);
    CHECK(line_count(d + "/seeds.jsonl") == 0);
    REQUIRE(run_cli({"cluster", "--index", d + "/ix", "--seeds", d + "/seeds.jsonl",
                     "--out", d + "/closures.jsonl"})
                .code == 0);
    CHECK(line_count(d + "/closures.jsonl") == 0);
    REQUIRE(run_cli({"link", "--index", d + "/ix", "--closures", d + "/closures.jsonl",
                     "--services", d + "/bundle/services.jsonl", "--out",
                     d + "/links.jsonl"})
                .code == 0);
    CHECK(line_count(d + "/links.jsonl") == 0);
}

TEST_CASE("contested seeds: excluded by default, includable on request") {
    std::string d = scratch("contested");
    REQUIRE(run_cli({"synth", "--seed", "70", "--wallets", "6", "--identities", "3",
                     "--services", "2", "--payments", "10", "--out", d + "/bundle"})
                .code == 0);
    REQUIRE(run_cli({"ingest", "--ledger", d + "/bundle/ledger.txj", "--out", d + "/ix"})
                .code == 0);
    GroundTruth t = load_truth(d + "/bundle/truth.json");
    const std::string& shared = t.wallets[0][0];

    Document d1, d2;
    d1.doc_id = "c1";
    d1.source = DocSource::tweet;
    d1.identity = Identity{t.identities[0].id, t.identities[0].network,
                           t.identities[0].handle};
    d1.body = "tips: " + shared;
    d2.doc_id = "c2";
    d2.source = DocSource::forum_profile;
    d2.identity = Identity{"intruder", "forum", "intruder"};
    d2.body = "my address " + shared + " thanks";
    write_text_file(d + "/corpus.jsonl", serialize_document_line(d1) + "\n" +
                                             serialize_document_line(d2) + "\n");
    REQUIRE(run_cli({"extract", "--corpus", d + "/corpus.jsonl", "--index", d + "/ix",
                     "--out", d + "/seeds.jsonl"})
                .code == 0);
    CHECK(line_count(d + "/seeds.jsonl") == 2); // both flagged, both reported

    auto cluster_lines = [&](std::vector<std::string> extra) {
        std::vector<std::string> args = {"cluster", "--index", d + "/ix",
                                         "--seeds", d + "/seeds.jsonl", "--out",
                                         d + "/out.jsonl"};
        args.insert(args.end(), extra.begin(), extra.end());
        CliResult r = run_cli(args);
        REQUIRE_MESSAGE(r.code == 0, r.err);
        return line_count(d + "/out.jsonl");
    };
    CHECK(cluster_lines({}) == 0);                      // default: contested dropped
    CHECK(cluster_lines({"--contested", "exclude"}) == 0);
    CHECK(cluster_lines({"--contested", "include", "--no-clean"}) == 2);
    CHECK(cluster_lines({"--contested", "include"}) == 0); // cleaning removes both
}
