#include "onionlink/chain.hpp"
#include "onionlink/closure.hpp"
#include "onionlink/econ.hpp"
#include "onionlink/errors.hpp"
#include "onionlink/extract.hpp"
#include "onionlink/jsonl.hpp"
#include "onionlink/link.hpp"
#include "onionlink/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace onionlink;

namespace {

json load_json_file(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw InputError(path + ": malformed JSON");
    return j;
}

// --config supplies defaults; flags that were actually passed win. Keys are
// the long flag names with '-' spelled '_'. Unknown keys are rejected.
struct ConfigMerger {
    json cfg = json::object();
    std::string path;
    std::set<std::string> known;

    void load(const std::string& p) {
        path = p;
        cfg = load_json_file(p);
        if (!cfg.is_object()) throw InputError(p + ": config must be a JSON object");
    }
    bool pending(const CLI::Option* opt, const std::string& key) {
        known.insert(key);
        return opt->count() == 0 && cfg.contains(key);
    }
    const json& field(const std::string& key, bool want, const char* type_name) {
        const json& v = cfg.at(key);
        if (!want)
            throw InputError(path + ": field '" + key + "': must be " + type_name);
        return v;
    }
    void merge(const CLI::Option* opt, const std::string& key, std::string& var) {
        if (!pending(opt, key)) return;
        var = field(key, cfg.at(key).is_string(), "a string").get<std::string>();
    }
    void merge(const CLI::Option* opt, const std::string& key, int64_t& var) {
        if (!pending(opt, key)) return;
        var = field(key, cfg.at(key).is_number_integer() || cfg.at(key).is_number_unsigned(),
                    "an integer")
                  .get<int64_t>();
    }
    void merge(const CLI::Option* opt, const std::string& key, int& var) {
        if (!pending(opt, key)) return;
        var = field(key, cfg.at(key).is_number_integer() || cfg.at(key).is_number_unsigned(),
                    "an integer")
                  .get<int>();
    }
    void merge(const CLI::Option* opt, const std::string& key, unsigned& var) {
        if (!pending(opt, key)) return;
        var = field(key, cfg.at(key).is_number_unsigned(), "a non-negative integer")
                  .get<unsigned>();
    }
    void merge(const CLI::Option* opt, const std::string& key, bool& var) {
        if (!pending(opt, key)) return;
        var = field(key, cfg.at(key).is_boolean(), "a boolean").get<bool>();
    }
    // call after every merge(): rejects config keys no flag claimed
    void finish() const {
        for (auto it = cfg.begin(); it != cfg.end(); ++it)
            if (!known.contains(it.key()))
                throw InputError(path + ": unknown config field '" + it.key() + "'");
    }
};

void require_path(const std::string& v, const char* flag) {
    if (v.empty()) throw InputError(std::string("missing required option ") + flag);
}

void check_threads(unsigned threads) {
    if (threads < 1 || threads > 64) throw InputError("--threads must be in [1,64]");
}

void write_lines(const std::string& path, const auto& items, auto serialize) {
    std::string out;
    for (const auto& item : items) {
        out += serialize(item);
        out += '\n';
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

void cmd_ingest(const std::string& ledger, const std::string& out_dir) {
    IndexBuilder builder;
    parse_ledger_stream(ledger, [&](TxRecord&& tx) { builder.add(std::move(tx)); });
    ChainIndex ix = builder.finish();
    ix.save(out_dir);
    std::cerr << "ingest: " << ix.tx_count() << " txs, " << ix.address_count()
              << " addresses -> " << out_dir << "\n";
}

void cmd_extract(const std::string& corpus, const std::string& index,
                 const std::string& out, int64_t min_received, unsigned threads) {
    ChainIndex ix = ChainIndex::load(index);
    auto seeds = build_seed_dataset(parse_corpus_file(corpus), ix, min_received, threads);
    write_lines(out, seeds, serialize_seed_line);
    std::cerr << "extract: " << seeds.size() << " active seed addresses -> " << out << "\n";
}

void cmd_cluster(const std::string& index, const std::string& seeds_path,
                 const std::string& out, const std::string& stats_path, bool clean,
                 const std::string& contested) {
    ChainIndex ix = ChainIndex::load(index);
    auto records = parse_seeds_file(seeds_path);
    std::vector<SeedAssignment> assignments;
    assignments.reserve(records.size());
    for (const auto& r : records) {
        if (contested == "exclude" && r.contested) continue;
        assignments.push_back({r.address.raw, r.identity});
    }
    ClosurePartition partition = ClosurePartition::build(ix);
    auto before = assign_closures(ix, partition, assignments);
    auto after = clean_closures(before);
    if (!stats_path.empty())
        write_text_file(stats_path, stats_csv(closure_stats(before, after)));
    const auto& result = clean ? after : before;
    write_lines(out, result, serialize_closure_line);
    std::cerr << "cluster: " << before.size() << " closures, " << result.size()
              << " written -> " << out << "\n";
}

void cmd_link(const std::string& index, const std::string& closures_path,
              const std::string& services_path, const std::string& out,
              const std::string& summary_path, const std::string& seeds_path) {
    ChainIndex ix = ChainIndex::load(index);
    auto closures = parse_closures_file(closures_path);
    auto services = parse_services_file(services_path);
    auto links = link(ix, closures, services);
    write_lines(out, links, serialize_link_line);
    if (!summary_path.empty()) {
        std::map<std::string, std::string> network_of;
        if (!seeds_path.empty())
            for (const auto& r : parse_seeds_file(seeds_path))
                network_of.emplace(r.identity, r.network);
        write_text_file(summary_path, summary_csv(link_summary(links, services, network_of)));
    }
    std::cerr << "link: " << links.size() << " identity-service links -> " << out << "\n";
}

void cmd_econ(const std::string& index, const std::string& services_path,
              const std::string& out, const std::string& json_path,
              const std::string& volume_cdf_path, const std::string& flow_cdf_path,
              const std::string& yearly_path, bool have_year_from, int year_from,
              bool have_year_to, int year_to) {
    ChainIndex ix = ChainIndex::load(index);
    auto services = parse_services_file(services_path);
    std::vector<EconReport> reports;
    reports.reserve(services.size());
    for (const auto& s : services) {
        try {
            reports.push_back(econ_report(ix, s));
        } catch (const InputError& e) {
            std::cerr << "warning: " << e.what() << "\n";
        }
    }
    write_text_file(out, econ_csv(reports));
    if (!json_path.empty()) write_lines(json_path, reports, serialize_econ_line);
    if (!volume_cdf_path.empty()) write_text_file(volume_cdf_path, cdf_csv(volume_cdf(reports)));
    if (!flow_cdf_path.empty()) write_text_file(flow_cdf_path, cdf_csv(flow_cdf(reports)));
    if (!yearly_path.empty()) {
        if (!have_year_from || !have_year_to) {
            int lo = 0, hi = 0;
            bool any = false;
            for (const auto& r : reports)
                for (int y : r.active_years) {
                    lo = any ? std::min(lo, y) : y;
                    hi = any ? std::max(hi, y) : y;
                    any = true;
                }
            if (!any) throw InputError("cannot infer year range: no active services");
            if (!have_year_from) year_from = lo;
            if (!have_year_to) year_to = hi;
        }
        write_text_file(yearly_path, yearly_csv(reports, year_from, year_to));
    }
    std::cerr << "econ: " << reports.size() << " service reports -> " << out << "\n";
}

// ---------------------------------------------------------------------------
// entry
// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"transaction-graph linkage toolkit"};
    app.require_subcommand(1);

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "parse a TXJ ledger and build the index");
    std::string ig_ledger, ig_out, ig_config;
    unsigned ig_threads = 1;
    auto* ig_ledger_o = ingest->add_option("--ledger", ig_ledger, "input ledger (.txj)");
    auto* ig_out_o = ingest->add_option("--out", ig_out, "output index directory");
    ingest->add_option("--config", ig_config, "JSON file supplying flag defaults");
    auto* ig_threads_o = ingest->add_option("--threads", ig_threads, "worker thread bound")
                             ->envname("ONIONLINK_THREADS");

    // ---- extract ----
    auto* extract = app.add_subcommand("extract", "harvest seed addresses from a corpus");
    std::string ex_corpus, ex_index, ex_out, ex_config;
    int64_t ex_min_received = k_default_min_received;
    unsigned ex_threads = 1;
    auto* ex_corpus_o = extract->add_option("--corpus", ex_corpus, "corpus (.jsonl)");
    auto* ex_index_o = extract->add_option("--index", ex_index, "index directory");
    auto* ex_out_o = extract->add_option("--out", ex_out, "output seed dataset (.jsonl)");
    auto* ex_min_o = extract->add_option("--min-received", ex_min_received,
                                         "activity threshold in satoshi");
    extract->add_option("--config", ex_config, "JSON file supplying flag defaults");
    auto* ex_threads_o = extract->add_option("--threads", ex_threads, "worker thread bound")
                             ->envname("ONIONLINK_THREADS");

    // ---- cluster ----
    auto* cluster = app.add_subcommand("cluster", "compute and clean wallet closures");
    std::string cl_index, cl_seeds, cl_out, cl_stats, cl_contested = "exclude", cl_config;
    bool cl_no_clean = false, cl_clean = true;
    unsigned cl_threads = 1;
    auto* cl_index_o = cluster->add_option("--index", cl_index, "index directory");
    auto* cl_seeds_o = cluster->add_option("--seeds", cl_seeds, "seed dataset (.jsonl)");
    auto* cl_out_o = cluster->add_option("--out", cl_out, "output closures (.jsonl)");
    auto* cl_stats_o = cluster->add_option("--stats", cl_stats, "closure size stats (.csv)");
    auto* cl_no_clean_o =
        cluster->add_flag("--no-clean", cl_no_clean, "write uncleaned closures");
    auto* cl_contested_o = cluster->add_option("--contested", cl_contested,
                                               "contested seed policy: include|exclude");
    cluster->add_option("--config", cl_config, "JSON file supplying flag defaults");
    auto* cl_threads_o = cluster->add_option("--threads", cl_threads, "worker thread bound")
                             ->envname("ONIONLINK_THREADS");

    // ---- link ----
    auto* lnk = app.add_subcommand("link", "link identities to services via payments");
    std::string lk_index, lk_closures, lk_services, lk_out, lk_summary, lk_seeds, lk_config;
    unsigned lk_threads = 1;
    auto* lk_index_o = lnk->add_option("--index", lk_index, "index directory");
    auto* lk_closures_o = lnk->add_option("--closures", lk_closures, "closures (.jsonl)");
    auto* lk_services_o = lnk->add_option("--services", lk_services, "services (.jsonl)");
    auto* lk_out_o = lnk->add_option("--out", lk_out, "output links (.jsonl)");
    auto* lk_summary_o =
        lnk->add_option("--summary", lk_summary, "per-service user counts (.csv)");
    auto* lk_seeds_o =
        lnk->add_option("--seeds", lk_seeds, "seed dataset, for the network split");
    lnk->add_option("--config", lk_config, "JSON file supplying flag defaults");
    auto* lk_threads_o = lnk->add_option("--threads", lk_threads, "worker thread bound")
                             ->envname("ONIONLINK_THREADS");

    // ---- econ ----
    auto* econ = app.add_subcommand("econ", "per-service economic activity reports");
    std::string ec_index, ec_services, ec_out, ec_json, ec_vcdf, ec_fcdf, ec_yearly, ec_config;
    int ec_year_from = 0, ec_year_to = 0;
    unsigned ec_threads = 1;
    auto* ec_index_o = econ->add_option("--index", ec_index, "index directory");
    auto* ec_services_o = econ->add_option("--services", ec_services, "services (.jsonl)");
    auto* ec_out_o = econ->add_option("--out", ec_out, "output report (.csv)");
    auto* ec_json_o = econ->add_option("--json", ec_json, "full reports (.jsonl)");
    auto* ec_vcdf_o = econ->add_option("--volume-cdf", ec_vcdf, "volume CDF (.csv)");
    auto* ec_fcdf_o = econ->add_option("--flow-cdf", ec_fcdf, "incoming-flow CDF (.csv)");
    auto* ec_yearly_o = econ->add_option("--yearly", ec_yearly, "yearly activity (.csv)");
    auto* ec_yfrom_o = econ->add_option("--year-from", ec_year_from, "first year, inclusive");
    auto* ec_yto_o = econ->add_option("--year-to", ec_year_to, "last year, inclusive");
    econ->add_option("--config", ec_config, "JSON file supplying flag defaults");
    auto* ec_threads_o = econ->add_option("--threads", ec_threads, "worker thread bound")
                             ->envname("ONIONLINK_THREADS");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic ledger bundle");
    std::string sy_out, sy_config;
    GeneratorConfig sy;
    auto* sy_seed_o = synth->add_option("--seed", sy.rng_seed, "rng seed");
    auto* sy_wallets_o = synth->add_option("--wallets", sy.n_wallets, "wallet count");
    auto* sy_amin_o = synth->add_option("--addr-min", sy.addr_min, "min addresses per wallet");
    auto* sy_amax_o = synth->add_option("--addr-max", sy.addr_max, "max addresses per wallet");
    auto* sy_ids_o =
        synth->add_option("--identities", sy.n_user_identities, "user identity count");
    auto* sy_svcs_o = synth->add_option("--services", sy.n_services, "service count");
    auto* sy_pays_o = synth->add_option("--payments", sy.n_payment_txs, "payment tx count");
    auto* sy_mix_o = synth->add_option("--mixing-rate", sy.mixing_rate,
                                       "fraction of wallets routed through mixes");
    auto* sy_corr_o = synth->add_option("--corruption-rate", sy.corruption_rate,
                                        "fraction of identities with mutated mentions");
    auto* sy_t0_o = synth->add_option("--time-start", sy.time_start, "first timestamp");
    auto* sy_t1_o = synth->add_option("--time-end", sy.time_end, "timestamp upper bound");
    synth->add_option("--config", sy_config, "generator config JSON; flags override");
    synth->add_option("--out", sy_out, "output bundle directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        throw InputError(e.what());
    }

    if (ingest->parsed()) {
        ConfigMerger m;
        if (!ig_config.empty()) m.load(ig_config);
        m.merge(ig_ledger_o, "ledger", ig_ledger);
        m.merge(ig_out_o, "out", ig_out);
        m.merge(ig_threads_o, "threads", ig_threads);
        m.finish();
        require_path(ig_ledger, "--ledger");
        require_path(ig_out, "--out");
        check_threads(ig_threads);
        cmd_ingest(ig_ledger, ig_out);
    } else if (extract->parsed()) {
        ConfigMerger m;
        if (!ex_config.empty()) m.load(ex_config);
        m.merge(ex_corpus_o, "corpus", ex_corpus);
        m.merge(ex_index_o, "index", ex_index);
        m.merge(ex_out_o, "out", ex_out);
        m.merge(ex_min_o, "min_received", ex_min_received);
        m.merge(ex_threads_o, "threads", ex_threads);
        m.finish();
        require_path(ex_corpus, "--corpus");
        require_path(ex_index, "--index");
        require_path(ex_out, "--out");
        check_threads(ex_threads);
        cmd_extract(ex_corpus, ex_index, ex_out, ex_min_received, ex_threads);
    } else if (cluster->parsed()) {
        ConfigMerger m;
        if (!cl_config.empty()) m.load(cl_config);
        m.merge(cl_index_o, "index", cl_index);
        m.merge(cl_seeds_o, "seeds", cl_seeds);
        m.merge(cl_out_o, "out", cl_out);
        m.merge(cl_stats_o, "stats", cl_stats);
        m.merge(cl_no_clean_o, "clean", cl_clean);
        m.merge(cl_contested_o, "contested", cl_contested);
        m.merge(cl_threads_o, "threads", cl_threads);
        m.finish();
        if (cl_no_clean_o->count()) cl_clean = false;
        if (cl_contested != "include" && cl_contested != "exclude")
            throw InputError("--contested must be 'include' or 'exclude'");
        require_path(cl_index, "--index");
        require_path(cl_seeds, "--seeds");
        require_path(cl_out, "--out");
        check_threads(cl_threads);
        cmd_cluster(cl_index, cl_seeds, cl_out, cl_stats, cl_clean, cl_contested);
    } else if (lnk->parsed()) {
        ConfigMerger m;
        if (!lk_config.empty()) m.load(lk_config);
        m.merge(lk_index_o, "index", lk_index);
        m.merge(lk_closures_o, "closures", lk_closures);
        m.merge(lk_services_o, "services", lk_services);
        m.merge(lk_out_o, "out", lk_out);
        m.merge(lk_summary_o, "summary", lk_summary);
        m.merge(lk_seeds_o, "seeds", lk_seeds);
        m.merge(lk_threads_o, "threads", lk_threads);
        m.finish();
        require_path(lk_index, "--index");
        require_path(lk_closures, "--closures");
        require_path(lk_services, "--services");
        require_path(lk_out, "--out");
        check_threads(lk_threads);
        cmd_link(lk_index, lk_closures, lk_services, lk_out, lk_summary, lk_seeds);
    } else if (econ->parsed()) {
        ConfigMerger m;
        if (!ec_config.empty()) m.load(ec_config);
        m.merge(ec_index_o, "index", ec_index);
        m.merge(ec_services_o, "services", ec_services);
        m.merge(ec_out_o, "out", ec_out);
        m.merge(ec_json_o, "json", ec_json);
        m.merge(ec_vcdf_o, "volume_cdf", ec_vcdf);
        m.merge(ec_fcdf_o, "flow_cdf", ec_fcdf);
        m.merge(ec_yearly_o, "yearly", ec_yearly);
        m.merge(ec_yfrom_o, "year_from", ec_year_from);
        m.merge(ec_yto_o, "year_to", ec_year_to);
        m.merge(ec_threads_o, "threads", ec_threads);
        m.finish();
        require_path(ec_index, "--index");
        require_path(ec_services, "--services");
        require_path(ec_out, "--out");
        check_threads(ec_threads);
        // config-supplied years count as explicitly set
        bool have_yfrom = ec_yfrom_o->count() > 0 || m.cfg.contains("year_from");
        bool have_yto = ec_yto_o->count() > 0 || m.cfg.contains("year_to");
        cmd_econ(ec_index, ec_services, ec_out, ec_json, ec_vcdf, ec_fcdf, ec_yearly,
                 have_yfrom, ec_year_from, have_yto, ec_year_to);
    } else if (synth->parsed()) {
        GeneratorConfig cfg;
        if (!sy_config.empty()) cfg = config_from_json(load_json_file(sy_config), sy_config);
        if (sy_seed_o->count()) cfg.rng_seed = sy.rng_seed;
        if (sy_wallets_o->count()) cfg.n_wallets = sy.n_wallets;
        if (sy_amin_o->count()) cfg.addr_min = sy.addr_min;
        if (sy_amax_o->count()) cfg.addr_max = sy.addr_max;
        if (sy_ids_o->count()) cfg.n_user_identities = sy.n_user_identities;
        if (sy_svcs_o->count()) cfg.n_services = sy.n_services;
        if (sy_pays_o->count()) cfg.n_payment_txs = sy.n_payment_txs;
        if (sy_mix_o->count()) cfg.mixing_rate = sy.mixing_rate;
        if (sy_corr_o->count()) cfg.corruption_rate = sy.corruption_rate;
        if (sy_t0_o->count()) cfg.time_start = sy.time_start;
        if (sy_t1_o->count()) cfg.time_end = sy.time_end;
        validate_config(cfg);
        require_path(sy_out, "--out");
        generate_bundle(cfg, sy_out);
        write_text_file(sy_out + "/config.json", config_to_json(cfg).dump() + "\n");
        std::cerr << "synth: bundle -> " << sy_out << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
