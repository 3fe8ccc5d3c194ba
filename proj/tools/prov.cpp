// prov — operator front end over the provenance engine.
//
// Wires ingestion, corpus generation, index builds, occurrence queries, and
// corpus analytics into one binary with reproducible, pipe-friendly output:
// data rows on stdout (TSV by default, line-delimited JSON with --json),
// diagnostics on stderr.  Exit codes: 0 success, 1 domain errors (missing
// store, absent content, failed fits), 2 usage errors.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <prov/prov.hpp>

namespace {

using namespace prov;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

const char* finding_name(Finding::What w) {
    switch (w) {
    case Finding::What::dangling_reference: return "dangling_reference";
    case Finding::What::hash_mismatch: return "hash_mismatch";
    case Finding::What::directory_cycle: return "directory_cycle";
    default: return "bad_record";
    }
}

Model parse_model(const std::string& s) {
    if (s == "flat") return Model::flat;
    if (s == "recursive") return Model::recursive;
    if (s == "compact") return Model::compact;
    raise(Errc::invalid_argument, "unknown model: " + s);
}

// Default model for read paths: the first built index, probing the cheapest
// first.
Model pick_built_model(DagStore& store) {
    for (Model m : {Model::flat, Model::compact, Model::recursive})
        if (store.has_keyspace(mks::clock(m)) && load_watermark(store, m)) return m;
    raise(Errc::invalid_argument,
          "no model index is built; run: prov build --model flat|recursive|compact");
}

DagStore open_store(const std::string& path, bool writable) {
    if (path.empty())
        raise(Errc::invalid_argument,
              "no store path given (use --store, a config file, or PROV_STORE)");
    if (!writable) return DagStore(path, storage::OpenMode::read);
    bool exists = std::filesystem::exists(std::filesystem::path(path) / "MANIFEST");
    return DagStore(path, exists ? storage::OpenMode::write : storage::OpenMode::create);
}

RevisionCountSpec parse_revspec(const std::string& s) {
    auto colon = s.find(':');
    try {
        if (colon == std::string::npos) {
            return RevisionCountSpec(static_cast<uint32_t>(std::stoul(s)));
        }
        auto lo = static_cast<uint32_t>(std::stoul(s.substr(0, colon)));
        auto hi = static_cast<uint32_t>(std::stoul(s.substr(colon + 1)));
        return {lo, hi};
    } catch (const std::exception&) {
        raise(Errc::invalid_argument, "bad revision count spec (want N or LO:HI): " + s);
    }
}

std::pair<uint64_t, uint64_t> parse_range(const std::string& s) {
    auto colon = s.find(':');
    try {
        if (colon == std::string::npos)
            raise(Errc::invalid_argument, "bad range (want LO:HI): " + s);
        return {std::stoull(s.substr(0, colon)), std::stoull(s.substr(colon + 1))};
    } catch (const std::exception&) {
        raise(Errc::invalid_argument, "bad range (want LO:HI): " + s);
    }
}

NodeId parse_content_id(DagStore& store, const std::string& text) {
    auto id = parse_node_id(text, store.hash().len);
    if (!id || id->kind != Kind::content)
        raise(Errc::invalid_argument, "not a content id: " + text);
    return *id;
}

// Key/value output: one "key\tvalue" row per entry, or one JSON object line.
void emit_kv(bool json, const std::vector<std::pair<std::string, nlohmann::json>>& kv) {
    if (json) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : kv) j[k] = v;
        std::cout << j.dump() << "\n";
        return;
    }
    for (const auto& [k, v] : kv) {
        std::cout << k << "\t";
        if (v.is_string())
            std::cout << v.get<std::string>();
        else if (v.is_number_float())
            std::cout << fmt_double(v.get<double>());
        else
            std::cout << v.dump();
        std::cout << "\n";
    }
}

void emit_ingest_stats(bool json, const IngestStats& stats) {
    if (json) {
        std::cout << stats.to_json().dump() << "\n";
        return;
    }
    static constexpr Kind kinds[] = {Kind::content, Kind::directory, Kind::revision,
                                     Kind::release, Kind::snapshot};
    for (Kind k : kinds)
        std::cout << "inserted\t" << kind_name(k) << "\t" << stats.inserted_of(k) << "\n";
    for (Kind k : kinds)
        std::cout << "duplicates\t" << kind_name(k) << "\t" << stats.duplicates_of(k)
                  << "\n";
    std::cout << "origins_added\t" << stats.origins_added << "\n";
    std::cout << "visits_added\t" << stats.visits_added << "\n";
}

void emit_gen_report(bool json, const GenReport& r) {
    emit_kv(json, {{"revisions", r.revisions},
                   {"contents", r.contents},
                   {"directories", r.directories},
                   {"origins", r.origins},
                   {"snapshots", r.snapshots},
                   {"visits", r.visits},
                   {"reuse_draws", r.reuse_draws},
                   {"first_time", r.first_time},
                   {"last_time", r.last_time}});
}

void emit_build_report(bool json, const BuildReport& r) {
    std::vector<std::pair<std::string, nlohmann::json>> kv{
        {"model", model_name(r.model)},
        {"processed", r.processed},
        {"skipped", r.skipped},
        {"rows", r.rows},
        {"approximate", r.approximate}};
    if (r.watermark) {
        kv.emplace_back("watermark_time", r.watermark->t);
        kv.emplace_back("watermark_revision", to_string(r.watermark->id));
        kv.emplace_back("watermark_processed", r.watermark->processed);
    }
    emit_kv(json, kv);
}

void emit_model_stats(bool json, const ModelStats& st) {
    if (json) {
        std::cout << st.to_json().dump() << "\n";
        return;
    }
    std::string m = model_name(st.model);
    std::cout << m << "\trevisions\t" << st.revisions << "\n";
    std::cout << m << "\tcontents\t" << st.contents << "\n";
    std::cout << m << "\tdirectories\t" << st.directories << "\n";
    std::cout << m << "\tentity_total\t" << st.entity_total() << "\n";
    for (const auto& [name, n] : st.relations)
        std::cout << m << "\t" << name << "\t" << n << "\n";
    std::cout << m << "\trelation_total\t" << st.relation_total() << "\n";
}

void emit_histogram(bool json, const Histogram& h, bool cumulative) {
    if (cumulative) {
        for (const auto& [k, n] : h.cumulative()) {
            if (json)
                std::cout << nlohmann::json{{"k", k}, {"count_ge", n}}.dump() << "\n";
            else
                std::cout << k << "\t" << n << "\n";
        }
        return;
    }
    for (const auto& [k, n] : h.counts) {
        if (json)
            std::cout << nlohmann::json{{"k", k}, {"count", n}}.dump() << "\n";
        else
            std::cout << k << "\t" << n << "\n";
    }
}

SampleSpec make_sample_spec(const std::optional<std::string>& hash_prefix,
                            const std::optional<uint64_t>& min_size,
                            const std::optional<uint64_t>& max_size,
                            const std::optional<std::string>& extension) {
    SampleSpec spec;
    spec.hash_prefix = hash_prefix;
    spec.min_size = min_size;
    spec.max_size = max_size;
    spec.extension = extension;
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "prov — provenance indexes and analytics over a deduplicated artifact graph.\n"
        "Data rows go to stdout (TSV; --json for line-delimited JSON); diagnostics to\n"
        "stderr.  A config file holds the same keys as the long flags (key=value, with\n"
        "[subcommand] sections); command-line flags override it."};
    app.fallthrough();

    std::string store_path;
    bool json = false;
    unsigned jobs = 1;
    bool timestamps = false;
    app.add_option("--store", store_path, "Store directory")->envname("PROV_STORE");
    app.add_flag("--json", json, "Line-delimited JSON output instead of TSV");
    app.add_option("--jobs", jobs, "Worker threads for parallel-friendly steps")
        ->check(CLI::Range(1u, 256u));
    app.add_flag("--timestamps", timestamps, "Print a wall-clock banner before output");
    app.set_config("--config", "", "Config file (key=value; same keys as flags)");
    app.require_subcommand(1);

    // ingest ------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Load artifact histories into the store");
    ingest->fallthrough();
    ingest->require_subcommand(1);

    std::string dump_input = "-";
    auto* ingest_dump = ingest->add_subcommand(
        "dump", "Load a JSONL dump (optionally .gz) produced by this tool or compatible");
    ingest_dump->fallthrough();
    ingest_dump->add_option("--input", dump_input, "Dump file, or - for stdin");

    std::string repo_path, git_origin;
    int64_t git_time = 0;
    auto* ingest_git =
        ingest->add_subcommand("git", "Ingest a local git repository bit-exactly");
    ingest_git->fallthrough();
    ingest_git->add_option("--repo", repo_path, "Path to the repository")->required();
    ingest_git->add_option("--origin", git_origin,
                           "Origin URL recorded for the visit (default file://<repo>)");
    ingest_git->add_option("--time", git_time, "Visit timestamp (epoch seconds)");

    // visit ---------------------------------------------------------------
    auto* visit = app.add_subcommand("visit", "Visit journal operations");
    visit->fallthrough();
    visit->require_subcommand(1);
    std::string v_origin, v_snapshot;
    int64_t v_time = 0;
    auto* visit_record =
        visit->add_subcommand("record", "Record one crawl of an origin at a snapshot");
    visit_record->fallthrough();
    visit_record->add_option("--origin", v_origin, "Origin URL")->required();
    visit_record->add_option("--snapshot", v_snapshot, "Snapshot id (snp:<hex>)")
        ->required();
    visit_record->add_option("--time", v_time, "Visit timestamp (epoch seconds)");

    // gen -----------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate synthetic corpora");
    gen->fallthrough();
    gen->require_subcommand(1);

    uint64_t seed = 1;
    unsigned g_origins = 1;
    std::string g_revisions = "100";
    int64_t g_start = 1262304000;
    double g_years = 10.0, g_rate = 0.27, g_alpha = -1.5, g_fork = 0.05;
    unsigned g_branch = 8, g_files = 8, g_edits = 4;
    uint64_t g_pool = 0;
    unsigned g_min = 16, g_max = 256, g_kcap = 1000;
    std::string g_reuse = "chain";
    bool g_nodata = false;
    auto* gen_synth = gen->add_subcommand(
        "synth", "Random growing corpus with power-law content reuse");
    gen_synth->fallthrough();
    gen_synth->add_option("--seed", seed, "Generator seed")->required();
    gen_synth->add_option("--origins", g_origins, "Number of origins");
    gen_synth->add_option("--revisions", g_revisions, "Revisions per origin (N or LO:HI)");
    gen_synth->add_option("--start-time", g_start, "History start (epoch seconds)");
    gen_synth->add_option("--years", g_years, "Simulated span in years");
    gen_synth->add_option("--rate", g_rate, "Exponential production rate per year");
    gen_synth->add_option("--dup-alpha", g_alpha, "Content-reuse power-law exponent (< -1)");
    gen_synth->add_option("--fork-prob", g_fork, "Branching probability");
    gen_synth->add_option("--dir-branching", g_branch, "Subdirectories per root");
    gen_synth->add_option("--files-per-dir", g_files, "File slots per subdirectory");
    gen_synth->add_option("--edits", g_edits, "Slots rewritten per revision");
    gen_synth->add_option("--min-size", g_min, "Minimum content bytes");
    gen_synth->add_option("--max-size", g_max, "Maximum content bytes");
    gen_synth->add_option("--content-pool", g_pool, "Reuse pool size (0 = derived)");
    gen_synth->add_option("--k-cap", g_kcap, "Maximum planted multiplicity");
    gen_synth->add_option("--reuse", g_reuse, "Reuse arrangement")
        ->check(CLI::IsMember({"chain", "planned"}));
    gen_synth->add_flag("--no-data", g_nodata, "Store content lengths only, no payload");

    uint64_t x1_revisions = 5, x1_contents = 3;
    auto* gen_x1 = gen->add_subcommand(
        "extreme1", "Extreme corpus: every revision shares one unchanged root");
    gen_x1->fallthrough();
    gen_x1->add_option("--revisions", x1_revisions, "Revision count");
    gen_x1->add_option("--contents", x1_contents, "Contents in the shared root");

    uint64_t x2_revisions = 5, x2_files = 3;
    auto* gen_x2 = gen->add_subcommand(
        "extreme2", "Extreme corpus: every revision is entirely disjoint");
    gen_x2->fallthrough();
    gen_x2->add_option("--revisions", x2_revisions, "Revision count");
    gen_x2->add_option("--files", x2_files, "Files per revision");

    // build -----------------------------------------------------------------
    std::string b_model;
    bool strict_order = false;
    auto* build = app.add_subcommand("build", "Build or extend one model's index");
    build->fallthrough();
    build->add_option("--model", b_model, "Provenance model")
        ->required()
        ->check(CLI::IsMember({"flat", "recursive", "compact"}));
    build->add_flag("--strict-order", strict_order,
                    "Fail on out-of-order revisions instead of healing permissively");

    // query -----------------------------------------------------------------
    auto* query = app.add_subcommand("query", "Occurrence queries");
    query->fallthrough();
    query->require_subcommand(1);
    std::string q_content, q_model;
    auto* query_first =
        query->add_subcommand("first", "Earliest recorded occurrence of a content");
    auto* query_all = query->add_subcommand("all", "Stream every occurrence of a content");
    for (auto* q : {query_first, query_all}) {
        q->fallthrough();
        q->add_option("--content", q_content, "Content id (cnt:<hex>)")->required();
        q->add_option("--model", q_model, "Provenance model (default: any built)")
            ->check(CLI::IsMember({"flat", "recursive", "compact"}));
    }

    // stats -----------------------------------------------------------------
    std::string s_model = "all";
    auto* stats_cmd = app.add_subcommand("stats", "Index entity/relation counts and ratios");
    stats_cmd->fallthrough();
    stats_cmd->add_option("--model", s_model, "Model, or all built models")
        ->check(CLI::IsMember({"flat", "recursive", "compact", "all"}));

    // analyze ---------------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze", "Corpus measurements");
    analyze->fallthrough();
    analyze->require_subcommand(1);

    std::string a_model;
    std::optional<int64_t> a_after, a_upto;
    auto* an_growth = analyze->add_subcommand(
        "growth", "Monthly counts of original revisions and contents");
    an_growth->fallthrough();
    an_growth->add_option("--model", a_model, "Clock source model (default: any built)")
        ->check(CLI::IsMember({"flat", "recursive", "compact"}));
    an_growth->add_option("--after", a_after, "Keep events strictly after this time");
    an_growth->add_option("--upto", a_upto, "Keep events at or before this time");

    std::string f_target = "revisions";
    std::optional<int64_t> f_wlo, f_whi;
    auto* an_fit = analyze->add_subcommand(
        "fit", "Exponential fit of a growth series, with doubling time");
    an_fit->fallthrough();
    an_fit->add_option("--target", f_target, "Series to fit")
        ->check(CLI::IsMember({"revisions", "contents"}));
    an_fit->add_option("--model", a_model, "Clock source model (default: any built)")
        ->check(CLI::IsMember({"flat", "recursive", "compact"}));
    an_fit->add_option("--after", a_after, "Keep events strictly after this time");
    an_fit->add_option("--upto", a_upto, "Keep events at or before this time");
    an_fit->add_option("--window-start", f_wlo, "Fit window start (epoch seconds)");
    an_fit->add_option("--window-end", f_whi, "Fit window end (epoch seconds)");

    std::string m_layer = "content-revision", m_fit;
    std::optional<std::string> sp_prefix;
    std::optional<uint64_t> sp_min, sp_max;
    bool m_cumulative = false;
    auto* an_mult = analyze->add_subcommand(
        "mult", "Multiplication-factor histogram (k -> artifacts)");
    an_mult->fallthrough();
    an_mult->add_option("--layer", m_layer, "Counting layer")
        ->check(CLI::IsMember({"content-revision", "revision-origin"}));
    an_mult->add_option("--hash-prefix", sp_prefix, "Sample by digest hex prefix");
    an_mult->add_option("--min-size", sp_min, "Sample by minimum content bytes");
    an_mult->add_option("--max-size", sp_max, "Sample by maximum content bytes");
    an_mult->add_flag("--cumulative", m_cumulative, "Emit the >=k tail instead");
    an_mult->add_option("--fit", m_fit, "Append a power-law fit over k in LO:HI");

    std::optional<std::string> sl_ext;
    auto* an_sloc = analyze->add_subcommand(
        "sloc", "Normalized-line multiplication across distinct contents");
    an_sloc->fallthrough();
    an_sloc->add_option("--extension", sl_ext, "Only contents named *<suffix>");
    an_sloc->add_option("--hash-prefix", sp_prefix, "Sample by digest hex prefix");
    an_sloc->add_option("--min-size", sp_min, "Sample by minimum content bytes");
    an_sloc->add_option("--max-size", sp_max, "Sample by maximum content bytes");

    std::string o_mode = "simple";
    auto* an_origins = analyze->add_subcommand("origins", "Per-origin revision counts");
    an_origins->fallthrough();
    an_origins->add_option("--mode", o_mode, "Attribution mode")
        ->check(CLI::IsMember({"simple", "most-fit-fork"}));

    // store / validate --------------------------------------------------------
    auto* store_cmd = app.add_subcommand("store", "Store-level operations");
    store_cmd->fallthrough();
    store_cmd->require_subcommand(1);
    auto* store_stats = store_cmd->add_subcommand("stats", "Node, origin, and visit counts");
    store_stats->fallthrough();

    auto* validate = app.add_subcommand(
        "validate", "Re-hash nodes, check references, directory acyclicity, visits");
    validate->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::cerr << "# effective configuration\n" << app.config_to_str(true, false);
    if (timestamps) {
        char buf[64];
        std::time_t now = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        std::cout << "# run " << buf << "\n";
    }

    try {
        if (ingest_dump->parsed()) {
            auto store = open_store(store_path, true);
            IngestStats stats;
            if (dump_input == "-")
                stats = load_dump(store, std::cin);
            else
                stats = load_dump_file(store, dump_input);
            emit_ingest_stats(json, stats);
        } else if (ingest_git->parsed()) {
            auto store = open_store(store_path, true);
            std::string origin = git_origin.empty()
                                     ? "file://" + std::filesystem::absolute(repo_path)
                                                       .lexically_normal()
                                                       .string()
                                     : git_origin;
            auto [stats, v] = ingest_git_repository(store, repo_path, origin, git_time);
            emit_ingest_stats(json, stats);
            emit_kv(json, {{"visit_seq", v.seq},
                           {"visit_origin", v.origin},
                           {"visit_snapshot", to_string(v.snapshot)}});
        } else if (visit_record->parsed()) {
            auto store = open_store(store_path, true);
            auto snap = parse_node_id(v_snapshot, store.hash().len);
            if (!snap || snap->kind != Kind::snapshot)
                raise(Errc::invalid_argument, "not a snapshot id: " + v_snapshot);
            auto w = store.begin_write();
            auto v = w.record_visit(v_origin, v_time, *snap);
            w.commit();
            emit_kv(json, {{"visit_seq", v.seq},
                           {"visit_origin", v.origin},
                           {"visit_time", v.time},
                           {"visit_snapshot", to_string(v.snapshot)}});
        } else if (gen_synth->parsed()) {
            auto store = open_store(store_path, true);
            GenParams params(seed);
            params.n_origins = g_origins;
            params.revisions_per_origin = parse_revspec(g_revisions);
            params.start_time = g_start;
            params.years = g_years;
            params.rate = g_rate;
            params.dup_alpha = g_alpha;
            params.fork_probability = g_fork;
            params.dir_branching = g_branch;
            params.files_per_dir = g_files;
            params.edits_per_revision = g_edits;
            params.min_size = g_min;
            params.max_size = g_max;
            params.content_pool = g_pool;
            params.k_cap = g_kcap;
            params.with_data = !g_nodata;
            params.reuse = g_reuse == "chain" ? ReuseModel::chain : ReuseModel::planned;
            emit_gen_report(json, generate(store, params));
        } else if (gen_x1->parsed()) {
            auto store = open_store(store_path, true);
            emit_gen_report(json,
                            generate_extreme_shared_root(store, x1_revisions,
                                                         static_cast<uint32_t>(x1_contents)));
        } else if (gen_x2->parsed()) {
            auto store = open_store(store_path, true);
            emit_gen_report(json,
                            generate_extreme_disjoint(store, x2_revisions,
                                                      static_cast<uint32_t>(x2_files)));
        } else if (build->parsed()) {
            auto store = open_store(store_path, true);
            emit_build_report(
                json, build_index(store, parse_model(b_model), BuildOptions(strict_order)));
        } else if (query_first->parsed()) {
            auto store = open_store(store_path, false);
            Model m = q_model.empty() ? pick_built_model(store) : parse_model(q_model);
            auto occ = first_occurrence(store, m, parse_content_id(store, q_content));
            if (!occ) {
                std::cerr << "no recorded occurrence of " << q_content << "\n";
                return 1;
            }
            std::cout << (json ? occ->to_json().dump() : occ->to_line()) << "\n";
        } else if (query_all->parsed()) {
            auto store = open_store(store_path, false);
            Model m = q_model.empty() ? pick_built_model(store) : parse_model(q_model);
            auto stream = all_occurrences(store, m, parse_content_id(store, q_content));
            uint64_t emitted = 0;
            while (auto occ = stream.next()) {
                std::cout << (json ? occ->to_json().dump() : occ->to_line()) << "\n";
                if (++emitted == 1) std::cout.flush();  // let consumers start early
            }
            if (emitted == 0) {
                std::cerr << "no recorded occurrence of " << q_content << "\n";
                return 1;
            }
        } else if (stats_cmd->parsed()) {
            auto store = open_store(store_path, false);
            std::vector<ModelStats> all;
            if (s_model == "all") {
                for (Model m : {Model::flat, Model::recursive, Model::compact})
                    if (store.has_keyspace(mks::clock(m)) && load_watermark(store, m))
                        all.push_back(model_stats(store, m));
                if (all.empty())
                    raise(Errc::invalid_argument,
                          "no model index is built; run: prov build --model "
                          "flat|recursive|compact");
            } else {
                all.push_back(model_stats(store, parse_model(s_model)));
            }
            for (const auto& st : all) emit_model_stats(json, st);
            if (all.size() > 1) {
                auto ratios = compare_models(all);
                if (json) {
                    std::cout << nlohmann::json{{"ratios", ratios.to_json()}}.dump() << "\n";
                } else {
                    for (const auto& e : ratios.entries)
                        std::cout << "ratio\t" << e.numerator << "/" << e.denominator << "\t"
                                  << e.formatted << "\n";
                }
            }
        } else if (an_growth->parsed() || an_fit->parsed()) {
            auto store = open_store(store_path, false);
            GrowthOptions opts;
            if (!a_model.empty()) opts.clock_model = parse_model(a_model);
            if (a_after || a_upto) {
                TimestampFilter f;
                f.after = a_after;
                f.upto = a_upto;
                opts.filter = f;
            }
            auto [revs, conts] = original_growth_series(store, opts);
            if (an_growth->parsed()) {
                auto emit_series = [&](const char* name, const TimeBucketSeries& s) {
                    for (const auto& b : s.buckets) {
                        if (json)
                            std::cout << nlohmann::json{{"series", name},
                                                        {"bucket",
                                                         caldet::month_label(b.month_idx)},
                                                        {"count", b.count}}
                                             .dump()
                                      << "\n";
                        else
                            std::cout << name << "\t" << caldet::month_label(b.month_idx)
                                      << "\t" << b.count << "\n";
                    }
                };
                emit_series("revisions", revs);
                emit_series("contents", conts);
            } else {
                std::optional<std::pair<int64_t, int64_t>> window;
                if (f_wlo || f_whi)
                    window = {f_wlo.value_or(INT64_MIN), f_whi.value_or(INT64_MAX)};
                auto fit =
                    fit_exponential(f_target == "revisions" ? revs : conts, window);
                if (json) {
                    std::cout << fit.to_json().dump() << "\n";
                } else {
                    emit_kv(false, {{"target", f_target},
                                    {"r_per_year", fit.r},
                                    {"doubling_months",
                                     std::isfinite(fit.doubling_months)
                                         ? nlohmann::json(fit.doubling_months)
                                         : nlohmann::json("inf")},
                                    {"amplitude", fit.a},
                                    {"residual", fit.residual},
                                    {"window_start", fit.window_start},
                                    {"window_end", fit.window_end},
                                    {"buckets_used", fit.buckets_used}});
                }
            }
        } else if (an_mult->parsed()) {
            auto store = open_store(store_path, false);
            MultLayer layer = m_layer == "content-revision" ? MultLayer::content_revision
                                                            : MultLayer::revision_origin;
            auto spec = make_sample_spec(sp_prefix, sp_min, sp_max, std::nullopt);
            auto hist = multiplication_histogram(store, layer, spec);
            emit_histogram(json, hist, m_cumulative);
            if (!m_fit.empty()) {
                auto [lo, hi] = parse_range(m_fit);
                auto fit = fit_power_law(hist, lo, hi);
                if (json) {
                    std::cout << nlohmann::json{{"fit", fit.to_json()}}.dump() << "\n";
                } else {
                    emit_kv(false, {{"alpha", fit.alpha},
                                    {"amplitude", fit.amplitude},
                                    {"residual", fit.residual},
                                    {"k_min", fit.k_min},
                                    {"k_max", fit.k_max},
                                    {"points", fit.points},
                                    {"method", fit.method}});
                }
            }
        } else if (an_sloc->parsed()) {
            auto store = open_store(store_path, false);
            auto report =
                sloc_multiplication(store, make_sample_spec(sp_prefix, sp_min, sp_max, sl_ext));
            if (json) {
                nlohmann::json cps = nlohmann::json::object();
                for (const auto& [k, n] : report.contents_per_sloc.counts)
                    cps[std::to_string(k)] = n;
                nlohmann::json lh = nlohmann::json::object();
                for (const auto& [k, n] : report.length_hist.counts)
                    lh[std::to_string(k)] = n;
                std::cout << nlohmann::json{{"sampled_contents", report.sampled_contents},
                                            {"distinct_slocs", report.distinct_slocs},
                                            {"contents_per_sloc", cps},
                                            {"length_hist", lh}}
                                 .dump()
                          << "\n";
            } else {
                std::cout << "sampled_contents\t" << report.sampled_contents << "\n";
                std::cout << "distinct_slocs\t" << report.distinct_slocs << "\n";
                for (const auto& [k, n] : report.contents_per_sloc.counts)
                    std::cout << "contents_per_sloc\t" << k << "\t" << n << "\n";
                for (const auto& [k, n] : report.length_hist.counts)
                    std::cout << "length\t" << k << "\t" << n << "\n";
            }
        } else if (an_origins->parsed()) {
            auto store = open_store(store_path, false);
            auto report = origin_sizes(store, o_mode == "simple"
                                                  ? OriginSizeMode::simple
                                                  : OriginSizeMode::most_fit_fork);
            if (json) {
                for (const auto& [url, n] : report.sizes)
                    std::cout << nlohmann::json{{"origin", url}, {"revisions", n}}.dump()
                              << "\n";
            } else {
                std::cout << report.to_tsv();
            }
        } else if (store_stats->parsed()) {
            auto store = open_store(store_path, false);
            std::vector<std::pair<std::string, nlohmann::json>> kv;
            static constexpr Kind kinds[] = {Kind::content, Kind::directory, Kind::revision,
                                             Kind::release, Kind::snapshot};
            for (Kind k : kinds)
                kv.emplace_back(std::string(kind_name(k)), store.count(k));
            kv.emplace_back("origins", store.origins().size());
            kv.emplace_back("visits", store.visits().size());
            kv.emplace_back("submodule_edges", store.submodule_edge_count());
            kv.emplace_back("hash", store.hash().name);
            kv.emplace_back("store_id", store.store_id());
            emit_kv(json, kv);
        } else if (validate->parsed()) {
            auto store = open_store(store_path, false);
            auto report = store.validate(jobs);
            for (const auto& f : report.findings) {
                if (json)
                    std::cout << nlohmann::json{{"what", finding_name(f.what)},
                                                {"node", f.node},
                                                {"detail", f.detail}}
                                     .dump()
                              << "\n";
                else
                    std::cout << finding_name(f.what) << "\t" << f.node << "\t" << f.detail
                              << "\n";
            }
            std::cerr << "checked " << report.nodes_checked << " nodes, "
                      << report.findings.size() << " findings\n";
            if (!report.ok()) return 1;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
