// A guided tour of the library: create a store, author a tiny history by
// hand, ingest it, build all three provenance indexes, and run the queries
// and analyses the tool exposes.  Everything here uses the public headers
// only; build and run it from the build tree:
//
//   ./demos/provenance_tour [store-dir]
//
// With no argument it works in a throwaway directory under /tmp.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

#include <prov/prov.hpp>

using namespace prov;

namespace {

void banner(const std::string& title) {
    std::cout << "\n== " << title << " ==\n";
}

}  // namespace

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    fs::path store_dir;
    if (argc > 1) {
        store_dir = argv[1];
    } else {
        store_dir = fs::temp_directory_path() /
                    ("provenance-tour-" + std::to_string(::getpid()));
    }
    std::cout << "store: " << store_dir << "\n";

    // ---- 1. Create a store and write a three-revision history ------------
    //
    // Two file contents, two directory trees, three revisions:
    //
    //   revA (t=100)  root D1 = { f1 -> c1 }
    //   revB (t=200)  root D2 = { f1 -> c1, f2 -> c2 }   parent: revA
    //   revC (t=300)  root D2                            parent: revB
    //
    // c1 is born in A and then carried forward; D2 is fully reused by C.
    banner("authoring a small history");
    DagStore store(store_dir, storage::OpenMode::create);

    NodeId c1, c2, d1, d2, revA, revB, revC;
    {
        auto w = store.begin_write();

        c1 = w.put(Content{9, std::string("hello-f1\n")}).first;
        c2 = w.put(Content{9, std::string("hello-f2\n")}).first;

        Directory t1;
        t1.entries.push_back({"f1", c1, 0100644});
        d1 = w.put(t1).first;

        Directory t2;
        t2.entries.push_back({"f1", c1, 0100644});
        t2.entries.push_back({"f2", c2, 0100644});
        d2 = w.put(t2).first;

        auto rev = [&](NodeId root, int64_t t, std::vector<NodeId> parents,
                       std::string msg) {
            Revision r;
            r.root = root;
            r.parents = std::move(parents);
            r.author = r.committer = "Tour Guide <tour@example.org>";
            r.author_date = r.committer_date = Timestamp{t, "+0000"};
            r.message = std::move(msg);
            return w.put(r).first;
        };
        revA = rev(d1, 100, {}, "start\n");
        revB = rev(d2, 200, {revA}, "add f2\n");
        revC = rev(d2, 300, {revB}, "no tree change\n");

        Snapshot tip;
        tip.branches = {{"refs/heads/main", revC}};
        auto snap = w.put(tip).first;
        w.record_visit("https://example.org/tour", 1000, snap);
    }
    std::cout << "c1   = " << to_string(c1) << "\n"
              << "revA = " << to_string(revA) << "\n"
              << "revC = " << to_string(revC) << "\n";
    std::cout << "contents: " << store.count(Kind::content)
              << ", directories: " << store.count(Kind::directory)
              << ", revisions: " << store.count(Kind::revision) << "\n";

    // ---- 2. Build the three provenance indexes ---------------------------
    banner("building the provenance indexes");
    for (auto m : {Model::flat, Model::recursive, Model::compact}) {
        auto report = build_index(store, m, BuildOptions{});
        std::cout << model_name(m) << ": processed " << report.processed
                  << " revisions, wrote " << report.rows << " rows\n";
    }

    // ---- 3. Query: where does c1 first appear, and everywhere after? -----
    banner("querying occurrences of c1");
    auto first = first_occurrence(store, Model::compact, c1);
    if (first) std::cout << "first: " << first->to_line() << "\n";
    std::cout << "all (flat index):\n";
    auto stream = all_occurrences(store, Model::flat, c1);
    while (auto occ = stream.next()) std::cout << "  " << occ->to_line() << "\n";

    // ---- 4. Compare index sizes ------------------------------------------
    banner("index size comparison");
    auto flat = model_stats(store, Model::flat);
    auto cmp = model_stats(store, Model::compact);
    auto ratios = compare_models({flat, cmp});
    std::cout << "flat rows: " << flat.relation_total()
              << ", compact rows: " << cmp.relation_total() << "\n";
    for (const auto& r : ratios.entries)
        std::cout << "  " << r.numerator << "/" << r.denominator << " = "
                  << r.formatted << "\n";

    // ---- 5. A larger synthetic corpus for the analyses --------------------
    banner("synthesizing a larger corpus");
    fs::path big_dir = store_dir.string() + "-big";
    DagStore big(big_dir, storage::OpenMode::create);
    GenParams params(/*seed=*/7);
    params.revisions_per_origin = RevisionCountSpec(1200);
    params.years = 6.0;
    auto gen = generate(big, params);
    std::cout << "generated " << gen.revisions << " revisions over "
              << gen.contents << " contents\n";
    build_index(big, Model::flat, BuildOptions{});

    // Growth curve and exponential fit on the revision series.
    auto [revs, conts] = original_growth_series(big, GrowthOptions{});
    auto fit = fit_exponential(revs, std::nullopt);
    std::printf("revision growth: r = %.3f / year, doubling every %.1f months\n",
                fit.r, fit.doubling_months);

    // Content multiplication: how many revisions does each content reach?
    auto hist = multiplication_histogram(big, MultLayer::content_revision,
                                         SampleSpec{});
    std::cout << "multiplication histogram: " << hist.artifacts()
              << " contents, " << hist.weighted_total()
              << " occurrences, max k = " << hist.counts.rbegin()->first
              << "\n";

    // Line-level sharing inside the sampled contents.
    auto sloc = sloc_multiplication(big, SampleSpec{});
    std::cout << "line sharing: " << sloc.sampled_contents
              << " contents carry " << sloc.distinct_slocs
              << " distinct normalized lines\n";

    // Per-origin sizes (one origin here, so one row).
    auto sizes = origin_sizes(big, OriginSizeMode::simple);
    std::cout << "origin sizes:\n" << sizes.to_tsv();

    // ---- 6. Integrity check ----------------------------------------------
    banner("validating both stores");
    auto v1 = store.validate(2);
    auto v2 = big.validate(2);
    std::cout << "small store: " << v1.nodes_checked << " nodes, "
              << v1.findings.size() << " findings\n"
              << "large store: " << v2.nodes_checked << " nodes, "
              << v2.findings.size() << " findings\n";

    bool ok = v1.ok() && v2.ok() && first.has_value();
    std::cout << "\n" << (ok ? "tour complete" : "tour FAILED") << "\n";
    return ok ? 0 : 1;
}
