#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>

#include <prov/prov.hpp>

#include "testutil.hpp"

using namespace prov;
using testutil::TempDir;
using testutil::insert_toy_corpus;

TEST_CASE("calendar math round-trips and labels months", "[analytics]") {
    CHECK(caldet::month_index(0) == 1970 * 12);
    CHECK(caldet::month_label(1970 * 12) == "1970-01");

    // 2020-06-15T12:00:00Z
    CHECK(caldet::month_index(1592222400) == 2020 * 12 + 5);
    CHECK(caldet::month_start(2020 * 12 + 5) == 1590969600);
    CHECK(caldet::month_label(2020 * 12 + 5) == "2020-06");

    // Pre-epoch instants land in 1969-12.
    CHECK(caldet::month_index(-1) == 1969 * 12 + 11);
    CHECK(caldet::month_label(1969 * 12 + 11) == "1969-12");

    for (int64_t t : {int64_t(0), int64_t(100), int64_t(1262304000),
                      int64_t(1592222400), int64_t(-86400)}) {
        int64_t m = caldet::month_index(t);
        CHECK(caldet::month_start(m) <= t);
        CHECK(t < caldet::month_start(m + 1));
    }
}

TEST_CASE("bucket series zero-fill the months between events", "[analytics]") {
    std::map<int64_t, uint64_t> by_month{{2020 * 12 + 5, 2}, {2020 * 12 + 8, 1}};
    auto s = TimeBucketSeries::from_counts(by_month);
    REQUIRE(s.buckets.size() == 4);
    CHECK(s.buckets[0].count == 2);
    CHECK(s.buckets[1].count == 0);
    CHECK(s.buckets[2].count == 0);
    CHECK(s.buckets[3].count == 1);
    CHECK(s.buckets[1].start == caldet::month_start(2020 * 12 + 6));
    CHECK(s.total() == 3);
    CHECK(s.nonzero_buckets() == 2);
    CHECK(s.to_csv() == "bucket,count\n2020-06,2\n2020-07,0\n2020-08,0\n2020-09,1\n");

    CHECK(TimeBucketSeries::from_counts({}).buckets.empty());
}

TEST_CASE("growth series date artifacts at first appearance", "[analytics]") {
    TempDir tmp("an-growth-toy");
    DagStore store(tmp.path(), storage::OpenMode::create);
    {
        auto w = store.begin_write();
        insert_toy_corpus(w);
    }

    // Without any index the series come from an in-memory pass.
    auto [revs0, conts0] = original_growth_series(store);
    REQUIRE(revs0.buckets.size() == 1);
    CHECK(revs0.buckets[0].month_idx == 1970 * 12);
    CHECK(revs0.total() == 3);
    REQUIRE(conts0.buckets.size() == 1);
    CHECK(conts0.total() == 2);  // c1 first seen at t=100, c2 at t=200

    // A built index must give the identical answer.
    build_index(store, Model::flat);
    auto [revs1, conts1] = original_growth_series(store);
    CHECK(revs1.to_csv() == revs0.to_csv());
    CHECK(conts1.to_csv() == conts0.to_csv());

    build_index(store, Model::recursive);
    GrowthOptions via_rec;
    via_rec.clock_model = Model::recursive;
    auto [revs2, conts2] = original_growth_series(store, via_rec);
    CHECK(revs2.to_csv() == revs0.to_csv());
    CHECK(conts2.to_csv() == conts0.to_csv());

    // An explicit window drops whatever falls outside it.
    GrowthOptions windowed;
    TimestampFilter f;
    f.after = 150;
    windowed.filter = f;
    auto [revs3, conts3] = original_growth_series(store, windowed);
    CHECK(revs3.total() == 2);   // t=200, t=300
    CHECK(conts3.total() == 1);  // only c2 arrives after the cut
}

TEST_CASE("exponential fit recovers a synthetic rate", "[analytics]") {
    const int64_t m0 = 2000 * 12;  // 2000-01
    const double r_true = 0.27;
    std::map<int64_t, uint64_t> by_month;
    double x0 = 0;
    for (int64_t m = m0; m < m0 + 36; ++m) {
        double mid = 0.5 * (static_cast<double>(caldet::month_start(m)) +
                            static_cast<double>(caldet::month_start(m + 1)));
        double x = mid / static_cast<double>(SECONDS_PER_YEAR);
        if (m == m0) x0 = x;
        by_month[m] =
            static_cast<uint64_t>(std::llround(1e9 * std::exp(r_true * (x - x0))));
    }
    auto series = TimeBucketSeries::from_counts(by_month);
    auto fit = fit_exponential(series);
    CHECK(fit.buckets_used == 36);
    CHECK(std::abs(fit.r - r_true) < 1e-6);
    CHECK(fit.residual < 1e-6);
    CHECK(std::abs(fit.doubling_months - 12.0 * std::log(2.0) / r_true) < 1e-4);
    CHECK(fit.window_start == caldet::month_start(m0));

    // Restricting the window drops the early buckets.
    auto part = fit_exponential(
        series, std::make_pair(caldet::month_start(m0 + 6), caldet::month_start(m0 + 35)));
    CHECK(part.buckets_used == 30);
    CHECK(part.window_start == caldet::month_start(m0 + 6));
    CHECK(std::abs(part.r - r_true) < 1e-6);

    // A flat series has no growth: infinite doubling time, "inf" in JSON.
    std::map<int64_t, uint64_t> flat;
    for (int64_t m = m0; m < m0 + 12; ++m) flat[m] = 1000;
    auto flat_fit = fit_exponential(TimeBucketSeries::from_counts(flat));
    CHECK(std::isinf(flat_fit.doubling_months));
    CHECK(flat_fit.to_json()["doubling_months"] == "inf");

    // Fewer than eight nonzero buckets is not enough signal.
    std::map<int64_t, uint64_t> thin;
    for (int64_t m = m0; m < m0 + 7; ++m) thin[m] = 10;
    CHECK_THROWS_MATCHES(fit_exponential(TimeBucketSeries::from_counts(thin)), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::insufficient_data;
                         }));
}

TEST_CASE("growth fit on a generated corpus lands near the configured rate",
          "[analytics]") {
    TempDir tmp("an-growth-gen");
    DagStore store(tmp.path(), storage::OpenMode::create);
    GenParams params(5);
    params.revisions_per_origin = RevisionCountSpec(1200);
    params.years = 6.0;  // default rate 0.27/year
    auto report = generate(store, params);
    build_index(store, Model::flat);

    auto [revs, conts] = original_growth_series(store);
    CHECK(revs.total() == 1200);

    auto fit = fit_exponential(revs);
    CHECK(std::abs(fit.r - params.rate) < 0.08);
    CHECK(fit.doubling_months > 12.0 * std::log(2.0) / (params.rate + 0.08));
    CHECK(fit.doubling_months < 12.0 * std::log(2.0) / (params.rate - 0.08));

    // Every generated content is dated inside the corpus window, so the
    // content series accounts for each one exactly once.
    CHECK(conts.total() == report.contents);
    auto cfit = fit_exponential(conts);  // must have enough signal to fit
    CHECK(cfit.buckets_used >= 8);
}

TEST_CASE("histogram totals and cumulative tail", "[analytics]") {
    Histogram h;
    h.counts = {{2, 3}, {5, 1}};
    CHECK(h.artifacts() == 4);
    CHECK(h.weighted_total() == 11);
    auto cum = h.cumulative();
    REQUIRE(cum.size() == 3);  // k=1 synthesized
    CHECK(cum[0] == std::make_pair(uint64_t(1), uint64_t(4)));
    CHECK(cum[1] == std::make_pair(uint64_t(2), uint64_t(4)));
    CHECK(cum[2] == std::make_pair(uint64_t(5), uint64_t(1)));

    Histogram g;
    g.counts = {{1, 2}, {3, 1}};
    auto gc = g.cumulative();
    REQUIRE(gc.size() == 2);
    CHECK(gc[0] == std::make_pair(uint64_t(1), uint64_t(3)));
    CHECK(gc[1] == std::make_pair(uint64_t(3), uint64_t(1)));
    CHECK(g.to_csv() == "k,count\n1,2\n3,1\n");
}

TEST_CASE("power-law fit recovers alpha from exact counts", "[analytics]") {
    for (double alpha : {-1.5, -1.9, -2.2}) {
        Histogram h;
        for (uint64_t k = 1; k <= 40; ++k)
            h.counts[k] = static_cast<uint64_t>(
                std::llround(1e12 * std::pow(static_cast<double>(k), alpha)));
        auto fit = fit_power_law(h, 1, 40);
        INFO("alpha " << alpha);
        CHECK(std::abs(fit.alpha - alpha) < 1e-6);
        CHECK(std::abs(fit.amplitude - 1e12) / 1e12 < 1e-4);
        CHECK(fit.points == 40);
        CHECK(fit.method == "wls-loglog");
    }

    Histogram thin;
    for (uint64_t k = 1; k <= 5; ++k) thin.counts[k] = 1000 / k;
    CHECK_THROWS_MATCHES(fit_power_law(thin, 1, 5), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::insufficient_data;
                         }));
}

TEST_CASE("power-law fit survives sampling noise", "[analytics]") {
    const double alpha = -2.2;
    const uint64_t k_cap = 1000;
    std::vector<double> cdf(k_cap);
    double acc = 0;
    for (uint64_t k = 1; k <= k_cap; ++k) {
        acc += std::pow(static_cast<double>(k), alpha);
        cdf[k - 1] = acc;
    }
    for (auto& v : cdf) v /= acc;

    std::mt19937_64 rng(20240901);
    Histogram h;
    for (int i = 0; i < 100000; ++i) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        uint64_t k = static_cast<uint64_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin() + 1);
        ++h.counts[k];
    }
    auto fit = fit_power_law(h, 1, 30);
    CHECK(std::abs(fit.alpha - alpha) < 0.1);
}

TEST_CASE("content multiplication matches the hand count", "[analytics]") {
    TempDir tmp("an-mult-toy");
    DagStore store(tmp.path(), storage::OpenMode::create);
    testutil::ToyCorpus ids;
    {
        auto w = store.begin_write();
        ids = insert_toy_corpus(w);
    }

    // c1 sits in three revisions, c2 in two.
    Histogram want;
    want.counts = {{3, 1}, {2, 1}};

    // Store walk (no index yet) and flat-index grouping must agree.
    auto walked = multiplication_histogram(store, MultLayer::content_revision);
    CHECK(walked.counts == want.counts);
    build_index(store, Model::flat);
    auto indexed = multiplication_histogram(store, MultLayer::content_revision);
    CHECK(indexed.counts == want.counts);
    CHECK(indexed.artifacts() == 2);
    CHECK(indexed.weighted_total() == 5);

    // Digest-prefix sampling keeps only matching artifacts.
    SampleSpec only_c1;
    only_c1.hash_prefix = detail::to_hex(ids.c1.digest()).substr(0, 4);
    REQUIRE(detail::to_hex(ids.c2.digest()).substr(0, 4) != *only_c1.hash_prefix);
    auto picked = multiplication_histogram(store, MultLayer::content_revision, only_c1);
    CHECK(picked.counts == std::map<uint64_t, uint64_t>{{3, 1}});

    // Both toy contents are nine bytes long; a min-size above that empties
    // the sample.
    SampleSpec too_big;
    too_big.min_size = 10;
    CHECK(multiplication_histogram(store, MultLayer::content_revision, too_big)
              .artifacts() == 0);
    SampleSpec nine;
    nine.min_size = 9;
    nine.max_size = 9;
    CHECK(multiplication_histogram(store, MultLayer::content_revision, nine)
              .artifacts() == 2);
}

TEST_CASE("origin attribution distinguishes shared history", "[analytics]") {
    TempDir tmp("an-origins");
    DagStore store(tmp.path(), storage::OpenMode::create);
    testutil::ToyCorpus ids;
    {
        auto w = store.begin_write();
        ids = insert_toy_corpus(w);

        Snapshot s1;
        s1.branches = {{"refs/heads/main", ids.revC}};
        auto s1i = w.put(s1).first;
        w.record_visit("https://example.org/o1", 1000, s1i);

        // The second origin reaches revB only through an annotated release.
        Release rel;
        rel.target = ids.revB;
        rel.name = "v1";
        auto reli = w.put(rel).first;
        Snapshot s2;
        s2.branches = {{"refs/tags/v1", reli}};
        auto s2i = w.put(s2).first;
        w.record_visit("https://example.org/o2", 1001, s2i);
    }

    // revA and revB belong to both histories, revC only to the first.
    auto hist = multiplication_histogram(store, MultLayer::revision_origin);
    CHECK(hist.counts == std::map<uint64_t, uint64_t>{{1, 1}, {2, 2}});

    auto simple = origin_sizes(store, OriginSizeMode::simple);
    REQUIRE(simple.sizes.size() == 2);
    CHECK(simple.sizes[0] == std::make_pair(std::string("https://example.org/o1"),
                                            uint64_t(3)));
    CHECK(simple.sizes[1] == std::make_pair(std::string("https://example.org/o2"),
                                            uint64_t(2)));
    CHECK(simple.total() == 5);
    CHECK(simple.to_tsv() ==
          "https://example.org/o1\t3\nhttps://example.org/o2\t2\n");

    // Argmax attribution hands every shared revision to the larger origin.
    auto fork = origin_sizes(store, OriginSizeMode::most_fit_fork);
    REQUIRE(fork.sizes.size() == 2);
    CHECK(fork.sizes[0].second == 3);
    CHECK(fork.sizes[1].second == 0);
    CHECK(fork.total() == 3);

    // Without a visit journal the attribution is undefined.
    TempDir tmp2("an-origins-empty");
    DagStore bare(tmp2.path(), storage::OpenMode::create);
    CHECK_THROWS_MATCHES(origin_sizes(bare, OriginSizeMode::simple), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::missing_visit_journal;
                         }));
    CHECK_THROWS_MATCHES(
        multiplication_histogram(bare, MultLayer::revision_origin), Error,
        Catch::Matchers::Predicate<Error>(
            [](const Error& e) { return e.code() == Errc::missing_visit_journal; }));
}

TEST_CASE("line normalization drops layout and trailing semicolons",
          "[analytics]") {
    auto norm = [](std::string_view s) { return normalize_sloc(s); };
    CHECK(norm("  int x = 1;  ") == std::optional<std::string>("intx=1"));
    CHECK(norm("a=b ;") == std::optional<std::string>("a=b"));
    CHECK(norm("foo\r") == std::optional<std::string>("foo"));
    CHECK(norm("\tab\t") == std::optional<std::string>("ab"));
    CHECK_FALSE(norm(";;"));
    CHECK_FALSE(norm("   "));
    CHECK_FALSE(norm(""));
}

TEST_CASE("line multiplication counts distinct containing contents",
          "[analytics]") {
    TempDir tmp("an-sloc");
    DagStore store(tmp.path(), storage::OpenMode::create);
    auto make_content = [](const std::string& s) {
        return Content{s.size(), s};
    };
    {
        auto w = store.begin_write();
        // "shared line here" appears in all three; the second copy inside the
        // first content must count once.  "ab" is below the length floor, the
        // 1001-char line above the ceiling, ";;" normalizes to nothing.
        auto a = w.put(make_content("int x = 1;\nshared line here\nshared line "
                                    "here\nab\n;;\n" +
                                    std::string(1001, 'y') + "\n")).first;
        auto b = w.put(make_content("shared line here\nonly in b\n")).first;
        auto c = w.put(make_content("shared line here\n")).first;
        w.put(make_directory({{"a.c", a, 0100644},
                              {"b.c", b, 0100644},
                              {"c.txt", c, 0100644}}));
    }

    SampleSpec c_only;
    c_only.extension = ".c";
    auto report = sloc_multiplication(store, c_only);
    CHECK(report.sampled_contents == 2);
    CHECK(report.distinct_slocs == 3);
    CHECK(report.contents_per_sloc.counts ==
          std::map<uint64_t, uint64_t>{{1, 2}, {2, 1}});
    CHECK(report.length_hist.counts ==
          std::map<uint64_t, uint64_t>{{6, 1}, {7, 1}, {14, 1}});

    // Without the extension filter the third content joins the sample.
    auto all = sloc_multiplication(store);
    CHECK(all.sampled_contents == 3);
    CHECK(all.contents_per_sloc.counts ==
          std::map<uint64_t, uint64_t>{{1, 2}, {3, 1}});

    // Metadata-only contents cannot be line-sampled.
    TempDir tmp2("an-sloc-meta");
    DagStore lean(tmp2.path(), storage::OpenMode::create);
    {
        auto w = lean.begin_write();
        Content full{4, std::string("abcd")};
        auto id = compute_node_id(full, lean.hash());
        w.put_as(id, Content{4, std::nullopt});
    }
    CHECK_THROWS_MATCHES(sloc_multiplication(lean), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::no_content_data;
                         }));
}
