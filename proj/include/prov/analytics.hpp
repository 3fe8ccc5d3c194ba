#pragma once
// Measurements over an ingested corpus: growth of original artifacts over
// time with exponential fits, multiplication-factor histograms with
// power-law fits, normalized-source-line statistics, and per-origin size
// measures.  Everything here is read-only and deterministic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prov/errors.hpp"
#include "prov/ids.hpp"
#include "prov/isochrone.hpp"
#include "prov/models.hpp"
#include "prov/nodes.hpp"
#include "prov/store.hpp"

namespace prov {

namespace caldet {

// Howard Hinnant's civil-calendar algorithms (proleptic Gregorian).
inline int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

struct Civil {
    int64_t year;
    unsigned month;
    unsigned day;
};

inline Civil civil_from_days(int64_t z) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned month = mp < 10 ? mp + 3 : mp - 9;
    return {y + (month <= 2), month, d};
}

inline int64_t floordiv(int64_t a, int64_t b) {
    return a / b - ((a % b != 0) && ((a % b < 0) != (b < 0)));
}

// Month index: year*12 + (month-1), over epoch seconds.
inline int64_t month_index(int64_t epoch_secs) {
    Civil c = civil_from_days(floordiv(epoch_secs, 86400));
    return c.year * 12 + static_cast<int64_t>(c.month) - 1;
}

inline int64_t month_start(int64_t month_idx) {
    int64_t y = floordiv(month_idx, 12);
    unsigned m = static_cast<unsigned>(month_idx - y * 12) + 1;
    return days_from_civil(y, m, 1) * 86400;
}

inline std::string month_label(int64_t month_idx) {
    int64_t y = floordiv(month_idx, 12);
    unsigned m = static_cast<unsigned>(month_idx - y * 12) + 1;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u", static_cast<long long>(y), m);
    return buf;
}

}  // namespace caldet

// Monthly event counts, contiguous (zero-filled) over the covered span.
struct TimeBucketSeries {
    struct Bucket {
        int64_t month_idx;  // year*12 + month-1
        int64_t start;      // epoch seconds of the month's first instant
        uint64_t count;
    };
    std::vector<Bucket> buckets;

    uint64_t total() const {
        uint64_t s = 0;
        for (auto& b : buckets) s += b.count;
        return s;
    }
    uint64_t nonzero_buckets() const {
        uint64_t s = 0;
        for (auto& b : buckets) s += b.count > 0;
        return s;
    }
    std::string to_csv() const {
        std::string out = "bucket,count\n";
        for (auto& b : buckets)
            out += caldet::month_label(b.month_idx) + "," + std::to_string(b.count) + "\n";
        return out;
    }

    static TimeBucketSeries from_counts(const std::map<int64_t, uint64_t>& by_month) {
        TimeBucketSeries s;
        if (by_month.empty()) return s;
        int64_t lo = by_month.begin()->first;
        int64_t hi = by_month.rbegin()->first;
        s.buckets.reserve(static_cast<size_t>(hi - lo + 1));
        auto it = by_month.begin();
        for (int64_t m = lo; m <= hi; ++m) {
            uint64_t c = 0;
            if (it != by_month.end() && it->first == m) {
                c = it->second;
                ++it;
            }
            s.buckets.push_back({m, caldet::month_start(m), c});
        }
        return s;
    }
};

struct GrowthOptions {
    // Default filter: drop non-positive timestamps and anything after the
    // corpus cutoff (the newest revision time).
    std::optional<TimestampFilter> filter;
    // Which model's clock dates contents; default picks any built model,
    // falling back to an in-memory computation when none exists.
    std::optional<Model> clock_model;

    explicit GrowthOptions() {}
};

// (original revisions per month, original contents per month).  A revision
// is original once at its own timestamp (Merkle dedup makes "original" just
// "distinct"); a content is original once, at the timestamp of the earliest
// revision containing it.
inline std::pair<TimeBucketSeries, TimeBucketSeries> original_growth_series(
    DagStore& store, GrowthOptions opts = GrowthOptions()) {
    TimestampFilter filter;
    if (opts.filter) {
        filter = *opts.filter;
    } else {
        filter.after = 0;
        if (auto last = store.raw().last_key("revtime"))
            filter.upto = keys::read_ts(*last);
    }

    std::map<int64_t, uint64_t> rev_months;
    {
        auto stream = store.revisions_chronological();
        while (stream.next())
            if (filter.admits(stream.time()))
                ++rev_months[caldet::month_index(stream.time())];
    }

    std::map<int64_t, uint64_t> cont_months;
    auto add_content = [&](int64_t t) {
        if (filter.admits(t)) ++cont_months[caldet::month_index(t)];
    };

    std::optional<Model> source = opts.clock_model;
    if (!source) {
        for (Model m : {Model::flat, Model::compact, Model::recursive})
            if (load_watermark(store, m) && store.has_keyspace(mks::clock(m))) {
                source = m;
                break;
            }
    }
    if (source) {
        auto scan = store.raw().scan(mks::clock(*source),
                                     std::string(1, static_cast<char>(Kind::content)));
        while (scan.next()) add_content(keys::read_ts(scan.value()));
    } else {
        // No index built: date contents with a throwaway in-memory clock.
        ProvenanceClock clock;
        auto stream = store.revisions_chronological();
        while (stream.next()) {
            auto iso = compute_isochrone(store, clock, stream.id());
            for (const auto& e : iso.inner_content_edges)
                if (!clock.contains(e.content)) add_content(iso.timestamp);
            update_clock(clock, iso);
        }
    }

    return {TimeBucketSeries::from_counts(rev_months),
            TimeBucketSeries::from_counts(cont_months)};
}

struct ExponentialFit {
    double a = 0;                // amplitude at 1970 (monthly count units)
    double r = 0;                // rate per year
    double doubling_months = 0;  // 12·ln2 / r; infinity when r ≈ 0
    double residual = 0;         // RMS of ln-count residuals
    int64_t window_start = 0;    // epoch seconds, inclusive
    int64_t window_end = 0;
    uint64_t buckets_used = 0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"a", a},
                         {"r_per_year", r},
                         {"residual", residual},
                         {"window_start", window_start},
                         {"window_end", window_end},
                         {"buckets_used", buckets_used}};
        j["doubling_months"] = std::isfinite(doubling_months)
                                   ? nlohmann::json(doubling_months)
                                   : nlohmann::json("inf");
        return j;
    }
};

// Least squares of ln(count) against years on the nonzero buckets inside the
// window (given in epoch seconds, inclusive; default = whole series).
inline ExponentialFit fit_exponential(const TimeBucketSeries& series,
                                      std::optional<std::pair<int64_t, int64_t>> window =
                                          std::nullopt) {
    std::vector<std::pair<double, double>> pts;  // (years since 1970, ln count)
    int64_t w_lo = window ? window->first : INT64_MIN;
    int64_t w_hi = window ? window->second : INT64_MAX;
    int64_t seen_lo = 0, seen_hi = 0;
    bool any = false;
    for (auto& b : series.buckets) {
        if (b.start < w_lo || b.start > w_hi || b.count == 0) continue;
        int64_t next_start = caldet::month_start(b.month_idx + 1);
        double mid = 0.5 * (static_cast<double>(b.start) + static_cast<double>(next_start));
        pts.emplace_back(mid / static_cast<double>(SECONDS_PER_YEAR),
                         std::log(static_cast<double>(b.count)));
        if (!any || b.start < seen_lo) seen_lo = b.start;
        if (!any || b.start > seen_hi) seen_hi = b.start;
        any = true;
    }
    if (pts.size() < 8)
        raise(Errc::insufficient_data,
              "exponential fit needs at least 8 nonzero buckets, have " +
                  std::to_string(pts.size()));

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(pts.size());
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;

    ExponentialFit fit;
    fit.r = slope;
    fit.a = std::exp(intercept);
    fit.doubling_months = std::abs(slope) < 1e-12
                              ? std::numeric_limits<double>::infinity()
                              : 12.0 * std::log(2.0) / slope;
    double ss = 0;
    for (auto& [x, y] : pts) {
        double e = y - (intercept + slope * x);
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / n);
    fit.window_start = seen_lo;
    fit.window_end = seen_hi;
    fit.buckets_used = pts.size();
    return fit;
}

// Histogram over multiplication factors: k → number of artifacts occurring
// in exactly k distinct contexts.
struct Histogram {
    std::map<uint64_t, uint64_t> counts;

    uint64_t artifacts() const {
        uint64_t s = 0;
        for (auto& [k, c] : counts) s += c;
        return s;
    }
    uint64_t weighted_total() const {
        uint64_t s = 0;
        for (auto& [k, c] : counts) s += k * c;
        return s;
    }
    // Number of artifacts with multiplication ≥ k, per distinct k (always
    // including k=1); non-increasing.
    std::vector<std::pair<uint64_t, uint64_t>> cumulative() const {
        std::vector<std::pair<uint64_t, uint64_t>> out;
        uint64_t running = artifacts();
        uint64_t prev_count = 0;
        bool saw_one = counts.count(1) > 0;
        if (!saw_one) out.emplace_back(1, running);
        for (auto& [k, c] : counts) {
            running -= prev_count;
            out.emplace_back(k, running);
            prev_count = c;
        }
        return out;
    }
    std::string to_csv() const {
        std::string out = "k,count\n";
        for (auto& [k, c] : counts)
            out += std::to_string(k) + "," + std::to_string(c) + "\n";
        return out;
    }
};

// Sampling controls shared by the artifact-level measurements.
struct SampleSpec {
    // Keep only artifacts whose digest's hex form starts with this prefix.
    std::optional<std::string> hash_prefix;
    // Content length bounds, inclusive.
    std::optional<uint64_t> min_size;
    std::optional<uint64_t> max_size;
    // Keep only contents recorded at least once under a name with this
    // suffix (e.g. ".c").
    std::optional<std::string> extension;

    explicit SampleSpec() {}

    bool admits_digest(const NodeId& id) const {
        if (!hash_prefix) return true;
        std::string hex = detail::to_hex(id.digest());
        return hex.size() >= hash_prefix->size() &&
               hex.compare(0, hash_prefix->size(), *hash_prefix) == 0;
    }
    bool admits_size(uint64_t length) const {
        if (min_size && length < *min_size) return false;
        if (max_size && length > *max_size) return false;
        return true;
    }
};

enum class MultLayer { content_revision, revision_origin };

namespace detail {

// Content ids recorded at least once under a name with the given suffix.
inline std::unordered_set<NodeId, NodeIdHash> contents_with_suffix(DagStore& store,
                                                                   const std::string& suffix) {
    std::unordered_set<NodeId, NodeIdHash> out;
    auto scan = store.raw().scan("nodes", std::string(1, static_cast<char>(Kind::directory)));
    while (scan.next()) {
        auto node = store.decode_node(Kind::directory, scan.value());
        for (const auto& e : std::get<Directory>(node).entries) {
            if (e.target.kind != Kind::content) continue;
            if (e.name.size() >= suffix.size() &&
                e.name.compare(e.name.size() - suffix.size(), suffix.size(), suffix) == 0)
                out.insert(e.target);
        }
    }
    return out;
}

// Revisions reachable from every visit of each origin (snapshot branch
// targets resolved through releases, then parent closure).
inline std::vector<std::pair<std::string, std::vector<NodeId>>> origin_revision_sets(
    DagStore& store) {
    auto visits = store.visits();
    if (visits.empty())
        raise(Errc::missing_visit_journal, "store has no recorded visits");

    std::map<std::string, std::vector<NodeId>> snapshots_by_origin;
    for (auto& v : visits) snapshots_by_origin[v.origin].push_back(v.snapshot);

    std::vector<std::pair<std::string, std::vector<NodeId>>> out;
    for (auto& [url, snaps] : snapshots_by_origin) {
        std::unordered_set<NodeId, NodeIdHash> seen;
        std::vector<NodeId> stack;
        auto push_rev = [&](const NodeId& r) {
            if (seen.insert(r).second) stack.push_back(r);
        };
        for (auto& sid : snaps) {
            auto node = store.get_node(sid);
            if (!node) raise(Errc::missing_node, "visit snapshot missing: " + to_string(sid));
            for (auto& b : std::get<Snapshot>(*node).branches) {
                if (b.target.kind == Kind::revision) {
                    push_rev(b.target);
                } else if (b.target.kind == Kind::release) {
                    auto rel = store.get_node(b.target);
                    if (!rel) continue;
                    auto& release = std::get<Release>(*rel);
                    if (release.target.kind == Kind::revision) push_rev(release.target);
                }
            }
        }
        while (!stack.empty()) {
            NodeId r = stack.back();
            stack.pop_back();
            auto rev = store.get_revision(r);
            if (!rev) continue;
            for (auto& p : rev->parents) push_rev(p);
        }
        std::vector<NodeId> revs(seen.begin(), seen.end());
        std::sort(revs.begin(), revs.end());
        out.emplace_back(url, std::move(revs));
    }
    return out;
}

}  // namespace detail

// Multiplication histogram for one layer:
//   content_revision — distinct revisions containing each sampled content
//                      (path multiplicity ignored); uses the flat index when
//                      built, otherwise walks every revision.
//   revision_origin  — distinct origins whose histories reach each revision;
//                      needs the visit journal.
inline Histogram multiplication_histogram(DagStore& store, MultLayer layer,
                                          SampleSpec spec = SampleSpec()) {
    Histogram hist;
    if (layer == MultLayer::content_revision) {
        auto admits = [&](const NodeId& c) {
            if (!spec.admits_digest(c)) return false;
            if (spec.min_size || spec.max_size) {
                auto v = store.raw().get("nodes", keys::node_key(c));
                if (!v) return false;
                if (!spec.admits_size(keys::read_be64(*v))) return false;
            }
            return true;
        };
        if (store.has_keyspace(mks::flat_cor) && load_watermark(store, Model::flat)) {
            auto scan = store.raw().scan(mks::flat_cor, "");
            const size_t len = store.hash().len;
            std::optional<NodeId> cur;
            bool cur_admitted = false;
            std::unordered_set<NodeId, NodeIdHash> revs;
            auto flush = [&] {
                if (cur && cur_admitted && !revs.empty()) ++hist.counts[revs.size()];
                revs.clear();
            };
            while (scan.next()) {
                auto row = detail::parse_occ_key(scan.key(), len);
                if (!cur || !(row.a == *cur)) {
                    flush();
                    cur = row.a;
                    cur_admitted = admits(row.a);
                }
                if (cur_admitted) revs.insert(row.r);
            }
            flush();
        } else {
            std::unordered_map<NodeId, uint64_t, NodeIdHash> per_content;
            auto stream = store.revisions_chronological();
            while (stream.next()) {
                auto rev = store.get_revision(stream.id());
                if (!rev) continue;
                std::unordered_set<NodeId, NodeIdHash> in_this;
                walk_contents(store, rev->root, [&](const NodeId& c, std::string) {
                    if (in_this.insert(c).second && admits(c)) ++per_content[c];
                });
            }
            for (auto& [c, k] : per_content) ++hist.counts[k];
        }
    } else {
        auto sets = detail::origin_revision_sets(store);
        std::unordered_map<NodeId, uint64_t, NodeIdHash> per_revision;
        for (auto& [url, revs] : sets)
            for (auto& r : revs)
                if (spec.admits_digest(r)) ++per_revision[r];
        for (auto& [r, k] : per_revision) ++hist.counts[k];
    }
    return hist;
}

struct PowerLawFit {
    double alpha = 0;      // log-log slope
    double amplitude = 0;  // count at k=1 implied by the fit
    double residual = 0;   // weighted RMS of ln-count residuals
    uint64_t k_min = 0, k_max = 0;
    uint64_t points = 0;
    std::string method = "wls-loglog";

    nlohmann::json to_json() const {
        return {{"alpha", alpha},     {"amplitude", amplitude}, {"residual", residual},
                {"k_min", k_min},     {"k_max", k_max},         {"points", points},
                {"method", method}};
    }
};

// Weighted least squares of ln(count) against ln(k) over the simple
// (non-cumulative) histogram restricted to [k_min, k_max]; weights are the
// counts themselves.
inline PowerLawFit fit_power_law(const Histogram& hist, uint64_t k_min, uint64_t k_max) {
    std::vector<std::pair<double, double>> pts;  // (ln k, ln count)
    std::vector<double> w;
    for (auto& [k, c] : hist.counts) {
        if (k < k_min || k > k_max || c == 0) continue;
        pts.emplace_back(std::log(static_cast<double>(k)),
                         std::log(static_cast<double>(c)));
        w.push_back(static_cast<double>(c));
    }
    if (pts.size() < 6)
        raise(Errc::insufficient_data,
              "power-law fit needs at least 6 distinct k values in range, have " +
                  std::to_string(pts.size()));

    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        sw += w[i];
        sx += w[i] * pts[i].first;
        sy += w[i] * pts[i].second;
        sxx += w[i] * pts[i].first * pts[i].first;
        sxy += w[i] * pts[i].first * pts[i].second;
    }
    const double denom = sw * sxx - sx * sx;
    const double slope = (sw * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / sw;

    PowerLawFit fit;
    fit.alpha = slope;
    fit.amplitude = std::exp(intercept);
    double ss = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        double e = pts[i].second - (intercept + slope * pts[i].first);
        ss += w[i] * e * e;
    }
    fit.residual = std::sqrt(ss / sw);
    fit.k_min = k_min;
    fit.k_max = k_max;
    fit.points = pts.size();
    return fit;
}

// Normalizes one source line: removes every space, tab, and carriage return,
// then strips trailing semicolons.  Returns absent when nothing is left.
inline std::optional<std::string> normalize_sloc(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r') out.push_back(c);
    while (!out.empty() && out.back() == ';') out.pop_back();
    if (out.empty()) return std::nullopt;
    return out;
}

struct SlocReport {
    Histogram contents_per_sloc;  // k → #distinct normalized lines in k contents
    Histogram length_hist;        // normalized length → #distinct normalized lines
    uint64_t sampled_contents = 0;
    uint64_t distinct_slocs = 0;

    nlohmann::json to_json() const {
        return {{"sampled_contents", sampled_contents},
                {"distinct_slocs", distinct_slocs}};
    }
};

// Normalized-line multiplication across distinct contents, plus the length
// distribution of the distinct normalized lines.  Lines participate only at
// normalized lengths in [4, 1000].  Sampled contents must carry data bytes.
inline SlocReport sloc_multiplication(DagStore& store, SampleSpec spec = SampleSpec()) {
    std::optional<std::unordered_set<NodeId, NodeIdHash>> named;
    if (spec.extension) named = detail::contents_with_suffix(store, *spec.extension);

    SlocReport report;
    std::unordered_map<std::string, uint64_t> per_line;

    auto scan = store.raw().scan("nodes", std::string(1, static_cast<char>(Kind::content)));
    const size_t len = store.hash().len;
    while (scan.next()) {
        NodeId id = keys::parse_node_key(scan.key(), len);
        if (!spec.admits_digest(id)) continue;
        uint64_t length = keys::read_be64(scan.value());
        if (!spec.admits_size(length)) continue;
        if (named && !named->count(id)) continue;

        auto node = store.decode_node(Kind::content, scan.value());
        auto& content = std::get<Content>(node);
        if (!content.data)
            raise(Errc::no_content_data, "sampled content has no data: " + to_string(id));
        ++report.sampled_contents;

        std::unordered_set<std::string> lines_here;
        const std::string& data = *content.data;
        size_t pos = 0;
        while (pos <= data.size()) {
            size_t nl = data.find('\n', pos);
            std::string_view line(data.data() + pos,
                                  (nl == std::string::npos ? data.size() : nl) - pos);
            pos = nl == std::string::npos ? data.size() + 1 : nl + 1;
            auto norm = normalize_sloc(line);
            if (!norm || norm->size() < 4 || norm->size() > 1000) continue;
            lines_here.insert(std::move(*norm));
        }
        for (auto& l : lines_here) ++per_line[l];
    }

    report.distinct_slocs = per_line.size();
    for (auto& [line, k] : per_line) {
        ++report.contents_per_sloc.counts[k];
        ++report.length_hist.counts[line.size()];
    }
    return report;
}

enum class OriginSizeMode { simple, most_fit_fork };

struct OriginSizeReport {
    OriginSizeMode mode = OriginSizeMode::simple;
    std::vector<std::pair<std::string, uint64_t>> sizes;  // url → revisions, url-sorted

    uint64_t total() const {
        uint64_t s = 0;
        for (auto& [url, n] : sizes) s += n;
        return s;
    }
    std::string to_tsv() const {
        std::string out;
        for (auto& [url, n] : sizes) out += url + "\t" + std::to_string(n) + "\n";
        return out;
    }
};

// Per-origin revision counts.  simple counts each (origin, revision) pair;
// most_fit_fork attributes each revision only to the origin holding the most
// revisions (ties to the lexicographically smallest URL).
inline OriginSizeReport origin_sizes(DagStore& store, OriginSizeMode mode) {
    auto sets = detail::origin_revision_sets(store);
    OriginSizeReport report;
    report.mode = mode;

    if (mode == OriginSizeMode::simple) {
        for (auto& [url, revs] : sets) report.sizes.emplace_back(url, revs.size());
        return report;
    }

    // Sort origins by (revision count desc, url asc); the first origin that
    // contains a revision is its argmax attribution.
    std::vector<size_t> order(sets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (sets[a].second.size() != sets[b].second.size())
            return sets[a].second.size() > sets[b].second.size();
        return sets[a].first < sets[b].first;
    });

    std::unordered_set<NodeId, NodeIdHash> assigned;
    std::map<std::string, uint64_t> by_url;
    for (auto& [url, revs] : sets) by_url[url] = 0;
    for (size_t idx : order)
        for (auto& r : sets[idx].second)
            if (assigned.insert(r).second) ++by_url[sets[idx].first];
    for (auto& [url, n] : by_url) report.sizes.emplace_back(url, n);
    return report;
}

}  // namespace prov
