#pragma once
// Deterministic synthetic corpus generation: seeded histories whose
// statistical shape (exponential production rate, power-law content reuse)
// is known in advance, plus the two closed-form extreme corpora (all
// revisions sharing one root; all revisions pairwise disjoint).
//
// Everything is reproducible from (params, seed): a single RNG stream drives
// all draws in a fixed order, content bytes derive from per-rank counters,
// and no unordered container is ever iterated during emission.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prov/errors.hpp"
#include "prov/ids.hpp"
#include "prov/manifest.hpp"
#include "prov/nodes.hpp"
#include "prov/store.hpp"

namespace prov {

// How content reuse is arranged across revisions.
enum class ReuseModel {
    // Per-origin persistent trees mutated a few file slots per revision;
    // reused contents drawn from a Zipf-ranked pool.  Rich directory sharing
    // across revisions; realized multiplication factors mix draw counts with
    // slot lifetimes.
    chain,
    // Single linear history where each content is planted into an exact
    // number of revisions drawn from the target power law.  Multiplication
    // factors match dup_alpha by construction; directory sharing is
    // incidental.
    planned,
};

struct RevisionCountSpec {
    uint32_t lo = 100;
    uint32_t hi = 100;  // inclusive; lo == hi means a fixed count

    explicit RevisionCountSpec(uint32_t fixed = 100) : lo(fixed), hi(fixed) {}
    RevisionCountSpec(uint32_t lo_, uint32_t hi_) : lo(lo_), hi(hi_) {}
};

struct GenParams {
    uint64_t seed = 1;
    uint32_t n_origins = 1;
    RevisionCountSpec revisions_per_origin;
    int64_t start_time = 1262304000;  // 2010-01-01T00:00:00Z
    double years = 10.0;              // simulated span
    double rate = 0.27;               // per-year exponential production rate (> 0)
    double dup_alpha = -1.5;          // content-reuse power-law exponent (< -1)
    uint32_t dir_branching = 8;       // subdirectories under each root
    uint32_t files_per_dir = 8;       // file slots per subdirectory (chain)
    uint32_t edits_per_revision = 4;  // slots rewritten per revision (chain)
    double fork_probability = 0.05;   // chance a revision branches off an older one
    uint32_t min_size = 16;           // content payload bytes
    uint32_t max_size = 256;
    uint64_t content_pool = 0;        // reuse pool / planned content count (0 = derived)
    uint32_t k_cap = 1000;            // max planted multiplicity (planned)
    bool with_data = true;            // store payload bytes, not just lengths
    ReuseModel reuse = ReuseModel::chain;

    explicit GenParams(uint64_t s = 1) : seed(s) {}
};

struct GenReport {
    uint64_t revisions = 0;
    uint64_t contents = 0;     // distinct contents materialized
    uint64_t directories = 0;  // distinct directory nodes
    uint64_t origins = 0;
    uint64_t snapshots = 0;
    uint64_t visits = 0;
    uint64_t reuse_draws = 0;  // content slot assignments drawn
    int64_t first_time = 0;
    int64_t last_time = 0;

    nlohmann::json to_json() const {
        return {{"revisions", revisions}, {"contents", contents},
                {"directories", directories}, {"origins", origins},
                {"snapshots", snapshots}, {"visits", visits},
                {"reuse_draws", reuse_draws},
                {"first_time", first_time}, {"last_time", last_time}};
    }
};

namespace gen_detail {

// Counter-based generator for content payloads: byte streams depend only on
// (seed, rank), never on draw order.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::string content_bytes(uint64_t seed, uint64_t rank, uint32_t min_size,
                                 uint32_t max_size) {
    std::string head = "content " + std::to_string(rank) + "\n";
    uint64_t h = splitmix64(seed ^ splitmix64(rank + 0x51ed2701));
    uint64_t span = static_cast<uint64_t>(max_size) - min_size + 1;
    size_t size = static_cast<size_t>(min_size + (h % span));
    if (size < head.size()) return head.substr(0, std::max<size_t>(size, 1));
    std::string out = head;
    uint64_t state = splitmix64(h);
    while (out.size() < size) {
        state = splitmix64(state);
        for (int i = 0; i < 8 && out.size() < size; ++i)
            out.push_back(static_cast<char>('a' + ((state >> (8 * i)) & 0x0f)));
    }
    return out;
}

// Fenwick tree over fixed positive weights, supporting O(log n) sampling of
// an index with probability proportional to its weight.
class WeightedSampler {
public:
    explicit WeightedSampler(const std::vector<double>& weights)
        : tree_(weights.size() + 1, 0.0) {
        for (size_t i = 0; i < weights.size(); ++i) {
            size_t j = i + 1;
            tree_[j] += weights[i];
            size_t parent = j + (j & (~j + 1));
            if (parent < tree_.size()) tree_[parent] += tree_[j];
        }
        total_ = 0;
        for (double w : weights) total_ += w;
        size_ = weights.size();
    }

    size_t sample(double u) const {  // u in [0,1)
        double target = u * total_;
        size_t pos = 0;
        size_t mask = 1;
        while ((mask << 1) <= size_) mask <<= 1;
        for (; mask; mask >>= 1) {
            size_t next = pos + mask;
            if (next <= size_ && tree_[next] <= target) {
                target -= tree_[next];
                pos = next;
            }
        }
        return pos < size_ ? pos : size_ - 1;  // guard fp edge at u→1
    }

private:
    std::vector<double> tree_;
    double total_ = 0;
    size_t size_ = 0;
};

// Timestamps in [start, start + years] whose density follows e^{rate·t}:
// inverse-CDF transform of uniform draws.
inline int64_t growth_timestamp(double u, int64_t start, double years, double rate) {
    double t_years = std::log1p(u * std::expm1(rate * years)) / rate;
    return start + static_cast<int64_t>(std::llround(t_years * SECONDS_PER_YEAR));
}

inline void check_params(const GenParams& p) {
    if (p.rate <= 0) raise(Errc::invalid_argument, "rate must be > 0");
    if (p.dup_alpha >= -1) raise(Errc::invalid_argument, "dup_alpha must be < -1");
    if (p.years <= 0) raise(Errc::invalid_argument, "years must be > 0");
    if (p.n_origins == 0) raise(Errc::invalid_argument, "need at least one origin");
    if (p.revisions_per_origin.lo == 0 || p.revisions_per_origin.lo > p.revisions_per_origin.hi)
        raise(Errc::invalid_argument, "bad revisions_per_origin range");
    if (p.dir_branching == 0 || p.files_per_dir == 0 || p.edits_per_revision == 0)
        raise(Errc::invalid_argument, "tree shape parameters must be positive");
    if (p.min_size > p.max_size) raise(Errc::invalid_argument, "min_size > max_size");
    if (p.k_cap == 0) raise(Errc::invalid_argument, "k_cap must be positive");
}

// Shared emission helper: materializes a content rank at most once.
class ContentEmitter {
public:
    ContentEmitter(DagWriter& w, const GenParams& p, const HashSpec& spec)
        : writer_(w), params_(p), spec_(spec) {}

    NodeId id_for(uint64_t rank) {
        if (rank < cache_.size() && cache_[rank].len != 0) return cache_[rank];
        std::string bytes = content_bytes(params_.seed, rank, params_.min_size,
                                          params_.max_size);
        Content c;
        c.length = bytes.size();
        NodeId id;
        if (params_.with_data) {
            c.data = std::move(bytes);
            id = writer_.put(c).first;
        } else {
            // Metadata-only corpora still need real ids: hash the payload.
            Content full;
            full.length = c.length;
            full.data = std::move(bytes);
            id = compute_node_id(full, spec_);
            writer_.put_as(id, c);
        }
        if (rank >= cache_.size()) cache_.resize(rank + 1);
        cache_[rank] = id;
        ++materialized_;
        return cache_[rank];
    }

    uint64_t materialized() const { return materialized_; }

private:
    DagWriter& writer_;
    const GenParams& params_;
    HashSpec spec_;
    std::vector<NodeId> cache_;
    uint64_t materialized_ = 0;
};

}  // namespace gen_detail

// Generates a synthetic corpus into the store: origins with revision chains,
// per the params' growth and reuse models, each origin closed by a snapshot
// and one visit.  Fully reproducible from (params, seed).
inline GenReport generate(DagStore& store, const GenParams& params) {
    gen_detail::check_params(params);
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GenReport report;
    const HashSpec spec = store.hash();
    DagWriter writer = store.begin_write();
    gen_detail::ContentEmitter contents(writer, params, spec);

    const uint32_t B = params.dir_branching;
    const uint32_t F = params.files_per_dir;

    // In-progress revision of one origin: planned timestamp plus either the
    // full slot matrix (chain mode: 0 = empty, else 1 + pool rank) or the
    // sorted planted content ranks (planned mode).
    struct PlannedRev {
        int64_t t;
        uint32_t origin;
        uint32_t index;                // position within the origin's chain
        uint32_t parent;               // index within origin; UINT32_MAX = none
        std::vector<uint64_t> slots;
    };

    std::vector<PlannedRev> plan;
    std::vector<uint32_t> origin_rev_count(params.n_origins, 0);

    if (params.reuse == ReuseModel::chain) {
        const uint64_t pool =
            params.content_pool ? params.content_pool : 4096;
        std::vector<double> weights(pool);
        const double s = 1.0 / (std::abs(params.dup_alpha) - 1.0);
        for (uint64_t i = 0; i < pool; ++i)
            weights[i] = std::pow(static_cast<double>(i + 1), -s);
        gen_detail::WeightedSampler sampler(weights);

        for (uint32_t o = 0; o < params.n_origins; ++o) {
            uint32_t n = params.revisions_per_origin.lo;
            if (params.revisions_per_origin.hi > params.revisions_per_origin.lo)
                n += static_cast<uint32_t>(
                    rng() % (params.revisions_per_origin.hi - params.revisions_per_origin.lo + 1));
            origin_rev_count[o] = n;

            std::vector<int64_t> times(n);
            for (auto& t : times)
                t = gen_detail::growth_timestamp(unit(rng), params.start_time,
                                                 params.years, params.rate);
            std::sort(times.begin(), times.end());

            std::vector<std::vector<uint64_t>> snapshots_by_index;
            snapshots_by_index.reserve(n);
            for (uint32_t i = 0; i < n; ++i) {
                uint32_t parent = i == 0 ? UINT32_MAX : i - 1;
                if (i > 0 && unit(rng) < params.fork_probability)
                    parent = static_cast<uint32_t>(rng() % i);
                std::vector<uint64_t> slots =
                    parent == UINT32_MAX ? std::vector<uint64_t>(size_t(B) * F, 0)
                                         : snapshots_by_index[parent];
                for (uint32_t e = 0; e < params.edits_per_revision; ++e) {
                    size_t slot = static_cast<size_t>(rng() % (size_t(B) * F));
                    slots[slot] = 1 + sampler.sample(unit(rng));
                    ++report.reuse_draws;
                }
                snapshots_by_index.push_back(slots);
                plan.push_back({times[i], o, i, parent, std::move(slots)});
            }
        }
    } else {
        // Planned mode: single origin, exact multiplicities.
        uint32_t n = params.revisions_per_origin.lo;
        if (params.revisions_per_origin.hi > params.revisions_per_origin.lo)
            n += static_cast<uint32_t>(
                rng() % (params.revisions_per_origin.hi - params.revisions_per_origin.lo + 1));
        if (params.n_origins != 1)
            raise(Errc::invalid_argument, "planned reuse supports a single origin");
        origin_rev_count[0] = n;

        std::vector<int64_t> times(n);
        for (auto& t : times)
            t = gen_detail::growth_timestamp(unit(rng), params.start_time, params.years,
                                             params.rate);
        std::sort(times.begin(), times.end());

        const uint64_t n_contents =
            params.content_pool ? params.content_pool : std::max<uint64_t>(1000, n);
        const uint32_t k_cap = std::min<uint32_t>(params.k_cap, n);
        // Inverse-CDF table for P(k) ∝ k^dup_alpha, k = 1..k_cap.
        std::vector<double> cdf(k_cap);
        double acc = 0;
        for (uint32_t k = 1; k <= k_cap; ++k) {
            acc += std::pow(static_cast<double>(k), params.dup_alpha);
            cdf[k - 1] = acc;
        }
        for (auto& v : cdf) v /= acc;

        // Revision index → planted content ranks.
        std::vector<std::vector<uint64_t>> planted(n);
        std::vector<uint32_t> scratch;
        std::vector<uint32_t> all_indices(n);
        std::iota(all_indices.begin(), all_indices.end(), 0);
        for (uint64_t j = 0; j < n_contents; ++j) {
            double u = unit(rng);
            uint32_t k = static_cast<uint32_t>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin() + 1);
            k = std::min(k, n);
            // k distinct revision indices: rejection sampling for small k,
            // partial Fisher–Yates once k gets close to n.
            scratch.clear();
            if (k * 2 < n) {
                while (scratch.size() < k) {
                    uint32_t idx = static_cast<uint32_t>(rng() % n);
                    if (std::find(scratch.begin(), scratch.end(), idx) == scratch.end())
                        scratch.push_back(idx);
                }
            } else {
                for (uint32_t i = 0; i < k; ++i) {
                    uint32_t swap_with = i + static_cast<uint32_t>(rng() % (n - i));
                    std::swap(all_indices[i], all_indices[swap_with]);
                    scratch.push_back(all_indices[i]);
                }
            }
            for (uint32_t idx : scratch) planted[idx].push_back(j);
            report.reuse_draws += k;
        }

        for (uint32_t i = 0; i < n; ++i) {
            // Planted contents occupy deterministic paths: dir = rank % B,
            // file name carries the rank, so each content has one stable path.
            std::sort(planted[i].begin(), planted[i].end());
            plan.push_back(
                {times[i], 0, i, i == 0 ? UINT32_MAX : i - 1, std::move(planted[i])});
        }
    }

    // Emit in global chronological order; ties broken by (origin, index) so
    // the order is total and deterministic.
    std::vector<size_t> order(plan.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (plan[a].t != plan[b].t) return plan[a].t < plan[b].t;
        if (plan[a].origin != plan[b].origin) return plan[a].origin < plan[b].origin;
        return plan[a].index < plan[b].index;
    });

    std::unordered_set<NodeId, NodeIdHash> dir_ids;
    std::vector<std::vector<NodeId>> rev_ids(params.n_origins);
    for (uint32_t o = 0; o < params.n_origins; ++o)
        rev_ids[o].resize(origin_rev_count[o]);
    std::vector<std::vector<bool>> is_parent(params.n_origins);
    for (uint32_t o = 0; o < params.n_origins; ++o)
        is_parent[o].assign(origin_rev_count[o], false);

    auto put_dir = [&](Directory d) {
        auto [id, fresh] = writer.put(d);
        if (fresh) dir_ids.insert(id);
        return id;
    };

    report.first_time = plan.empty() ? 0 : plan[order.front()].t;
    report.last_time = plan.empty() ? 0 : plan[order.back()].t;

    for (size_t pos : order) {
        const PlannedRev& pr = plan[pos];
        std::vector<DirectoryEntry> root_entries;
        if (params.reuse == ReuseModel::chain) {
            for (uint32_t b = 0; b < B; ++b) {
                std::vector<DirectoryEntry> files;
                for (uint32_t f = 0; f < F; ++f) {
                    uint64_t v = pr.slots[size_t(b) * F + f];
                    if (!v) continue;
                    files.push_back({"f" + std::to_string(f), contents.id_for(v - 1), 0100644});
                }
                if (files.empty()) continue;
                NodeId sub = put_dir(make_directory(std::move(files)));
                root_entries.push_back({"d" + std::to_string(b), sub, 040000});
            }
        } else {
            // pr.slots holds sorted planted ranks.
            std::vector<std::vector<DirectoryEntry>> buckets(B);
            for (uint64_t rank : pr.slots)
                buckets[rank % B].push_back(
                    {"f" + std::to_string(rank), contents.id_for(rank), 0100644});
            for (uint32_t b = 0; b < B; ++b) {
                if (buckets[b].empty()) continue;
                NodeId sub = put_dir(make_directory(std::move(buckets[b])));
                root_entries.push_back({"d" + std::to_string(b), sub, 040000});
            }
        }
        NodeId root = put_dir(make_directory(std::move(root_entries)));

        Revision rev;
        rev.root = root;
        if (pr.parent != UINT32_MAX) {
            rev.parents.push_back(rev_ids[pr.origin][pr.parent]);
            is_parent[pr.origin][pr.parent] = true;
        }
        rev.author = "Gen Bot <gen@example.org>";
        rev.author_date = {pr.t, "+0000"};
        rev.committer = rev.author;
        rev.committer_date = {pr.t, "+0000"};
        rev.message = "o" + std::to_string(pr.origin) + " r" + std::to_string(pr.index) + "\n";
        rev_ids[pr.origin][pr.index] = writer.put(rev).first;
        ++report.revisions;
    }

    // One snapshot + visit per origin; every leaf revision becomes a branch
    // so ancestry closure reaches the whole history.
    for (uint32_t o = 0; o < params.n_origins; ++o) {
        if (origin_rev_count[o] == 0) continue;
        std::vector<SnapshotBranch> branches;
        branches.push_back({"refs/heads/main", rev_ids[o][origin_rev_count[o] - 1]});
        uint32_t forks = 0;
        for (uint32_t i = 0; i + 1 < origin_rev_count[o]; ++i)
            if (!is_parent[o][i])
                branches.push_back({"refs/heads/fork" + std::to_string(forks++), rev_ids[o][i]});
        NodeId snap = writer.put(make_snapshot(std::move(branches))).first;
        ++report.snapshots;
        std::string url = "https://example.org/gen/" + std::to_string(params.seed) + "/o" +
                          std::to_string(o);
        int64_t visit_time = report.last_time + 3600;
        writer.record_visit(url, visit_time, snap);
        ++report.origins;
        ++report.visits;
    }

    writer.commit();
    report.contents = contents.materialized();
    report.directories = dir_ids.size();
    return report;
}

// Extreme corpus: n revisions with distinct metadata all pointing at one
// root directory holding k fixed contents.  Timestamps strictly increase.
inline GenReport generate_extreme_shared_root(DagStore& store, uint64_t n, uint32_t k) {
    if (n < 1 || k < 1) raise(Errc::invalid_argument, "need n >= 1 and k >= 1");
    GenReport report;
    DagWriter writer = store.begin_write();

    std::vector<DirectoryEntry> entries;
    for (uint32_t i = 0; i < k; ++i) {
        Content c;
        std::string bytes = "shared content " + std::to_string(i) + "\n";
        c.length = bytes.size();
        c.data = std::move(bytes);
        entries.push_back({"f" + std::to_string(i), writer.put(c).first, 0100644});
    }
    report.contents = k;
    NodeId root = writer.put(make_directory(std::move(entries))).first;
    report.directories = 1;

    const int64_t base = 1000000000;  // 2001-09-09, comfortably positive
    NodeId prev;
    bool have_prev = false;
    for (uint64_t i = 0; i < n; ++i) {
        Revision rev;
        rev.root = root;
        if (have_prev) rev.parents.push_back(prev);
        rev.author = "Extreme Bot <extreme@example.org>";
        rev.author_date = {base + static_cast<int64_t>(i), "+0000"};
        rev.committer = rev.author;
        rev.committer_date = {base + static_cast<int64_t>(i), "+0000"};
        rev.message = "shared-root revision " + std::to_string(i) + "\n";
        prev = writer.put(rev).first;
        have_prev = true;
        ++report.revisions;
    }
    report.first_time = base;
    report.last_time = base + static_cast<int64_t>(n) - 1;

    NodeId snap = writer.put(make_snapshot({{"refs/heads/main", prev}})).first;
    writer.record_visit("https://example.org/extreme/shared-root",
                        report.last_time + 3600, snap);
    report.origins = report.snapshots = report.visits = 1;
    writer.commit();
    return report;
}

// Extreme corpus: n revisions over pairwise-disjoint flat trees.
inline GenReport generate_extreme_disjoint(DagStore& store, uint64_t n,
                                           uint32_t files_per_rev) {
    if (n < 1 || files_per_rev < 1)
        raise(Errc::invalid_argument, "need n >= 1 and files_per_rev >= 1");
    GenReport report;
    DagWriter writer = store.begin_write();

    const int64_t base = 1000000000;
    NodeId prev;
    bool have_prev = false;
    for (uint64_t i = 0; i < n; ++i) {
        std::vector<DirectoryEntry> entries;
        for (uint32_t j = 0; j < files_per_rev; ++j) {
            Content c;
            std::string bytes =
                "disjoint " + std::to_string(i) + " " + std::to_string(j) + "\n";
            c.length = bytes.size();
            c.data = std::move(bytes);
            entries.push_back({"f" + std::to_string(j), writer.put(c).first, 0100644});
            ++report.contents;
        }
        NodeId root = writer.put(make_directory(std::move(entries))).first;
        ++report.directories;

        Revision rev;
        rev.root = root;
        if (have_prev) rev.parents.push_back(prev);
        rev.author = "Extreme Bot <extreme@example.org>";
        rev.author_date = {base + static_cast<int64_t>(i), "+0000"};
        rev.committer = rev.author;
        rev.committer_date = {base + static_cast<int64_t>(i), "+0000"};
        rev.message = "disjoint revision " + std::to_string(i) + "\n";
        prev = writer.put(rev).first;
        have_prev = true;
        ++report.revisions;
    }
    report.first_time = base;
    report.last_time = base + static_cast<int64_t>(n) - 1;

    NodeId snap = writer.put(make_snapshot({{"refs/heads/main", prev}})).first;
    writer.record_visit("https://example.org/extreme/disjoint",
                        report.last_time + 3600, snap);
    report.origins = report.snapshots = report.visits = 1;
    writer.commit();
    return report;
}

}  // namespace prov
