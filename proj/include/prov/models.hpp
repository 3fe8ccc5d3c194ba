#pragma once
// The three provenance index layouts over an ingested DAG:
//
//   flat       — one row per (content, revision, path) occurrence; biggest,
//                fastest to query, and the reference the others must match.
//   recursive  — the reverse containment edges of the DAG itself
//                (content→directory, directory→directory, directory→revision)
//                plus per-node earliest timestamps; smallest, queried by
//                walking upward.
//   compact    — isochrone-based middle ground: early content occurrences
//                are linked straight to revisions, repeated subtrees are
//                represented once via frontier directory links.
//
// All builders are incremental: they persist a (timestamp, revision-id)
// watermark plus their clock and resume strictly after it.  Rows are keyed
// so that re-processing a revision rewrites identical rows, which makes
// builds idempotent across session splits and crash/retry.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prov/errors.hpp"
#include "prov/ids.hpp"
#include "prov/isochrone.hpp"
#include "prov/nodes.hpp"
#include "prov/store.hpp"

namespace prov {

enum class Model { flat, recursive, compact };

inline const char* model_name(Model m) {
    switch (m) {
    case Model::flat: return "flat";
    case Model::recursive: return "recursive";
    case Model::compact: return "compact";
    }
    return "?";
}

inline std::optional<Model> model_from_name(std::string_view name) {
    if (name == "flat") return Model::flat;
    if (name == "recursive") return Model::recursive;
    if (name == "compact") return Model::compact;
    return std::nullopt;
}

// Keyspace names per model.
namespace mks {
inline std::string clock(Model m) { return std::string("clk_") + model_name(m); }
inline constexpr const char* flat_cor = "flat_cor";  // c ++ ts ++ r ++ path -> ""
inline constexpr const char* rec_cod = "rec_cod";    // c ++ d ++ name      -> ""
inline constexpr const char* rec_dod = "rec_dod";    // child ++ parent ++ name -> ""
inline constexpr const char* rec_dor = "rec_dor";    // d ++ r              -> ts
inline constexpr const char* cmp_cer = "cmp_cer";    // c ++ ts ++ r ++ path -> ""
inline constexpr const char* cmp_dor = "cmp_dor";    // d ++ ts ++ r ++ path -> ""
inline constexpr const char* cmp_cod = "cmp_cod";    // c ++ d ++ path      -> ""
inline constexpr const char* cmp_dir = "cmp_dir";    // d -> earliest ts (flatten marker)
inline std::string watermark_key(Model m) { return std::string("wm:") + model_name(m); }
}  // namespace mks

// Build progress marker: the last processed (timestamp, revision) in
// chronological order, total revisions processed, and whether any revision
// ever arrived out of order (making compact/recursive first-occurrence
// answers approximate).
struct Watermark {
    int64_t t = 0;
    NodeId id;
    uint64_t processed = 0;
    bool approximate = false;
};

inline std::optional<Watermark> load_watermark(DagStore& store, Model m) {
    auto v = store.raw().get("meta", mks::watermark_key(m));
    if (!v) return std::nullopt;
    auto j = nlohmann::json::parse(*v);
    Watermark w;
    w.t = j.at("t").get<int64_t>();
    auto id = parse_node_id(j.at("id").get<std::string>(), store.hash().len);
    if (!id) raise(Errc::corrupt, "bad watermark revision id");
    w.id = *id;
    w.processed = j.at("processed").get<uint64_t>();
    w.approximate = j.at("approximate").get<bool>();
    return w;
}

namespace detail {

inline std::string encode_watermark(const Watermark& w) {
    nlohmann::json j{{"t", w.t},
                     {"id", to_string(w.id)},
                     {"processed", w.processed},
                     {"approximate", w.approximate}};
    return j.dump();
}

// Row-key codecs.  All node keys are fixed-width (1 + digest length), so the
// variable-length path can live at the tail.
inline std::string occ_key(const NodeId& a, int64_t t, const NodeId& r, std::string_view path) {
    std::string k = keys::node_key(a);
    k += keys::ts_key(t);
    k += keys::node_key(r);
    k.append(path);
    return k;
}

struct OccRow {
    NodeId a;
    int64_t t;
    NodeId r;
    std::string path;
};

inline OccRow parse_occ_key(std::string_view key, size_t len) {
    const size_t n = 1 + len;
    if (key.size() < 2 * n + 8) raise(Errc::parse_error, "short occurrence key");
    OccRow row;
    row.a = keys::parse_node_key(key.substr(0, n), len);
    row.t = keys::read_ts(key.substr(n, 8));
    row.r = keys::parse_node_key(key.substr(n + 8, n), len);
    row.path = std::string(key.substr(2 * n + 8));
    return row;
}

inline std::string pair_key(const NodeId& a, const NodeId& b, std::string_view tail = {}) {
    std::string k = keys::node_key(a);
    k += keys::node_key(b);
    k.append(tail);
    return k;
}

struct PairRow {
    NodeId a;
    NodeId b;
    std::string tail;
};

inline PairRow parse_pair_key(std::string_view key, size_t len) {
    const size_t n = 1 + len;
    if (key.size() < 2 * n) raise(Errc::parse_error, "short pair key");
    PairRow row;
    row.a = keys::parse_node_key(key.substr(0, n), len);
    row.b = keys::parse_node_key(key.substr(n, n), len);
    row.tail = std::string(key.substr(2 * n));
    return row;
}

// Joins a directory's path with a path inside it; an empty directory path
// elides the separator.
inline std::string join_path(std::string_view dir_path, std::string_view within) {
    if (dir_path.empty()) return std::string(within);
    std::string out(dir_path);
    out += "/";
    out.append(within);
    return out;
}

}  // namespace detail

// Calls fn(content_id, path) for every content occurrence in the full tree
// under `root`, one call per path instance.  Directory nodes are decoded at
// most once per walk.  Submodule-style revision entries are skipped.
template <class Fn>
inline void walk_contents(DagStore& store, const NodeId& root, Fn&& fn) {
    std::vector<std::pair<NodeId, Directory>> dirs;
    std::unordered_map<NodeId, size_t, NodeIdHash> index;
    auto intern = [&](const NodeId& id) -> size_t {
        auto it = index.find(id);
        if (it != index.end()) return it->second;
        auto node = store.get_node(id);
        if (!node) raise(Errc::missing_node, "dangling directory: " + to_string(id));
        auto* dir = std::get_if<Directory>(&*node);
        if (!dir) raise(Errc::corrupt, "directory id resolves to another kind: " + to_string(id));
        dirs.emplace_back(id, std::move(*dir));
        index.emplace(id, dirs.size() - 1);
        return dirs.size() - 1;
    };

    struct Frame {
        size_t dir;
        size_t entry;
        std::string path;
    };
    std::vector<Frame> stack;
    stack.push_back({intern(root), 0, ""});
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.entry >= dirs[f.dir].second.entries.size()) {
            stack.pop_back();
            continue;
        }
        const std::string parent_path = f.path;
        const DirectoryEntry entry = dirs[f.dir].second.entries[f.entry++];
        std::string child_path = parent_path.empty() ? entry.name : parent_path + "/" + entry.name;
        switch (entry.target.kind) {
        case Kind::content:
            fn(entry.target, std::move(child_path));
            break;
        case Kind::directory:
            stack.push_back({intern(entry.target), 0, std::move(child_path)});
            break;
        case Kind::revision:
            break;
        default:
            raise(Errc::corrupt, "directory entry targets " + to_string(entry.target));
        }
    }
}

struct BuildOptions {
    // Strict mode requires non-decreasing timestamps across the whole build
    // history and fails with clock_regression when revisions turn out to
    // have been inserted behind the watermark.  Permissive mode processes
    // stragglers with min-semantics clock updates and marks the index
    // approximate instead.
    bool strict = true;
    // Clock/watermark persistence cadence, in revisions.
    uint64_t flush_revisions = 4096;

    explicit BuildOptions(bool strict_mode = true, uint64_t flush = 4096)
        : strict(strict_mode), flush_revisions(flush) {}
};

struct BuildReport {
    Model model = Model::flat;
    uint64_t processed = 0;  // revisions handled this session
    uint64_t skipped = 0;    // already-indexed revisions re-seen (permissive rescan)
    uint64_t rows = 0;       // index rows written this session
    bool approximate = false;
    std::optional<Watermark> watermark;

    nlohmann::json to_json() const {
        nlohmann::json j{{"model", model_name(model)},
                         {"processed", processed},
                         {"skipped", skipped},
                         {"rows", rows},
                         {"approximate", approximate}};
        if (watermark) {
            j["watermark"] = {{"t", watermark->t},
                              {"id", to_string(watermark->id)},
                              {"processed", watermark->processed}};
        }
        return j;
    }
};

// Builds (or incrementally extends) one model's index over every revision in
// the store, in (timestamp, revision-id) order.
inline BuildReport build_index(DagStore& store, Model model,
                               BuildOptions opts = BuildOptions()) {
    const std::string clk_ks = mks::clock(model);
    const std::string wm_key = mks::watermark_key(model);

    auto wm = load_watermark(store, model);
    ProvenanceClock clock = ProvenanceClock::load(store, clk_ks);

    // Flatten-once markers (compact only).
    std::unordered_set<NodeId, NodeIdHash> flattened;
    if (model == Model::compact && store.has_keyspace(mks::cmp_dir)) {
        auto s = store.raw().scan(mks::cmp_dir, "");
        while (s.next()) flattened.insert(keys::parse_node_key(s.key(), store.hash().len));
    }

    BuildReport report;
    report.model = model;
    report.approximate = wm ? wm->approximate : false;

    DagWriter writer = store.begin_write();

    Watermark cur = wm ? *wm : Watermark{};
    bool have_any = wm.has_value();

    auto persist_marks = [&] {
        std::vector<storage::WriteOp> ops;
        clock.drain_dirty(clk_ks, ops);
        for (auto& op : ops) writer.put_row(std::move(op.keyspace), std::move(op.key), std::move(op.value));
        if (have_any) {
            cur.approximate = report.approximate;
            writer.put_row("meta", wm_key, detail::encode_watermark(cur));
        }
    };

    auto emit = [&](std::string ks, std::string key, std::string value) {
        writer.put_row(std::move(ks), std::move(key), std::move(value));
        ++report.rows;
    };

    auto process = [&](const NodeId& rid, int64_t t) {
        switch (model) {
        case Model::flat: {
            auto rev = store.get_revision(rid);
            if (!rev) raise(Errc::missing_node, "no such revision: " + to_string(rid));
            walk_contents(store, rev->root, [&](const NodeId& c, std::string path) {
                emit(mks::flat_cor, detail::occ_key(c, t, rid, path), "");
                clock.note(c, t);
            });
            clock.note(rid, t);
            break;
        }
        case Model::recursive: {
            IsochroneOptions iopts(opts.strict && have_any
                                       ? std::optional<int64_t>(cur.t)
                                       : std::nullopt);
            auto iso = compute_isochrone(store, clock, rid, iopts);
            for (const auto& [did, dir] : iso.inner_dirs) {
                for (const auto& e : dir.entries) {
                    if (e.target.kind == Kind::content)
                        emit(mks::rec_cod, detail::pair_key(e.target, did, e.name), "");
                    else if (e.target.kind == Kind::directory)
                        emit(mks::rec_dod, detail::pair_key(e.target, did, e.name), "");
                    // revision-kind entries are tracked by the store-level
                    // auxiliary counter, not the model relations
                }
            }
            emit(mks::rec_dor, detail::pair_key(iso.root, rid), keys::ts_key(t));
            update_clock(clock, iso);
            break;
        }
        case Model::compact: {
            IsochroneOptions iopts(opts.strict && have_any
                                       ? std::optional<int64_t>(cur.t)
                                       : std::nullopt);
            auto iso = compute_isochrone(store, clock, rid, iopts);
            for (const auto& ce : iso.inner_content_edges)
                emit(mks::cmp_cer, detail::occ_key(ce.content, t, rid, ce.path), "");
            for (const auto& fe : iso.frontier_edges) {
                emit(mks::cmp_dor, detail::occ_key(fe.target, t, rid, fe.path), "");
                if (flattened.insert(fe.target).second) {
                    walk_contents(store, fe.target, [&](const NodeId& c, std::string within) {
                        emit(mks::cmp_cod, detail::pair_key(c, fe.target, within), "");
                    });
                    auto first = clock.get(fe.target);
                    emit(mks::cmp_dir, keys::node_key(fe.target),
                         keys::ts_key(first ? *first : t));
                }
            }
            update_clock(clock, iso);
            break;
        }
        }
    };

    auto advance = [&](const NodeId& rid, int64_t t) {
        if (have_any && t < cur.t) report.approximate = true;
        process(rid, t);
        cur.t = have_any && cur.t > t ? cur.t : t;  // watermark never moves back
        if (!have_any || t >= cur.t) cur.id = rid;
        have_any = true;
        ++cur.processed;
        ++report.processed;
        if (report.processed % opts.flush_revisions == 0) persist_marks();
    };

    if (opts.strict) {
        auto stream = wm ? store.revisions_after(wm->t, wm->id)
                         : store.revisions_chronological();
        while (stream.next()) advance(stream.id(), stream.time());
        // Revisions ingested behind the watermark would have been silently
        // skipped by the resume scan; detect the mismatch.
        uint64_t total = store.count(Kind::revision);
        if (cur.processed != total) {
            persist_marks();
            writer.commit();
            raise(Errc::clock_regression,
                  "store holds " + std::to_string(total) + " revisions but only " +
                      std::to_string(cur.processed) +
                      " are at or before the watermark; revisions arrived out of order "
                      "(rebuild with permissive ordering)");
        }
    } else {
        auto stream = store.revisions_chronological();
        while (stream.next()) {
            if (clock.contains(stream.id())) {
                ++report.skipped;
                continue;
            }
            advance(stream.id(), stream.time());
        }
    }

    persist_marks();
    writer.commit();
    report.watermark = have_any ? std::optional<Watermark>(cur) : std::nullopt;
    return report;
}

// One content occurrence, as answered by queries.
struct Occurrence {
    NodeId content;
    NodeId revision;
    int64_t timestamp = 0;
    std::string path;

    // content_id TAB revision_id TAB timestamp TAB path
    std::string to_line() const {
        return to_string(content) + "\t" + to_string(revision) + "\t" +
               std::to_string(timestamp) + "\t" + path;
    }
    nlohmann::json to_json() const {
        return {{"content", to_string(content)},
                {"revision", to_string(revision)},
                {"timestamp", timestamp},
                {"path", path}};
    }
};

namespace detail {

// Upward walk work item for recursive queries: a directory known to contain
// the content (directly or transitively) and the path suffix from that
// directory down to the content.
struct UpItem {
    NodeId dir;
    std::string suffix;
};

}  // namespace detail

// Streaming all-occurrences query.  Bounded memory: emits records as the
// underlying scans advance instead of materializing the result set.
class OccurrenceStream {
public:
    std::optional<Occurrence> next() {
        switch (model_) {
        case Model::flat: return next_flat();
        case Model::recursive: return next_recursive();
        case Model::compact: return next_compact();
        }
        return std::nullopt;
    }

private:
    friend OccurrenceStream all_occurrences(DagStore&, Model, const NodeId&);

    OccurrenceStream(DagStore& store, Model model, NodeId content)
        : store_(&store), model_(model), content_(content), len_(store.hash().len) {
        switch (model_) {
        case Model::flat:
            if (store_->has_keyspace(mks::flat_cor))
                scan_ = store_->raw().scan(mks::flat_cor, keys::node_key(content_));
            break;
        case Model::compact:
            if (store_->has_keyspace(mks::cmp_cer))
                scan_ = store_->raw().scan(mks::cmp_cer, keys::node_key(content_));
            else
                cer_done_ = true;
            break;
        case Model::recursive:
            if (store_->has_keyspace(mks::rec_cod)) {
                auto s = store_->raw().scan(mks::rec_cod, keys::node_key(content_));
                while (s.next()) {
                    auto row = detail::parse_pair_key(s.key(), len_);
                    stack_.push_back({row.b, row.tail});
                }
            }
            break;
        }
    }

    std::optional<Occurrence> next_flat() {
        if (!scan_.next()) return std::nullopt;
        auto row = detail::parse_occ_key(scan_.key(), len_);
        return Occurrence{row.a, row.r, row.t, std::move(row.path)};
    }

    std::optional<Occurrence> next_compact() {
        // Phase 1: direct early-occurrence rows.
        if (!cer_done_) {
            if (scan_.next()) {
                auto row = detail::parse_occ_key(scan_.key(), len_);
                seen_.insert(keys::node_key(row.r) + "\x01" + row.path);
                return Occurrence{row.a, row.r, row.t, std::move(row.path)};
            }
            cer_done_ = true;
            if (store_->has_keyspace(mks::cmp_cod))
                scan_ = store_->raw().scan(mks::cmp_cod, keys::node_key(content_));
            else
                cod_done_ = true;
        }
        // Phase 2: join C-occur-in-D with D-occur-in-R.
        while (!cod_done_) {
            if (dir_scan_) {
                while (dir_scan_->next()) {
                    auto row = detail::parse_occ_key(dir_scan_->key(), len_);
                    std::string path = detail::join_path(row.path, within_);
                    if (seen_.count(keys::node_key(row.r) + "\x01" + path)) continue;
                    return Occurrence{content_, row.r, row.t, std::move(path)};
                }
                dir_scan_.reset();
            }
            if (!scan_.next()) {
                cod_done_ = true;
                break;
            }
            auto row = detail::parse_pair_key(scan_.key(), len_);
            within_ = row.tail;
            if (store_->has_keyspace(mks::cmp_dor))
                dir_scan_ = store_->raw().scan(mks::cmp_dor, keys::node_key(row.b));
        }
        return std::nullopt;
    }

    std::optional<Occurrence> next_recursive() {
        for (;;) {
            if (dir_scan_) {
                if (dir_scan_->next()) {
                    auto row = detail::parse_pair_key(dir_scan_->key(), len_);
                    int64_t t = keys::read_ts(dir_scan_->value());
                    return Occurrence{content_, row.b, t, suffix_};
                }
                dir_scan_.reset();
                // Ascend: every parent directory containing cur_dir_.
                if (store_->has_keyspace(mks::rec_dod)) {
                    auto s = store_->raw().scan(mks::rec_dod, keys::node_key(cur_dir_));
                    while (s.next()) {
                        auto row = detail::parse_pair_key(s.key(), len_);
                        stack_.push_back({row.b, row.tail + "/" + suffix_});
                    }
                }
            }
            if (stack_.empty()) return std::nullopt;
            auto item = std::move(stack_.back());
            stack_.pop_back();
            cur_dir_ = item.dir;
            suffix_ = std::move(item.suffix);
            if (store_->has_keyspace(mks::rec_dor))
                dir_scan_ = store_->raw().scan(mks::rec_dor, keys::node_key(cur_dir_));
            else
                return std::nullopt;
        }
    }

    DagStore* store_;
    Model model_;
    NodeId content_;
    size_t len_;
    storage::Scan scan_;  // flat rows / compact cer then cod / unused for recursive
    bool cer_done_ = false;
    bool cod_done_ = false;
    std::optional<storage::Scan> dir_scan_;  // compact: dor rows; recursive: dor rows
    std::string within_;
    std::unordered_set<std::string> seen_;  // compact: (revision, path) from phase 1
    std::vector<detail::UpItem> stack_;     // recursive: pending upward walk
    NodeId cur_dir_;
    std::string suffix_;
};

// Streams every (revision, path) occurrence of `content` from the chosen
// index.  Result multisets agree across models; emission order is
// deterministic per model but differs between models.
inline OccurrenceStream all_occurrences(DagStore& store, Model model, const NodeId& content) {
    if (content.kind != Kind::content)
        raise(Errc::invalid_argument, "occurrence queries take a content id");
    return OccurrenceStream(store, model, content);
}

// Earliest occurrence of `content`: minimal (timestamp, revision id, path).
// Returns nullopt for contents the index has never seen.
inline std::optional<Occurrence> first_occurrence(DagStore& store, Model model,
                                                  const NodeId& content) {
    if (content.kind != Kind::content)
        raise(Errc::invalid_argument, "occurrence queries take a content id");
    const size_t len = store.hash().len;
    switch (model) {
    case Model::flat: {
        if (!store.has_keyspace(mks::flat_cor)) return std::nullopt;
        auto s = store.raw().scan(mks::flat_cor, keys::node_key(content));
        if (!s.next()) return std::nullopt;
        auto row = detail::parse_occ_key(s.key(), len);
        return Occurrence{row.a, row.r, row.t, std::move(row.path)};
    }
    case Model::compact: {
        if (store.has_keyspace(mks::cmp_cer)) {
            auto s = store.raw().scan(mks::cmp_cer, keys::node_key(content));
            if (s.next()) {
                auto row = detail::parse_occ_key(s.key(), len);
                return Occurrence{row.a, row.r, row.t, std::move(row.path)};
            }
        }
        // No direct early row (possible only for indexes built from
        // out-of-order streams): fall back to the full join.
        std::optional<Occurrence> best;
        auto stream = all_occurrences(store, Model::compact, content);
        while (auto occ = stream.next()) {
            if (!best || occ->timestamp < best->timestamp ||
                (occ->timestamp == best->timestamp &&
                 (occ->revision < best->revision ||
                  (occ->revision == best->revision && occ->path < best->path))))
                best = std::move(occ);
        }
        return best;
    }
    case Model::recursive: {
        auto tv = store.raw().get(mks::clock(Model::recursive), keys::node_key(content));
        if (!tv) return std::nullopt;
        const int64_t target = keys::read_ts(*tv);
        auto clock_of = [&](const NodeId& id) -> std::optional<int64_t> {
            auto v = store.raw().get(mks::clock(Model::recursive), keys::node_key(id));
            if (!v) return std::nullopt;
            return keys::read_ts(*v);
        };
        std::optional<Occurrence> best;
        auto consider = [&](const NodeId& r, int64_t t, const std::string& path) {
            if (t != target) return;
            if (!best || r < best->revision ||
                (r == best->revision && path < best->path))
                best = Occurrence{content, r, t, path};
        };
        std::vector<detail::UpItem> stack;
        if (store.has_keyspace(mks::rec_cod)) {
            auto s = store.raw().scan(mks::rec_cod, keys::node_key(content));
            while (s.next()) {
                auto row = detail::parse_pair_key(s.key(), len);
                auto dt = clock_of(row.b);
                if (dt && *dt <= target) stack.push_back({row.b, row.tail});
            }
        }
        while (!stack.empty()) {
            auto item = std::move(stack.back());
            stack.pop_back();
            if (store.has_keyspace(mks::rec_dor)) {
                auto s = store.raw().scan(mks::rec_dor, keys::node_key(item.dir));
                while (s.next()) {
                    auto row = detail::parse_pair_key(s.key(), len);
                    consider(row.b, keys::read_ts(s.value()), item.suffix);
                }
            }
            if (store.has_keyspace(mks::rec_dod)) {
                auto s = store.raw().scan(mks::rec_dod, keys::node_key(item.dir));
                while (s.next()) {
                    auto row = detail::parse_pair_key(s.key(), len);
                    auto dt = clock_of(row.b);
                    if (dt && *dt <= target)
                        stack.push_back({row.b, row.tail + "/" + item.suffix});
                }
            }
        }
        return best;
    }
    }
    return std::nullopt;
}

// Entity and relationship counts per the shared counting rules: flat counts
// contents and revisions; recursive counts every node kind it references;
// compact counts only the directories that actually appear in its relations
// (the flattened frontier targets).  Submodule-style directory→revision
// edges live in a separate auxiliary counter.
struct ModelStats {
    Model model = Model::flat;
    std::string corpus_tag;
    uint64_t revisions = 0;
    uint64_t contents = 0;
    uint64_t directories = 0;
    std::vector<std::pair<std::string, uint64_t>> relations;
    uint64_t aux_submodule_edges = 0;

    uint64_t entity_total() const { return revisions + contents + directories; }
    uint64_t relation_total() const {
        uint64_t s = 0;
        for (auto& [name, n] : relations) s += n;
        return s;
    }
    nlohmann::json to_json() const {
        nlohmann::json rel = nlohmann::json::object();
        for (auto& [name, n] : relations) rel[name] = n;
        return {{"model", model_name(model)},
                {"entities",
                 {{"revisions", revisions},
                  {"contents", contents},
                  {"directories", directories},
                  {"total", entity_total()}}},
                {"relations", rel},
                {"relation_total", relation_total()},
                {"aux_submodule_edges", aux_submodule_edges},
                {"corpus", corpus_tag}};
    }
};

inline ModelStats model_stats(DagStore& store, Model model) {
    ModelStats st;
    st.model = model;
    st.aux_submodule_edges = store.submodule_edge_count();
    const std::string clk = mks::clock(model);
    auto kind_count = [&](Kind k) {
        return store.raw().count_prefix(clk, std::string(1, static_cast<char>(k)));
    };
    st.revisions = kind_count(Kind::revision);
    st.contents = kind_count(Kind::content);
    switch (model) {
    case Model::flat:
        st.relations = {{"C-occur-in-R", store.raw().count_prefix(mks::flat_cor)}};
        break;
    case Model::recursive:
        st.directories = kind_count(Kind::directory);
        st.relations = {{"C-occur-in-D", store.raw().count_prefix(mks::rec_cod)},
                        {"D-occur-in-D", store.raw().count_prefix(mks::rec_dod)},
                        {"D-occur-in-R", store.raw().count_prefix(mks::rec_dor)}};
        break;
    case Model::compact:
        st.directories = store.raw().count_prefix(mks::cmp_dir);
        st.relations = {{"C-occur-early-in-R", store.raw().count_prefix(mks::cmp_cer)},
                        {"D-occur-in-R", store.raw().count_prefix(mks::cmp_dor)},
                        {"C-occur-in-D", store.raw().count_prefix(mks::cmp_cod)}};
        break;
    }
    auto wm = load_watermark(store, model);
    st.corpus_tag = store.store_id() + "@" +
                    (wm ? std::to_string(wm->t) + ":" + to_string(wm->id) + ":" +
                              std::to_string(wm->processed)
                        : std::string("empty"));
    return st;
}

// Rounds to three significant digits, keeping trailing zeros ("34.0", "251",
// "7.39").
inline std::string format_sig3(double v) {
    if (!std::isfinite(v) || v <= 0) return "0";
    int decimals = 2 - static_cast<int>(std::floor(std::log10(v)));
    if (decimals < 0) decimals = 0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

struct RatioEntry {
    std::string numerator;
    std::string denominator;
    double ratio = 0;
    std::string formatted;
};

struct RatioReport {
    std::vector<RatioEntry> entries;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (auto& e : entries)
            arr.push_back({{"pair", e.numerator + "/" + e.denominator},
                           {"ratio", e.ratio},
                           {"formatted", e.formatted}});
        return arr;
    }
};

// Pairwise relationship-count ratios, larger total over smaller, three
// significant digits.
inline RatioReport compare_counts(const std::vector<std::pair<std::string, uint64_t>>& totals) {
    RatioReport rep;
    for (size_t i = 0; i < totals.size(); ++i) {
        for (size_t j = i + 1; j < totals.size(); ++j) {
            auto [an, av] = totals[i];
            auto [bn, bv] = totals[j];
            if (bv > av) {
                std::swap(an, bn);
                std::swap(av, bv);
            }
            if (bv == 0) raise(Errc::invalid_argument, "zero relationship count for " + bn);
            double r = static_cast<double>(av) / static_cast<double>(bv);
            rep.entries.push_back({an, bn, r, format_sig3(r)});
        }
    }
    return rep;
}

// Same, over ModelStats from one corpus; mixing corpora is an error.
inline RatioReport compare_models(const std::vector<ModelStats>& stats) {
    std::vector<std::pair<std::string, uint64_t>> totals;
    for (auto& st : stats) {
        if (!stats.empty() && st.corpus_tag != stats.front().corpus_tag)
            raise(Errc::mismatched_corpus,
                  "stats come from different corpora: " + stats.front().corpus_tag + " vs " +
                      st.corpus_tag);
        totals.emplace_back(model_name(st.model), st.relation_total());
    }
    return compare_counts(totals);
}

}  // namespace prov
