#pragma once
// Isochrone computation: for one revision, the subgraph of directories seen
// for the first time at that revision's timestamp, the frontier edges into
// previously seen directories, and the content occurrences attached inside.
//
// The engine is driven by a ProvenanceClock — the evolving map from node id
// to earliest-known timestamp.  A directory is "inner" (part of the isochrone
// subgraph) exactly when it is absent from the clock at computation time;
// traversal never descends below a non-inner directory, which is what makes
// index builds over highly deduplicated histories cheap.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "prov/errors.hpp"
#include "prov/ids.hpp"
#include "prov/nodes.hpp"
#include "prov/store.hpp"

namespace prov {

// Earliest-known timestamp per node, with min semantics: an entry never
// increases.  Tracks which entries changed so incremental builders can
// persist just the delta.
class ProvenanceClock {
public:
    bool contains(const NodeId& id) const { return map_.count(id) > 0; }

    std::optional<int64_t> get(const NodeId& id) const {
        auto it = map_.find(id);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    // Records that `id` was seen at time `t`.  Keeps the minimum across
    // calls; returns true when the stored value changed (new entry or an
    // earlier sighting under out-of-order processing).
    bool note(const NodeId& id, int64_t t) {
        auto [it, inserted] = map_.emplace(id, t);
        if (!inserted) {
            if (t >= it->second) return false;
            it->second = t;
        }
        dirty_.insert(id);
        return true;
    }

    size_t size() const { return map_.size(); }
    size_t dirty_size() const { return dirty_.size(); }

    // Loads every entry of a clock keyspace (key = node key, value = big-
    // endian timestamp).  Missing keyspace → empty clock.
    static ProvenanceClock load(DagStore& store, const std::string& keyspace) {
        ProvenanceClock clock;
        if (!store.has_keyspace(keyspace)) return clock;
        auto scan = store.raw().scan(keyspace, "");
        while (scan.next()) {
            NodeId id = keys::parse_node_key(scan.key(), store.hash().len);
            clock.map_.emplace(id, keys::read_ts(scan.value()));
        }
        return clock;
    }

    // Appends one write per dirty entry to `out` and clears the dirty set.
    void drain_dirty(const std::string& keyspace, std::vector<storage::WriteOp>& out) {
        for (const auto& id : dirty_) {
            auto it = map_.find(id);
            out.push_back({keyspace, keys::node_key(id), keys::ts_key(it->second)});
        }
        dirty_.clear();
    }

private:
    std::unordered_map<NodeId, int64_t, NodeIdHash> map_;
    std::unordered_set<NodeId, NodeIdHash> dirty_;
};

// One directory->directory crossing out of the isochrone subgraph.  `parent`
// is the inner directory holding the edge (or the root id itself for the
// virtual root edge), `target` the previously seen directory, `path` the
// target's path relative to the revision root ("" for the virtual edge).
struct FrontierEdge {
    NodeId parent;
    NodeId target;
    std::string path;
};

// One content occurrence attached to an inner directory, with its full path
// relative to the revision root.  Emitted once per path instance.
struct ContentEdge {
    NodeId content;
    std::string path;
};

struct IsochroneResult {
    NodeId revision;
    int64_t timestamp = 0;
    NodeId root;
    bool root_inner = false;
    // Deduplicated, in discovery order; carries the decoded nodes so index
    // builders need not re-fetch them.
    std::vector<std::pair<NodeId, Directory>> inner_dirs;
    std::vector<FrontierEdge> frontier_edges;
    std::vector<ContentEdge> inner_content_edges;
};

struct IsochroneOptions {
    // When set, a revision older than this floor raises clock_regression
    // (strict chronological processing).
    std::optional<int64_t> strict_floor;

    explicit IsochroneOptions(std::optional<int64_t> floor = std::nullopt)
        : strict_floor(floor) {}
};

// Computes the isochrone subgraph of `revision_id` against the current
// clock.  Read-only with respect to both store and clock.
//
// Every inner directory is unfolded once per path instance, so frontier and
// content edges carry one entry per distinct path (n-m cardinality).
// Submodule-style entries pointing at revisions are never traversed.  When
// the root itself is already clocked, the result is a single virtual
// frontier edge (root, root, "").
inline IsochroneResult compute_isochrone(DagStore& store, const ProvenanceClock& clock,
                                         const NodeId& revision_id,
                                         const IsochroneOptions& opts = IsochroneOptions()) {
    auto rev = store.get_revision(revision_id);
    if (!rev) raise(Errc::missing_node, "no such revision: " + to_string(revision_id));

    IsochroneResult res;
    res.revision = revision_id;
    res.timestamp = rev->committer_date.secs;
    res.root = rev->root;

    if (opts.strict_floor && res.timestamp < *opts.strict_floor)
        raise(Errc::clock_regression,
              "revision " + to_string(revision_id) + " at t=" + std::to_string(res.timestamp) +
                  " arrived after the build reached t=" + std::to_string(*opts.strict_floor));

    if (clock.contains(rev->root)) {
        res.root_inner = false;
        res.frontier_edges.push_back({rev->root, rev->root, ""});
        return res;
    }
    res.root_inner = true;

    // Index into res.inner_dirs per inner directory; one decode per dir even
    // when it occurs at many paths.
    std::unordered_map<NodeId, size_t, NodeIdHash> inner_index;
    auto intern_inner = [&](const NodeId& id) -> size_t {
        auto it = inner_index.find(id);
        if (it != inner_index.end()) return it->second;
        auto node = store.get_node(id);
        if (!node) raise(Errc::missing_node, "dangling directory: " + to_string(id));
        auto* dir = std::get_if<Directory>(&*node);
        if (!dir) raise(Errc::corrupt, "directory id resolves to another kind: " + to_string(id));
        res.inner_dirs.emplace_back(id, std::move(*dir));
        inner_index.emplace(id, res.inner_dirs.size() - 1);
        return res.inner_dirs.size() - 1;
    };

    struct Frame {
        size_t dir;      // index into res.inner_dirs
        size_t entry;    // next entry to visit
        std::string path;  // path of this directory relative to root ("" = root)
    };
    std::vector<Frame> stack;
    stack.push_back({intern_inner(rev->root), 0, ""});

    while (!stack.empty()) {
        Frame& f = stack.back();
        // res.inner_dirs never reallocates mid-frame concerns: re-resolve the
        // directory each step, since intern_inner may grow the vector.
        if (f.entry >= res.inner_dirs[f.dir].second.entries.size()) {
            stack.pop_back();
            continue;
        }
        // Copy what we need before any potential reallocation.
        const size_t dir_index = f.dir;
        const size_t entry_index = f.entry++;
        const std::string parent_path = f.path;
        const DirectoryEntry entry = res.inner_dirs[dir_index].second.entries[entry_index];
        const NodeId parent_id = res.inner_dirs[dir_index].first;

        std::string child_path =
            parent_path.empty() ? entry.name : parent_path + "/" + entry.name;

        switch (entry.target.kind) {
        case Kind::content:
            res.inner_content_edges.push_back({entry.target, std::move(child_path)});
            break;
        case Kind::directory:
            if (clock.contains(entry.target)) {
                res.frontier_edges.push_back({parent_id, entry.target, std::move(child_path)});
            } else {
                stack.push_back({intern_inner(entry.target), 0, std::move(child_path)});
            }
            break;
        case Kind::revision:
            // Submodule-style pointer into another history; never traversed.
            break;
        default:
            raise(Errc::corrupt, "directory entry targets " + to_string(entry.target));
        }
    }
    return res;
}

// Applies an isochrone result to the clock: every inner directory, every
// content attached inside, and the revision itself are recorded at t_R with
// min semantics.  Idempotent; re-applying the same result is a no-op.
inline void update_clock(ProvenanceClock& clock, const IsochroneResult& result) {
    for (const auto& [id, dir] : result.inner_dirs) clock.note(id, result.timestamp);
    for (const auto& edge : result.inner_content_edges) clock.note(edge.content, result.timestamp);
    clock.note(result.revision, result.timestamp);
}

}  // namespace prov
