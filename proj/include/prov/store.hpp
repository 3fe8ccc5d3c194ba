#pragma once
// The deduplicated graph store: node persistence keyed by id, a timestamp
// index for chronological revision processing, the origin/visit journal, and
// whole-store validation.  Sits directly on the ordered-KV substrate.
//
// Keyspaces owned here:
//   nodes    kind-byte ++ digest            -> node body (see below)
//   revtime  ts-key ++ revision digest      -> (empty)    chronological index
//   origins  url                            -> (empty)
//   visits   big-endian seq                 -> json {origin, time, snapshot}
//   meta     name                           -> json       counters, flags
//
// Node bodies: directories/revisions/releases/snapshots store their manifest
// body; contents store 8-byte big-endian length ++ has-data byte ++ data.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "storage.hpp"

namespace prov {

namespace keys {

inline std::string be64(uint64_t v) {
    std::string out(8, '\0');
    for (int i = 7; i >= 0; --i) {
        out[i] = static_cast<char>(v & 0xff);
        v >>= 8;
    }
    return out;
}

inline uint64_t read_be64(std::string_view bytes) {
    if (bytes.size() < 8) raise(Errc::parse_error, "short big-endian field");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[i]);
    return v;
}

// Order-preserving encoding of signed seconds (flips the sign bit).
inline std::string ts_key(int64_t t) {
    return be64(static_cast<uint64_t>(t) ^ 0x8000000000000000ull);
}

inline int64_t read_ts(std::string_view bytes) {
    return static_cast<int64_t>(read_be64(bytes) ^ 0x8000000000000000ull);
}

inline std::string node_key(const NodeId& id) {
    std::string out(1, static_cast<char>(id.kind));
    out.append(id.digest());
    return out;
}

inline NodeId parse_node_key(std::string_view key, size_t digest_len) {
    if (key.size() != 1 + digest_len) raise(Errc::parse_error, "bad node key length");
    auto k = static_cast<Kind>(key[0]);
    switch (k) {
    case Kind::content: case Kind::directory: case Kind::revision:
    case Kind::release: case Kind::snapshot: break;
    default: raise(Errc::parse_error, "bad node kind byte");
    }
    return make_node_id(k, key.substr(1));
}

} // namespace keys

// Julian year; used wherever "per year" rates meet epoch seconds.
inline constexpr int64_t SECONDS_PER_YEAR = 31557600;

struct TimestampFilter {
    std::optional<int64_t> after;  // keep t > after
    std::optional<int64_t> upto;   // keep t <= upto

    bool admits(int64_t t) const {
        if (after && !(t > *after)) return false;
        if (upto && !(t <= *upto)) return false;
        return true;
    }
};

struct IngestStats {
    uint64_t inserted[5] = {0, 0, 0, 0, 0};    // indexed by Kind-1
    uint64_t duplicates[5] = {0, 0, 0, 0, 0};
    uint64_t origins_added = 0;
    uint64_t visits_added = 0;

    uint64_t& inserted_of(Kind k) { return inserted[static_cast<int>(k) - 1]; }
    uint64_t& duplicates_of(Kind k) { return duplicates[static_cast<int>(k) - 1]; }
    uint64_t inserted_of(Kind k) const { return inserted[static_cast<int>(k) - 1]; }
    uint64_t duplicates_of(Kind k) const { return duplicates[static_cast<int>(k) - 1]; }
    uint64_t total_inserted() const {
        uint64_t s = 0;
        for (auto v : inserted) s += v;
        return s;
    }
    uint64_t total_duplicates() const {
        uint64_t s = 0;
        for (auto v : duplicates) s += v;
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        static constexpr Kind kinds[] = {Kind::content, Kind::directory, Kind::revision,
                                         Kind::release, Kind::snapshot};
        for (Kind k : kinds) {
            auto i = static_cast<int>(k) - 1;
            j["inserted"][std::string(kind_name(k))] = inserted[i];
            j["duplicates"][std::string(kind_name(k))] = duplicates[i];
        }
        j["origins_added"] = origins_added;
        j["visits_added"] = visits_added;
        return j;
    }
};

struct Finding {
    enum class What { dangling_reference, hash_mismatch, directory_cycle, bad_record };
    What what;
    std::string node;    // printable id or record name
    std::string detail;
};

struct ValidationReport {
    uint64_t nodes_checked = 0;
    std::vector<Finding> findings;
    bool ok() const { return findings.empty(); }
};

class DagWriter;

class DagStore {
public:
    struct Options {
        bool strict_refs;  // reject edges to absent nodes on insert
        std::string hash;  // used only when creating
        explicit Options(bool strict = true, std::string h = "sha1")
            : strict_refs(strict), hash(std::move(h)) {}
    };

    DagStore(const std::filesystem::path& dir, storage::OpenMode mode, Options opts = Options())
        : store_(dir, mode, storage::Store::CreateOptions{opts.hash}),
          spec_(&hash_spec(store_.hash_name())),
          strict_refs_(opts.strict_refs) {}

    storage::Store& raw() { return store_; }
    const HashSpec& hash() const { return *spec_; }
    std::string store_id() const { return store_.store_id(); }

    bool contains(const NodeId& id) { return store_.exists("nodes", keys::node_key(id)); }

    std::optional<DagNode> get_node(const NodeId& id) {
        auto value = store_.get("nodes", keys::node_key(id));
        if (!value) return std::nullopt;
        return decode_node(id.kind, *value);
    }

    // Decodes a stored node body.  Exposed for scans that already hold bytes.
    DagNode decode_node(Kind kind, std::string_view value) const {
        switch (kind) {
        case Kind::content: {
            if (value.size() < 9) raise(Errc::parse_error, "short content record");
            Content c;
            c.length = keys::read_be64(value);
            if (value[8]) c.data = std::string(value.substr(9));
            return c;
        }
        case Kind::directory: return parse_directory(value, spec_->len);
        case Kind::revision:  return parse_revision(value, spec_->len);
        case Kind::release:   return parse_release(value, spec_->len);
        case Kind::snapshot:  return parse_snapshot(value, spec_->len);
        }
        raise(Errc::parse_error, "bad node kind");
    }

    std::optional<Revision> get_revision(const NodeId& id) {
        if (id.kind != Kind::revision) return std::nullopt;
        auto n = get_node(id);
        if (!n) return std::nullopt;
        return std::get<Revision>(std::move(*n));
    }

    // Chronological revision stream: ascending (timestamp, id); the filter
    // keeps t > after and t <= upto.
    class RevisionStream {
    public:
        bool next() {
            while (scan_.next()) {
                int64_t t = keys::read_ts(scan_.key());
                if (upto_ && t > *upto_) return false;  // keys are time-ordered
                id_ = make_node_id(Kind::revision, std::string_view(scan_.key()).substr(8));
                time_ = t;
                return true;
            }
            return false;
        }
        const NodeId& id() const { return id_; }
        int64_t time() const { return time_; }
        Revision revision(DagStore& store) const {
            auto r = store.get_revision(id_);
            if (!r) raise(Errc::missing_node, "revision index points at " + to_string(id_));
            return *r;
        }

    private:
        friend class DagStore;
        RevisionStream(storage::Scan scan, std::optional<int64_t> upto)
            : scan_(std::move(scan)), upto_(upto) {}
        storage::Scan scan_;
        std::optional<int64_t> upto_;
        NodeId id_;
        int64_t time_ = 0;
    };

    RevisionStream revisions_chronological(TimestampFilter filter = {}) {
        if (store_.count_prefix("revtime") == 0)
            return RevisionStream(storage::Scan(), filter.upto);
        if (filter.after) {
            // Skip every key at t <= after: resume strictly after the largest
            // possible key at `after`.
            std::string last = keys::ts_key(*filter.after);
            last.append(spec_->len, '\xff');
            return RevisionStream(store_.scan_after("revtime", "", last), filter.upto);
        }
        return RevisionStream(store_.scan("revtime", ""), filter.upto);
    }

    // Resume the chronological stream strictly after a (timestamp, id) pair.
    RevisionStream revisions_after(int64_t t, const NodeId& id,
                                   std::optional<int64_t> upto = {}) {
        if (store_.count_prefix("revtime") == 0)
            return RevisionStream(storage::Scan(), upto);
        std::string last = keys::ts_key(t);
        last.append(id.digest());
        return RevisionStream(store_.scan_after("revtime", "", last), upto);
    }

    std::vector<std::string> origins() {
        std::vector<std::string> out;
        if (store_.count_prefix("origins") == 0) return out;
        auto s = store_.scan("origins", "");
        while (s.next()) out.push_back(s.key());
        return out;
    }

    std::vector<Visit> visits() {
        std::vector<Visit> out;
        if (!has_keyspace("visits")) return out;
        auto s = store_.scan("visits", "");
        while (s.next()) {
            auto j = nlohmann::json::parse(s.value());
            Visit v;
            v.seq = keys::read_be64(s.key());
            v.origin = j.at("origin").get<std::string>();
            v.time = j.at("time").get<int64_t>();
            auto snap = parse_node_id(j.at("snapshot").get<std::string>(), spec_->len);
            if (!snap) raise(Errc::parse_error, "bad visit record");
            v.snapshot = *snap;
            out.push_back(std::move(v));
        }
        return out;
    }

    uint64_t submodule_edge_count() {
        auto v = store_.get("meta", "aux_submodule_edges");
        return v ? nlohmann::json::parse(*v).get<uint64_t>() : 0;
    }

    uint64_t count(Kind kind) {
        return store_.count_prefix("nodes", std::string(1, static_cast<char>(kind)));
    }

    ValidationReport validate(unsigned jobs = 1);

    // Single writer at a time; sessions auto-flush in large batches.
    DagWriter begin_write();

    bool has_keyspace(std::string_view name) {
        for (auto& n : store_.keyspace_names())
            if (n == name) return true;
        return false;
    }

private:
    friend class DagWriter;

    storage::Store store_;
    const HashSpec* spec_;
    bool strict_refs_;
    std::mutex writer_mu_;
};

// Batching write session.  Collects rows and flushes them as atomic batches;
// keeps an overlay of pending node ids so dedup and reference checks see
// not-yet-committed inserts.
class DagWriter {
public:
    DagWriter(DagWriter&& o) noexcept
        : store_(o.store_), ops_(std::move(o.ops_)), pending_ids_(std::move(o.pending_ids_)),
          pending_origins_(std::move(o.pending_origins_)), bytes_(o.bytes_),
          submodule_edges_(o.submodule_edges_), submodule_dirty_(o.submodule_dirty_),
          next_visit_seq_(o.next_visit_seq_), stats_(o.stats_), done_(o.done_) {
        o.done_ = true;  // moved-from shell must not commit or unlock
    }
    ~DagWriter() {
        try {
            commit();
        } catch (...) {
            // Destructor must not throw; an explicit commit() reports errors.
        }
    }

    // Inserts a node, computing its id from the manifest.  Returns the id and
    // whether the node was actually new.
    std::pair<NodeId, bool> put(const DagNode& node) {
        NodeId id = compute_node_id(node, store_->hash());
        return put_common(id, node, /*trusted=*/false);
    }

    // Inserts a node under a caller-supplied id.  Needed for contents without
    // data bytes (metadata-only corpora), where the id cannot be recomputed;
    // for all other nodes the id is verified.
    std::pair<NodeId, bool> put_as(const NodeId& id, const DagNode& node) {
        bool verifiable = true;
        if (auto* c = std::get_if<Content>(&node)) verifiable = c->data.has_value();
        if (verifiable) {
            NodeId computed = compute_node_id(node, store_->hash());
            if (!(computed == id))
                raise(Errc::corrupt, "node id mismatch: given " + to_string(id) +
                                         ", manifest hashes to " + to_string(computed));
        } else if (id.kind != Kind::content || id.len != store_->hash().len) {
            raise(Errc::invalid_argument, "bad supplied node id");
        }
        return put_common(id, node, true);
    }

    void add_origin(const std::string& url) {
        if (url.empty()) raise(Errc::invalid_argument, "empty origin url");
        if (pending_origins_.count(url) || store_->raw().exists("origins", url)) return;
        pending_origins_.insert(url);
        ops_.push_back({"origins", url, ""});
        bytes_ += url.size();
        ++stats_.origins_added;
        maybe_flush();
    }

    Visit record_visit(const std::string& origin, int64_t time, const NodeId& snapshot) {
        if (snapshot.kind != Kind::snapshot)
            raise(Errc::invalid_argument, "visit must point at a snapshot");
        if (!known(snapshot))
            raise(Errc::missing_node, "visit points at absent " + to_string(snapshot));
        add_origin(origin);
        Visit v;
        v.seq = next_visit_seq_++;
        v.origin = origin;
        v.time = time;
        v.snapshot = snapshot;
        nlohmann::json j{{"origin", origin}, {"time", time}, {"snapshot", to_string(snapshot)}};
        ops_.push_back({"visits", keys::be64(v.seq), j.dump()});
        bytes_ += 8 + ops_.back().value.size();
        ++stats_.visits_added;
        maybe_flush();
        return v;
    }

    // Queues an arbitrary row; used by index builders that share the session.
    void put_row(std::string keyspace, std::string key, std::string value) {
        bytes_ += key.size() + value.size();
        ops_.push_back({std::move(keyspace), std::move(key), std::move(value)});
        maybe_flush();
    }

    bool known(const NodeId& id) {
        return pending_ids_.count(id) > 0 || store_->contains(id);
    }

    const IngestStats& stats() const { return stats_; }

    // Flushes everything pending as one atomic batch.
    void commit() {
        if (done_) return;
        flush();
        done_ = true;
        store_->writer_mu_.unlock();
    }

private:
    friend class DagStore;

    explicit DagWriter(DagStore& store) : store_(&store) {
        if (!store_->writer_mu_.try_lock())
            raise(Errc::locked, "another write session is active");
        if (store_->raw().mode() == storage::OpenMode::read) {
            store_->writer_mu_.unlock();
            raise(Errc::invalid_argument, "store opened read-only");
        }
        auto v = store_->raw().get("meta", "aux_submodule_edges");
        submodule_edges_ = v ? nlohmann::json::parse(*v).get<uint64_t>() : 0;
        auto last = store_->raw().last_key("visits");
        next_visit_seq_ = last ? keys::read_be64(*last) + 1 : 1;
    }

    std::pair<NodeId, bool> put_common(const NodeId& id, const DagNode& node, bool trusted) {
        (void)trusted;
        if (known(id)) {
            ++stats_.duplicates_of(id.kind);
            return {id, false};
        }
        if (store_->strict_refs_) check_references(node);

        std::string value;
        switch (node_kind(node)) {
        case Kind::content: {
            const auto& c = std::get<Content>(node);
            value = keys::be64(c.length);
            value.push_back(c.data ? '\1' : '\0');
            if (c.data) value += *c.data;
            break;
        }
        default:
            value = node_body(node);
        }
        ops_.push_back({"nodes", keys::node_key(id), std::move(value)});
        bytes_ += ops_.back().key.size() + ops_.back().value.size();

        if (id.kind == Kind::revision) {
            const auto& r = std::get<Revision>(node);
            std::string k = keys::ts_key(r.time());
            k.append(id.digest());
            ops_.push_back({"revtime", std::move(k), ""});
            bytes_ += 8 + id.len;
        }
        if (id.kind == Kind::directory) {
            for (const auto& e : std::get<Directory>(node).entries)
                if (e.target.kind == Kind::revision) ++submodule_edges_;
            submodule_dirty_ = true;
        }

        pending_ids_.insert(id);
        ++stats_.inserted_of(id.kind);
        maybe_flush();
        return {id, true};
    }

    void check_references(const DagNode& node) {
        auto need = [this](const NodeId& ref, const char* role) {
            if (!known(ref))
                raise(Errc::dangling_reference,
                      std::string(role) + " references absent " + to_string(ref));
        };
        switch (node_kind(node)) {
        case Kind::content:
            break;
        case Kind::directory:
            for (const auto& e : std::get<Directory>(node).entries) {
                // Submodule links point into other histories; never required.
                if (e.target.kind == Kind::revision) continue;
                need(e.target, "directory entry");
            }
            break;
        case Kind::revision: {
            const auto& r = std::get<Revision>(node);
            need(r.root, "revision root");
            for (const auto& p : r.parents) need(p, "revision parent");
            break;
        }
        case Kind::release:
            need(std::get<Release>(node).target, "release target");
            break;
        case Kind::snapshot:
            for (const auto& b : std::get<Snapshot>(node).branches)
                need(b.target, "snapshot branch");
            break;
        }
    }

    void maybe_flush() {
        if (ops_.size() >= 100000 || bytes_ >= (64u << 20)) flush();
    }

    void flush() {
        if (submodule_dirty_) {
            ops_.push_back({"meta", "aux_submodule_edges",
                            nlohmann::json(submodule_edges_).dump()});
            submodule_dirty_ = false;
        }
        if (ops_.empty()) return;
        store_->raw().batch(ops_);
        ops_.clear();
        bytes_ = 0;
        pending_ids_.clear();
        pending_origins_.clear();
    }

    DagStore* store_;
    std::vector<storage::WriteOp> ops_;
    std::unordered_set<NodeId, NodeIdHash> pending_ids_;
    std::unordered_set<std::string> pending_origins_;
    size_t bytes_ = 0;
    uint64_t submodule_edges_ = 0;
    bool submodule_dirty_ = false;
    uint64_t next_visit_seq_ = 1;
    IngestStats stats_;
    bool done_ = false;
};

inline DagWriter DagStore::begin_write() { return DagWriter(*this); }

inline ValidationReport DagStore::validate(unsigned jobs) {
    ValidationReport report;
    std::mutex report_mu;
    if (jobs == 0) jobs = 1;

    // Pass 1: every node re-hashes to its key and references resolve.
    // Work is sharded into chunks so hashing can run on several threads.
    std::vector<std::pair<std::string, std::string>> chunk;
    std::unordered_map<NodeId, std::vector<NodeId>, NodeIdHash> dir_children;

    auto process_chunk = [&](const std::vector<std::pair<std::string, std::string>>& items) {
        std::vector<Finding> local;
        for (const auto& [key, value] : items) {
            NodeId id = keys::parse_node_key(key, spec_->len);
            DagNode node;
            try {
                node = decode_node(id.kind, value);
            } catch (const Error& e) {
                local.push_back({Finding::What::bad_record, to_string(id), e.what()});
                continue;
            }
            bool hash_checkable = true;
            if (auto* c = std::get_if<Content>(&node)) hash_checkable = c->data.has_value();
            if (hash_checkable) {
                NodeId computed = compute_node_id(node, *spec_);
                if (!(computed == id))
                    local.push_back({Finding::What::hash_mismatch, to_string(id),
                                     "stored bytes hash to " + to_string(computed)});
            }
            auto need = [&](const NodeId& ref, const char* role) {
                if (ref.kind == Kind::revision && id.kind == Kind::directory)
                    return;  // submodule link: external history, exempt
                if (!contains(ref))
                    local.push_back({Finding::What::dangling_reference, to_string(id),
                                     std::string(role) + " -> " + to_string(ref)});
            };
            switch (id.kind) {
            case Kind::content: break;
            case Kind::directory:
                for (const auto& e : std::get<Directory>(node).entries)
                    need(e.target, "entry");
                break;
            case Kind::revision: {
                const auto& r = std::get<Revision>(node);
                need(r.root, "root");
                for (const auto& p : r.parents) need(p, "parent");
                break;
            }
            case Kind::release:
                need(std::get<Release>(node).target, "target");
                break;
            case Kind::snapshot:
                for (const auto& b : std::get<Snapshot>(node).branches)
                    need(b.target, "branch");
                break;
            }
        }
        std::lock_guard lk(report_mu);
        for (auto& f : local) report.findings.push_back(std::move(f));
    };

    std::vector<std::thread> pool;
    std::deque<std::vector<std::pair<std::string, std::string>>> queue;
    std::mutex queue_mu;
    std::condition_variable queue_cv;
    bool producer_done = false;

    for (unsigned i = 0; i < jobs; ++i) {
        pool.emplace_back([&] {
            for (;;) {
                std::vector<std::pair<std::string, std::string>> items;
                {
                    std::unique_lock lk(queue_mu);
                    queue_cv.wait(lk, [&] { return producer_done || !queue.empty(); });
                    if (queue.empty()) return;
                    items = std::move(queue.front());
                    queue.pop_front();
                    queue_cv.notify_all();  // wake the producer if it is waiting
                }
                process_chunk(items);
            }
        });
    }

    if (raw().count_prefix("nodes") > 0) {
        auto s = raw().scan("nodes", "");
        size_t chunk_bytes = 0;
        while (s.next()) {
            ++report.nodes_checked;
            NodeId id = keys::parse_node_key(s.key(), spec_->len);
            if (id.kind == Kind::directory) {
                // Collect the directory->directory edges for the cycle check.
                auto dir = parse_directory(s.value(), spec_->len);
                auto& children = dir_children[id];
                for (const auto& e : dir.entries)
                    if (e.target.kind == Kind::directory) children.push_back(e.target);
            }
            chunk_bytes += s.key().size() + s.value().size();
            chunk.emplace_back(s.key(), s.value());
            if (chunk.size() >= 2000 || chunk_bytes >= (8u << 20)) {
                std::unique_lock lk(queue_mu);
                queue_cv.wait(lk, [&] { return queue.size() < 2 * jobs + 2; });
                queue.push_back(std::move(chunk));
                chunk.clear();
                chunk_bytes = 0;
                queue_cv.notify_all();
            }
        }
    }
    {
        std::lock_guard lk(queue_mu);
        if (!chunk.empty()) queue.push_back(std::move(chunk));
        producer_done = true;
    }
    queue_cv.notify_all();
    for (auto& t : pool) t.join();

    // Pass 2: directory graph acyclicity (iterative three-color DFS).
    std::unordered_map<NodeId, int, NodeIdHash> color;  // 0 new, 1 active, 2 done
    for (const auto& [start, _] : dir_children) {
        if (color[start] != 0) continue;
        std::vector<std::pair<NodeId, size_t>> stack{{start, 0}};
        color[start] = 1;
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            auto it = dir_children.find(node);
            if (it == dir_children.end() || idx >= it->second.size()) {
                color[node] = 2;
                stack.pop_back();
                continue;
            }
            NodeId child = it->second[idx++];
            int& c = color[child];
            if (c == 1) {
                report.findings.push_back({Finding::What::directory_cycle, to_string(child),
                                           "directory reachable from itself"});
                c = 2;
            } else if (c == 0) {
                c = 1;
                stack.emplace_back(child, 0);
            }
        }
    }

    // Pass 3: visit journal points at stored snapshots.
    for (const auto& v : visits()) {
        if (!contains(v.snapshot))
            report.findings.push_back({Finding::What::dangling_reference,
                                       "visit#" + std::to_string(v.seq),
                                       "snapshot " + to_string(v.snapshot) + " absent"});
    }
    return report;
}

} // namespace prov
