#pragma once
// Git repository ingestion.  Objects are read through the VCS plumbing
// (`for-each-ref` for the ref state, a persistent `cat-file --batch` child
// for object bytes) and inserted bottom-up: blobs, trees, commits along the
// parent graph, tag objects, then one snapshot over all refs and one visit.
//
// Because manifests reuse the native object formats, every inserted node is
// id-verified against the repository's own object id; a mismatch aborts the
// ingest rather than storing a mislabeled node.

#include <algorithm>
#include <string>
#include <unordered_set>
#include <vector>

#include "detail/subprocess.hpp"
#include "store.hpp"

namespace prov {

namespace detail {

class GitObjectReader {
public:
    explicit GitObjectReader(const std::string& repo)
        : proc_({"git", "-C", repo, "cat-file", "--batch"}) {}

    struct Object {
        std::string type;
        std::string bytes;
    };

    Object fetch(const std::string& hex) {
        proc_.write_all(hex + "\n");
        std::string header = proc_.read_line();
        // "<oid> <type> <size>" or "<oid> missing"
        auto sp1 = header.find(' ');
        if (sp1 == std::string::npos)
            raise(Errc::io_failure, "unexpected cat-file header: " + header);
        auto sp2 = header.find(' ', sp1 + 1);
        if (sp2 == std::string::npos) {
            raise(Errc::missing_node, "object " + header.substr(0, sp1) + " not in repository");
        }
        Object obj;
        obj.type = header.substr(sp1 + 1, sp2 - sp1 - 1);
        if (obj.type == "missing")
            raise(Errc::missing_node, "object " + header.substr(0, sp1) + " not in repository");
        size_t size = std::stoull(header.substr(sp2 + 1));
        obj.bytes = proc_.read_exact(size);
        proc_.read_exact(1);  // trailing newline
        return obj;
    }

private:
    BidiProcess proc_;
};

struct GitRef {
    std::string name;
    std::string kind;  // "commit" or "tag"
    std::string hex;
};

} // namespace detail

// Ingests every object reachable from the repository's refs, builds one
// snapshot of the ref state, and records one visit for `origin_url`.
inline std::pair<IngestStats, Visit> ingest_git_repository(DagStore& store,
                                                           const std::filesystem::path& repo_path,
                                                           const std::string& origin_url,
                                                           int64_t visit_time) {
    const std::string repo = repo_path.string();

    auto probe = detail::run_capture({"git", "-C", repo, "rev-parse", "--git-dir"});
    if (!probe.ok())
        raise(Errc::repo_not_found, "not a git repository: " + repo);

    auto format = detail::run_capture({"git", "-C", repo, "rev-parse", "--show-object-format"});
    std::string object_format = "sha1";
    if (format.ok() && !format.out.empty()) {
        object_format = format.out;
        while (!object_format.empty() &&
               (object_format.back() == '\n' || object_format.back() == '\r'))
            object_format.pop_back();
    }
    if (object_format != store.hash().name)
        raise(Errc::invalid_argument, "repository object format (" + object_format +
                                          ") differs from store hash (" + store.hash().name + ")");

    auto refs_out = detail::run_capture(
        {"git", "-C", repo, "for-each-ref",
         "--format=%(refname)%00%(objecttype)%00%(objectname)"});
    if (!refs_out.ok()) raise(Errc::io_failure, "for-each-ref failed");

    std::vector<detail::GitRef> refs;
    {
        size_t pos = 0;
        while (pos < refs_out.out.size()) {
            auto eol = refs_out.out.find('\n', pos);
            if (eol == std::string::npos) eol = refs_out.out.size();
            std::string line = refs_out.out.substr(pos, eol - pos);
            pos = eol + 1;
            if (line.empty()) continue;
            auto n1 = line.find('\0');
            auto n2 = line.find('\0', n1 + 1);
            if (n1 == std::string::npos || n2 == std::string::npos)
                raise(Errc::parse_error, "bad for-each-ref line");
            refs.push_back({line.substr(0, n1), line.substr(n1 + 1, n2 - n1 - 1),
                            line.substr(n2 + 1)});
        }
    }

    detail::GitObjectReader objects(repo);
    auto writer = store.begin_write();
    const size_t digest_len = store.hash().len;

    // Object walk state: hex ids already settled (stored or queued).
    std::unordered_set<std::string> done;
    auto settled = [&](const std::string& hex, Kind kind) {
        if (done.count(hex)) return true;
        auto raw = detail::from_hex(hex);
        if (!raw || raw->size() != digest_len)
            raise(Errc::parse_error, "bad object id from repository: " + hex);
        if (writer.known(make_node_id(kind, *raw))) {
            done.insert(hex);
            return true;
        }
        return false;
    };
    auto id_of = [&](const std::string& hex, Kind kind) {
        auto raw = detail::from_hex(hex);
        if (!raw || raw->size() != digest_len)
            raise(Errc::parse_error, "bad object id: " + hex);
        return make_node_id(kind, *raw);
    };

    // Bottom-up tree insertion (iterative post-order over tree edges).
    auto ingest_tree = [&](const std::string& root_hex) {
        if (settled(root_hex, Kind::directory)) return;
        std::vector<std::pair<std::string, bool>> stack{{root_hex, false}};
        while (!stack.empty()) {
            auto [hex, expanded] = stack.back();
            stack.pop_back();
            if (done.count(hex)) continue;
            auto obj = objects.fetch(hex);
            if (obj.type != "tree")
                raise(Errc::unsupported_object, "expected tree, got " + obj.type);
            Directory dir = parse_directory(obj.bytes, digest_len);
            if (expanded) {
                writer.put_as(id_of(hex, Kind::directory), dir);
                done.insert(hex);
                continue;
            }
            stack.push_back({hex, true});
            for (const auto& e : dir.entries) {
                std::string child_hex = detail::to_hex(e.target.digest());
                if (e.target.kind == Kind::content) {
                    if (settled(child_hex, Kind::content)) continue;
                    auto blob = objects.fetch(child_hex);
                    if (blob.type != "blob")
                        raise(Errc::unsupported_object, "tree entry of type " + blob.type);
                    Content c{blob.bytes.size(), std::move(blob.bytes)};
                    writer.put_as(e.target, c);
                    done.insert(child_hex);
                } else if (e.target.kind == Kind::directory) {
                    if (!done.count(child_hex)) stack.push_back({child_hex, false});
                }
                // Submodule links (revision targets) stay unresolved.
            }
        }
    };

    // Commit walk: parents and root tree before the commit itself.
    auto ingest_commit = [&](const std::string& head_hex) {
        if (settled(head_hex, Kind::revision)) return;
        std::vector<std::pair<std::string, bool>> stack{{head_hex, false}};
        while (!stack.empty()) {
            auto [hex, expanded] = stack.back();
            stack.pop_back();
            if (done.count(hex)) continue;
            auto obj = objects.fetch(hex);
            if (obj.type != "commit")
                raise(Errc::unsupported_object, "ref chain hit a " + obj.type);
            Revision rev = parse_revision(obj.bytes, digest_len);
            if (expanded) {
                writer.put_as(id_of(hex, Kind::revision), rev);
                done.insert(hex);
                continue;
            }
            stack.push_back({hex, true});
            ingest_tree(detail::to_hex(rev.root.digest()));
            for (const auto& p : rev.parents) {
                std::string parent_hex = detail::to_hex(p.digest());
                if (!done.count(parent_hex) && !settled(parent_hex, Kind::revision))
                    stack.push_back({parent_hex, false});
            }
        }
    };

    auto ingest_tag = [&](const std::string& hex) {
        if (settled(hex, Kind::release)) return;
        auto obj = objects.fetch(hex);
        if (obj.type != "tag") raise(Errc::unsupported_object, "expected tag, got " + obj.type);
        Release rel = parse_release(obj.bytes, digest_len);  // rejects non-commit targets
        ingest_commit(detail::to_hex(rel.target.digest()));
        writer.put_as(id_of(hex, Kind::release), rel);
        done.insert(hex);
    };

    std::vector<SnapshotBranch> branches;
    for (const auto& ref : refs) {
        if (ref.kind == "commit") {
            ingest_commit(ref.hex);
            branches.push_back({ref.name, id_of(ref.hex, Kind::revision)});
        } else if (ref.kind == "tag") {
            ingest_tag(ref.hex);
            branches.push_back({ref.name, id_of(ref.hex, Kind::release)});
        } else if (ref.kind == "tree") {
            ingest_tree(ref.hex);
            branches.push_back({ref.name, id_of(ref.hex, Kind::directory)});
        } else {
            raise(Errc::unsupported_object, "ref " + ref.name + " points at a " + ref.kind);
        }
    }

    auto snapshot = make_snapshot(std::move(branches));
    auto snap_id = writer.put(snapshot).first;
    auto visit = writer.record_visit(origin_url, visit_time, snap_id);
    auto stats = writer.stats();
    writer.commit();
    return {stats, visit};
}

} // namespace prov
