#pragma once
// In-memory node types for the deduplicated development-history graph:
// contents (leaves), directories, revisions, releases, snapshots, plus the
// origin/visit records that tie snapshots to the places they were found.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ids.hpp"

namespace prov {

// Seconds since the Unix epoch plus the recorded UTC offset, kept as the raw
// bytes seen on ingestion (e.g. "+0200") so manifests round-trip bit-exactly.
struct Timestamp {
    int64_t secs = 0;
    std::string offset = "+0000";

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

struct Content {
    uint64_t length = 0;
    std::optional<std::string> data;  // absent when only metadata was ingested

    friend bool operator==(const Content&, const Content&) = default;
};

struct DirectoryEntry {
    std::string name;      // single path component; no '/', not "", ".", ".."
    NodeId target;         // content, directory, or revision (submodule link)
    uint32_t perms = 0;    // posix-style mode bits, e.g. 0100644, 040000

    friend bool operator==(const DirectoryEntry&, const DirectoryEntry&) = default;
};

struct Directory {
    std::vector<DirectoryEntry> entries;  // canonical manifest order

    friend bool operator==(const Directory&, const Directory&) = default;
};

// One "key value" header pair beyond the modeled fields (e.g. gpgsig),
// preserved verbatim so ingested revision ids can be recomputed.
struct ExtraHeader {
    std::string key;
    std::string value;  // may contain newlines; serialized with continuations

    friend bool operator==(const ExtraHeader&, const ExtraHeader&) = default;
};

struct Revision {
    NodeId root;                      // directory capturing the tree
    std::vector<NodeId> parents;      // zero or more prior revisions
    std::string author;               // "Name <email>" as recorded
    Timestamp author_date;
    std::string committer;
    Timestamp committer_date;         // the revision timestamp t_R
    std::vector<ExtraHeader> extra_headers;
    std::string message;

    int64_t time() const { return committer_date.secs; }

    friend bool operator==(const Revision&, const Revision&) = default;
};

struct Release {
    NodeId target;                    // a revision (other targets unsupported)
    std::string name;                 // tag name, e.g. "v1.0"
    std::string target_kind = "revision";
    std::optional<std::string> tagger;
    std::optional<Timestamp> date;
    std::string message;

    friend bool operator==(const Release&, const Release&) = default;
};

struct SnapshotBranch {
    std::string name;   // e.g. "refs/heads/master"
    NodeId target;      // revision, release, or directory

    friend bool operator==(const SnapshotBranch&, const SnapshotBranch&) = default;
};

struct Snapshot {
    std::vector<SnapshotBranch> branches;  // canonical (name-sorted) order

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

using DagNode = std::variant<Content, Directory, Revision, Release, Snapshot>;

inline Kind node_kind(const DagNode& n) {
    switch (n.index()) {
    case 0: return Kind::content;
    case 1: return Kind::directory;
    case 2: return Kind::revision;
    case 3: return Kind::release;
    default: return Kind::snapshot;
    }
}

// Crawling records.  Origins are URLs; each visit stamps which snapshot a
// crawl of an origin produced and when.
struct Visit {
    uint64_t seq = 0;        // store-assigned, monotonically increasing
    std::string origin;
    int64_t time = 0;        // crawl time, seconds since epoch
    NodeId snapshot;

    friend bool operator==(const Visit&, const Visit&) = default;
};

} // namespace prov
