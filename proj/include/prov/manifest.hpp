#pragma once
// Canonical manifests: the byte strings that node ids are computed over, and
// the serialized form nodes are stored and parsed back from.
//
// Contents, directories, revisions, and releases use the Git object formats
// (`blob`, `tree`, `commit`, `tag`) so that nodes ingested from real
// repositories keep their native object ids bit-exactly.  Snapshots use a
// canonical sorted `branch-name NUL kind NUL raw-digest` manifest.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <unordered_set>

#include "digest.hpp"
#include "errors.hpp"
#include "nodes.hpp"

namespace prov {

// ---------------------------------------------------------------------------
// Ordering and validation

// Git tree order: byte comparison with directories compared as name + "/".
inline bool tree_entry_less(const DirectoryEntry& a, const DirectoryEntry& b) {
    const std::string& an = a.name;
    const std::string& bn = b.name;
    size_t n = std::min(an.size(), bn.size());
    int c = std::memcmp(an.data(), bn.data(), n);
    if (c != 0) return c < 0;
    auto next = [n](const std::string& s, const DirectoryEntry& e) -> unsigned char {
        if (n < s.size()) return static_cast<unsigned char>(s[n]);
        return e.target.kind == Kind::directory ? static_cast<unsigned char>('/') : 0;
    };
    return next(an, a) < next(bn, b);
}

inline void validate_entry_name(std::string_view name) {
    if (name.empty())
        raise(Errc::invalid_entry_name, "empty directory entry name");
    if (name.find('/') != std::string_view::npos || name.find('\0') != std::string_view::npos)
        raise(Errc::invalid_entry_name, "entry name contains '/' or NUL: " + std::string(name));
}

inline void validate_directory(const Directory& dir) {
    std::unordered_set<std::string_view> seen;
    for (size_t i = 0; i < dir.entries.size(); ++i) {
        const auto& e = dir.entries[i];
        validate_entry_name(e.name);
        switch (e.target.kind) {
        case Kind::content: case Kind::directory: case Kind::revision: break;
        default:
            raise(Errc::invalid_argument, "directory entry targets a " +
                                              std::string(kind_name(e.target.kind)));
        }
        if (!seen.insert(e.name).second)
            raise(Errc::invalid_entry_name, "duplicate entry name: " + e.name);
        if (i > 0 && !tree_entry_less(dir.entries[i - 1], e))
            raise(Errc::invalid_argument, "directory entries not in canonical order");
    }
}

// Builds a directory in canonical order from entries given in any order.
inline Directory make_directory(std::vector<DirectoryEntry> entries) {
    std::sort(entries.begin(), entries.end(), tree_entry_less);
    Directory d{std::move(entries)};
    validate_directory(d);
    return d;
}

inline void validate_snapshot(const Snapshot& snap) {
    std::unordered_set<std::string_view> seen;
    for (size_t i = 0; i < snap.branches.size(); ++i) {
        const auto& b = snap.branches[i];
        if (b.name.empty() || b.name.find('\0') != std::string::npos)
            raise(Errc::invalid_argument, "bad branch name");
        switch (b.target.kind) {
        case Kind::revision: case Kind::release: case Kind::directory: break;
        default:
            raise(Errc::invalid_argument, "snapshot branch targets a " +
                                              std::string(kind_name(b.target.kind)));
        }
        if (!seen.insert(b.name).second)
            raise(Errc::invalid_argument, "duplicate branch name: " + b.name);
        if (i > 0 && !(snap.branches[i - 1].name < b.name))
            raise(Errc::invalid_argument, "snapshot branches not sorted");
    }
}

inline Snapshot make_snapshot(std::vector<SnapshotBranch> branches) {
    std::sort(branches.begin(), branches.end(),
              [](const SnapshotBranch& a, const SnapshotBranch& b) { return a.name < b.name; });
    Snapshot s{std::move(branches)};
    validate_snapshot(s);
    return s;
}

// ---------------------------------------------------------------------------
// Serialization to manifest bodies

namespace detail {

inline std::string dec(int64_t v) { return std::to_string(v); }

// Octal without leading zeros, as Git prints tree entry modes ("40000").
inline std::string oct(uint32_t v) {
    char buf[16];
    int n = std::snprintf(buf, sizeof buf, "%o", v);
    return std::string(buf, static_cast<size_t>(n));
}

inline std::string person_line(std::string_view role, const std::string& who,
                               const Timestamp& ts) {
    std::string out(role);
    out += ' ';
    out += who;
    out += ' ';
    out += dec(ts.secs);
    out += ' ';
    out += ts.offset;
    out += '\n';
    return out;
}

// Header values may span lines; continuation lines are prefixed with a space.
inline void append_header(std::string& out, const std::string& key, const std::string& value) {
    out += key;
    out += ' ';
    for (char c : value) {
        out += c;
        if (c == '\n') out += ' ';
    }
    out += '\n';
}

} // namespace detail

inline std::string content_body(const Content& c) {
    if (!c.data)
        raise(Errc::no_content_data, "content has no data bytes to hash");
    if (c.data->size() != c.length)
        raise(Errc::invalid_argument, "content length field disagrees with data");
    return *c.data;
}

inline std::string directory_body(const Directory& d) {
    validate_directory(d);
    std::string out;
    for (const auto& e : d.entries) {
        out += detail::oct(e.perms);
        out += ' ';
        out += e.name;
        out += '\0';
        out.append(e.target.digest());
    }
    return out;
}

inline std::string revision_body(const Revision& r) {
    if (r.root.kind != Kind::directory)
        raise(Errc::invalid_argument, "revision root must be a directory");
    std::string out = "tree " + detail::to_hex(r.root.digest()) + "\n";
    for (const auto& p : r.parents) {
        if (p.kind != Kind::revision)
            raise(Errc::invalid_argument, "revision parent must be a revision");
        out += "parent " + detail::to_hex(p.digest()) + "\n";
    }
    out += detail::person_line("author", r.author, r.author_date);
    out += detail::person_line("committer", r.committer, r.committer_date);
    for (const auto& h : r.extra_headers) detail::append_header(out, h.key, h.value);
    out += '\n';
    out += r.message;
    return out;
}

namespace detail {

inline std::string_view git_type_name(Kind k) {
    switch (k) {
    case Kind::content:   return "blob";
    case Kind::directory: return "tree";
    case Kind::revision:  return "commit";
    case Kind::release:   return "tag";
    default:
        raise(Errc::invalid_argument, "no git type for this kind");
    }
}

} // namespace detail

inline std::string release_body(const Release& r) {
    if (r.target.kind != Kind::revision)
        raise(Errc::unsupported_object, "release target must be a revision");
    std::string out = "object " + detail::to_hex(r.target.digest()) + "\n";
    out += "type ";
    out += detail::git_type_name(r.target.kind);
    out += "\n";
    out += "tag " + r.name + "\n";
    if (r.tagger) {
        Timestamp ts = r.date.value_or(Timestamp{});
        out += detail::person_line("tagger", *r.tagger, ts);
    }
    out += '\n';
    out += r.message;
    return out;
}

inline std::string snapshot_body(const Snapshot& s) {
    validate_snapshot(s);
    std::string out;
    for (const auto& b : s.branches) {
        out += b.name;
        out += '\0';
        out += kind_name(b.target.kind);
        out += '\0';
        out.append(b.target.digest());
    }
    return out;
}

// The stored value for a node; contents store raw data separately, so this
// covers the four structured kinds.
inline std::string node_body(const DagNode& n) {
    switch (n.index()) {
    case 1: return directory_body(std::get<Directory>(n));
    case 2: return revision_body(std::get<Revision>(n));
    case 3: return release_body(std::get<Release>(n));
    case 4: return snapshot_body(std::get<Snapshot>(n));
    default:
        raise(Errc::invalid_argument, "contents are serialized as raw data");
    }
}

// ---------------------------------------------------------------------------
// Hashing

inline std::string_view manifest_type_name(Kind k) {
    return k == Kind::snapshot ? std::string_view("snapshot") : detail::git_type_name(k);
}

inline NodeId hash_body(const HashSpec& spec, Kind kind, std::string_view body) {
    Hasher h(spec);
    std::string header(manifest_type_name(kind));
    header += ' ';
    header += detail::dec(static_cast<int64_t>(body.size()));
    header += '\0';
    h.update(header);
    h.update(body);
    return make_node_id(kind, h.finish());
}

inline NodeId compute_node_id(const DagNode& n, const HashSpec& spec) {
    Kind k = node_kind(n);
    std::string body = k == Kind::content ? content_body(std::get<Content>(n)) : node_body(n);
    return hash_body(spec, k, body);
}

// ---------------------------------------------------------------------------
// Parsing manifest bodies back into nodes

namespace detail {

class BodyReader {
public:
    explicit BodyReader(std::string_view body) : rest_(body) {}

    bool empty() const { return rest_.empty(); }
    std::string_view rest() const { return rest_; }

    // Consumes up to and excluding `delim`; raises if absent.
    std::string_view until(char delim) {
        auto pos = rest_.find(delim);
        if (pos == std::string_view::npos)
            raise(Errc::parse_error, "truncated manifest");
        auto out = rest_.substr(0, pos);
        rest_.remove_prefix(pos + 1);
        return out;
    }

    std::string_view take(size_t n) {
        if (rest_.size() < n)
            raise(Errc::parse_error, "truncated manifest");
        auto out = rest_.substr(0, n);
        rest_.remove_prefix(n);
        return out;
    }

private:
    std::string_view rest_;
};

inline uint32_t parse_octal(std::string_view s) {
    uint32_t v = 0;
    if (s.empty()) raise(Errc::parse_error, "empty mode");
    for (char c : s) {
        if (c < '0' || c > '7') raise(Errc::parse_error, "bad octal mode");
        v = v * 8 + static_cast<uint32_t>(c - '0');
    }
    return v;
}

inline int64_t parse_i64(std::string_view s) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        raise(Errc::parse_error, "bad integer: " + std::string(s));
    return v;
}

// "Name <email> 1234 +0000" → (who, timestamp)
inline std::pair<std::string, Timestamp> parse_person(std::string_view line) {
    auto tz_sp = line.rfind(' ');
    if (tz_sp == std::string_view::npos) raise(Errc::parse_error, "bad person line");
    auto secs_sp = line.rfind(' ', tz_sp - 1);
    if (secs_sp == std::string_view::npos) raise(Errc::parse_error, "bad person line");
    Timestamp ts;
    ts.secs = parse_i64(line.substr(secs_sp + 1, tz_sp - secs_sp - 1));
    ts.offset = std::string(line.substr(tz_sp + 1));
    return {std::string(line.substr(0, secs_sp)), ts};
}

inline NodeId parse_hex_id(Kind kind, std::string_view hex, size_t digest_len) {
    auto raw = from_hex(hex);
    if (!raw || raw->size() != digest_len)
        raise(Errc::parse_error, "bad hex id in manifest");
    return make_node_id(kind, *raw);
}

// Splits a commit/tag body into (headers, message); continuation lines are
// folded back into their header's value.
inline std::pair<std::vector<ExtraHeader>, std::string> parse_headers(std::string_view body) {
    std::vector<ExtraHeader> headers;
    size_t pos = 0;
    while (pos < body.size()) {
        if (body[pos] == '\n') { ++pos; break; }  // blank line: message follows
        auto eol = body.find('\n', pos);
        if (eol == std::string_view::npos)
            raise(Errc::parse_error, "unterminated header line");
        std::string_view line = body.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.front() == ' ') {
            if (headers.empty()) raise(Errc::parse_error, "continuation without header");
            headers.back().value += '\n';
            headers.back().value.append(line.substr(1));
            continue;
        }
        auto sp = line.find(' ');
        if (sp == std::string_view::npos)
            raise(Errc::parse_error, "header line without value");
        headers.push_back({std::string(line.substr(0, sp)), std::string(line.substr(sp + 1))});
    }
    return {std::move(headers), std::string(body.substr(pos))};
}

} // namespace detail

inline Directory parse_directory(std::string_view body, size_t digest_len) {
    Directory d;
    detail::BodyReader r(body);
    while (!r.empty()) {
        DirectoryEntry e;
        e.perms = detail::parse_octal(r.until(' '));
        e.name = std::string(r.until('\0'));
        // Git modes: 40000 directory, 160000 submodule, everything else blob.
        Kind kind = Kind::content;
        if ((e.perms & 0170000u) == 0040000u) kind = Kind::directory;
        else if ((e.perms & 0170000u) == 0160000u) kind = Kind::revision;
        e.target = make_node_id(kind, r.take(digest_len));
        d.entries.push_back(std::move(e));
    }
    validate_directory(d);
    return d;
}

inline Revision parse_revision(std::string_view body, size_t digest_len) {
    auto [headers, message] = detail::parse_headers(body);
    Revision rev;
    rev.message = std::move(message);
    bool have_root = false, have_author = false, have_committer = false;
    for (auto& h : headers) {
        if (h.key == "tree" && !have_root) {
            rev.root = detail::parse_hex_id(Kind::directory, h.value, digest_len);
            have_root = true;
        } else if (h.key == "parent" && !have_committer) {
            rev.parents.push_back(detail::parse_hex_id(Kind::revision, h.value, digest_len));
        } else if (h.key == "author" && !have_author) {
            std::tie(rev.author, rev.author_date) = detail::parse_person(h.value);
            have_author = true;
        } else if (h.key == "committer" && !have_committer) {
            std::tie(rev.committer, rev.committer_date) = detail::parse_person(h.value);
            have_committer = true;
        } else {
            rev.extra_headers.push_back(std::move(h));
        }
    }
    if (!have_root || !have_author || !have_committer)
        raise(Errc::parse_error, "revision manifest missing tree/author/committer");
    return rev;
}

inline Release parse_release(std::string_view body, size_t digest_len) {
    auto [headers, message] = detail::parse_headers(body);
    Release rel;
    rel.message = std::move(message);
    bool have_target = false;
    std::string type;
    for (auto& h : headers) {
        if (h.key == "object") {
            rel.target = detail::parse_hex_id(Kind::revision, h.value, digest_len);
            have_target = true;
        } else if (h.key == "type") {
            type = h.value;
        } else if (h.key == "tag") {
            rel.name = h.value;
        } else if (h.key == "tagger") {
            auto [who, ts] = detail::parse_person(h.value);
            rel.tagger = who;
            rel.date = ts;
        }
    }
    if (!have_target) raise(Errc::parse_error, "release manifest missing object");
    if (!type.empty() && type != "commit")
        raise(Errc::unsupported_object, "release target type: " + type);
    return rel;
}

inline Snapshot parse_snapshot(std::string_view body, size_t digest_len) {
    Snapshot s;
    detail::BodyReader r(body);
    while (!r.empty()) {
        SnapshotBranch b;
        b.name = std::string(r.until('\0'));
        auto kind_str = r.until('\0');
        Kind kind;
        if (kind_str == "revision") kind = Kind::revision;
        else if (kind_str == "release") kind = Kind::release;
        else if (kind_str == "directory") kind = Kind::directory;
        else raise(Errc::parse_error, "bad branch target kind");
        b.target = make_node_id(kind, r.take(digest_len));
        s.branches.push_back(std::move(b));
    }
    validate_snapshot(s);
    return s;
}

} // namespace prov
