#pragma once
// Portable corpus dump: one JSON object per line, `type` field selecting the
// record kind, ids rendered as `kind:hex`.  Streams must be topologically
// ordered (every referenced id defined earlier or already stored); loading is
// strictly sequential and keeps memory bounded.  Byte-string fields (names,
// messages, authors) are carried as JSON strings with each byte mapped to
// U+0000..U+00FF, which survives arbitrary bytes losslessly; content data
// travels base64-encoded and is optional.

#include <zlib.h>

#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "store.hpp"

namespace prov {

namespace detail {

// --- byte string <-> JSON-safe string (Latin-1 codepoints) ---

inline std::string bytes_to_text(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

inline std::string text_to_bytes(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size();) {
        unsigned char c = text[i];
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            i += 1;
        } else if ((c == 0xC2 || c == 0xC3) && i + 1 < text.size() &&
                   (static_cast<unsigned char>(text[i + 1]) & 0xC0) == 0x80) {
            // Two-byte sequence encoding U+0080..U+00FF.
            out.push_back(static_cast<char>(((c & 0x03) << 6) |
                                            (static_cast<unsigned char>(text[i + 1]) & 0x3F)));
            i += 2;
        } else {
            raise(Errc::parse_error, "byte-string field contains codepoints above U+00FF");
        }
    }
    return out;
}

// --- base64 ---

inline constexpr char b64_alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::string_view in) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= in.size(); i += 3) {
        uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8) |
                     static_cast<unsigned char>(in[i + 2]);
        out.push_back(b64_alphabet[(v >> 18) & 63]);
        out.push_back(b64_alphabet[(v >> 12) & 63]);
        out.push_back(b64_alphabet[(v >> 6) & 63]);
        out.push_back(b64_alphabet[v & 63]);
    }
    if (i + 1 == in.size()) {
        uint32_t v = static_cast<unsigned char>(in[i]) << 16;
        out.push_back(b64_alphabet[(v >> 18) & 63]);
        out.push_back(b64_alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == in.size()) {
        uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8);
        out.push_back(b64_alphabet[(v >> 18) & 63]);
        out.push_back(b64_alphabet[(v >> 12) & 63]);
        out.push_back(b64_alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

inline std::string base64_decode(std::string_view in) {
    static const auto table = [] {
        std::array<int8_t, 256> t;
        t.fill(-1);
        for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(b64_alphabet[i])] = int8_t(i);
        return t;
    }();
    if (in.size() % 4 != 0) raise(Errc::parse_error, "bad base64 length");
    std::string out;
    out.reserve(in.size() / 4 * 3);
    for (size_t i = 0; i < in.size(); i += 4) {
        int pad = 0;
        uint32_t v = 0;
        for (int j = 0; j < 4; ++j) {
            char c = in[i + j];
            if (c == '=') {
                if (i + 4 != in.size() || j < 2) raise(Errc::parse_error, "bad base64 padding");
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad) raise(Errc::parse_error, "base64 data after padding");
            int8_t d = table[static_cast<unsigned char>(c)];
            if (d < 0) raise(Errc::parse_error, "bad base64 character");
            v = (v << 6) | static_cast<uint32_t>(d);
        }
        out.push_back(static_cast<char>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<char>(v & 0xff));
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Line sources: plain stream, gzip file, or plain file by extension.

class LineReader {
public:
    virtual ~LineReader() = default;
    virtual bool next_line(std::string& out) = 0;
};

class StreamLineReader : public LineReader {
public:
    explicit StreamLineReader(std::istream& in) : in_(in) {}
    bool next_line(std::string& out) override {
        return static_cast<bool>(std::getline(in_, out));
    }

private:
    std::istream& in_;
};

class GzipLineReader : public LineReader {
public:
    explicit GzipLineReader(const std::filesystem::path& path)
        : gz_(gzopen(path.string().c_str(), "rb")) {
        if (!gz_) raise(Errc::io_failure, "cannot open " + path.string());
    }
    ~GzipLineReader() override {
        if (gz_) gzclose(gz_);
    }
    bool next_line(std::string& out) override {
        out.clear();
        char buf[1 << 16];
        for (;;) {
            if (!gzgets(gz_, buf, sizeof buf)) return !out.empty();
            out += buf;
            if (!out.empty() && out.back() == '\n') {
                out.pop_back();
                return true;
            }
        }
    }

private:
    gzFile gz_;
};

// ---------------------------------------------------------------------------
// Record codec

namespace detail {

inline nlohmann::ordered_json timestamp_to_json(const Timestamp& t) {
    return {{"secs", t.secs}, {"offset", t.offset}};
}

inline Timestamp timestamp_from_json(const nlohmann::json& j) {
    Timestamp t;
    t.secs = j.at("secs").get<int64_t>();
    t.offset = j.at("offset").get<std::string>();
    return t;
}

} // namespace detail

inline nlohmann::ordered_json dump_record(const NodeId& id, const DagNode& node) {
    using detail::bytes_to_text;
    nlohmann::ordered_json j;
    j["type"] = kind_name(id.kind);
    j["id"] = to_string(id);
    switch (node_kind(node)) {
    case Kind::content: {
        const auto& c = std::get<Content>(node);
        j["length"] = c.length;
        if (c.data) j["data"] = detail::base64_encode(*c.data);
        break;
    }
    case Kind::directory: {
        auto entries = nlohmann::ordered_json::array();
        for (const auto& e : std::get<Directory>(node).entries) {
            entries.push_back({{"name", bytes_to_text(e.name)},
                               {"target", to_string(e.target)},
                               {"perms", e.perms}});
        }
        j["entries"] = std::move(entries);
        break;
    }
    case Kind::revision: {
        const auto& r = std::get<Revision>(node);
        j["root"] = to_string(r.root);
        auto parents = nlohmann::ordered_json::array();
        for (const auto& p : r.parents) parents.push_back(to_string(p));
        j["parents"] = std::move(parents);
        j["author"] = bytes_to_text(r.author);
        j["author_date"] = detail::timestamp_to_json(r.author_date);
        j["committer"] = bytes_to_text(r.committer);
        j["committer_date"] = detail::timestamp_to_json(r.committer_date);
        if (!r.extra_headers.empty()) {
            auto headers = nlohmann::ordered_json::array();
            for (const auto& h : r.extra_headers)
                headers.push_back({bytes_to_text(h.key), bytes_to_text(h.value)});
            j["extra_headers"] = std::move(headers);
        }
        j["message"] = bytes_to_text(r.message);
        break;
    }
    case Kind::release: {
        const auto& r = std::get<Release>(node);
        j["target"] = to_string(r.target);
        j["name"] = bytes_to_text(r.name);
        if (r.tagger) j["tagger"] = bytes_to_text(*r.tagger);
        if (r.date) j["date"] = detail::timestamp_to_json(*r.date);
        j["message"] = bytes_to_text(r.message);
        break;
    }
    case Kind::snapshot: {
        auto branches = nlohmann::ordered_json::array();
        for (const auto& b : std::get<Snapshot>(node).branches)
            branches.push_back({{"name", bytes_to_text(b.name)}, {"target", to_string(b.target)}});
        j["branches"] = std::move(branches);
        break;
    }
    }
    return j;
}

namespace detail {

inline NodeId parse_id_field(const nlohmann::json& j, const char* field, size_t digest_len,
                             std::optional<Kind> expect = std::nullopt) {
    auto text = j.at(field).get<std::string>();
    auto id = parse_node_id(text, digest_len);
    if (!id) raise(Errc::parse_error, std::string("bad id in field ") + field + ": " + text);
    if (expect && id->kind != *expect)
        raise(Errc::parse_error, std::string("field ") + field + " must be a " +
                                     std::string(kind_name(*expect)));
    return *id;
}

} // namespace detail

// Parses one dump line into either (id, node) or an origin/visit record.
struct ParsedRecord {
    enum class What { node, origin, visit } what;
    NodeId id;          // when node
    DagNode node;       // when node
    std::string origin; // when origin or visit
    int64_t time = 0;   // when visit
    NodeId snapshot;    // when visit
};

inline ParsedRecord parse_dump_record(const nlohmann::json& j, size_t digest_len) {
    using detail::text_to_bytes;
    ParsedRecord rec;
    auto type = j.at("type").get<std::string>();
    if (type == "origin") {
        rec.what = ParsedRecord::What::origin;
        rec.origin = j.at("url").get<std::string>();
        return rec;
    }
    if (type == "visit") {
        rec.what = ParsedRecord::What::visit;
        rec.origin = j.at("origin").get<std::string>();
        rec.time = j.at("time").get<int64_t>();
        rec.snapshot = detail::parse_id_field(j, "snapshot", digest_len, Kind::snapshot);
        return rec;
    }

    rec.what = ParsedRecord::What::node;
    if (type == "content") {
        Content c;
        c.length = j.at("length").get<uint64_t>();
        if (j.contains("data")) {
            c.data = detail::base64_decode(j.at("data").get<std::string>());
            if (c.data->size() != c.length)
                raise(Errc::parse_error, "content data length disagrees with length field");
        }
        rec.id = detail::parse_id_field(j, "id", digest_len, Kind::content);
        rec.node = std::move(c);
    } else if (type == "directory") {
        Directory d;
        for (const auto& e : j.at("entries")) {
            DirectoryEntry de;
            de.name = text_to_bytes(e.at("name").get<std::string>());
            de.target = detail::parse_id_field(e, "target", digest_len);
            de.perms = e.at("perms").get<uint32_t>();
            d.entries.push_back(std::move(de));
        }
        d = make_directory(std::move(d.entries));
        rec.id = detail::parse_id_field(j, "id", digest_len, Kind::directory);
        rec.node = std::move(d);
    } else if (type == "revision") {
        Revision r;
        r.root = detail::parse_id_field(j, "root", digest_len, Kind::directory);
        for (const auto& p : j.at("parents"))
            r.parents.push_back(detail::parse_id_field(
                nlohmann::json{{"p", p}}, "p", digest_len, Kind::revision));
        r.author = text_to_bytes(j.at("author").get<std::string>());
        r.author_date = detail::timestamp_from_json(j.at("author_date"));
        r.committer = text_to_bytes(j.at("committer").get<std::string>());
        r.committer_date = detail::timestamp_from_json(j.at("committer_date"));
        if (j.contains("extra_headers"))
            for (const auto& h : j.at("extra_headers"))
                r.extra_headers.push_back({text_to_bytes(h.at(0).get<std::string>()),
                                           text_to_bytes(h.at(1).get<std::string>())});
        r.message = text_to_bytes(j.at("message").get<std::string>());
        rec.id = detail::parse_id_field(j, "id", digest_len, Kind::revision);
        rec.node = std::move(r);
    } else if (type == "release") {
        Release r;
        r.target = detail::parse_id_field(j, "target", digest_len, Kind::revision);
        r.name = text_to_bytes(j.at("name").get<std::string>());
        if (j.contains("tagger")) r.tagger = text_to_bytes(j.at("tagger").get<std::string>());
        if (j.contains("date")) r.date = detail::timestamp_from_json(j.at("date"));
        r.message = text_to_bytes(j.at("message").get<std::string>());
        rec.id = detail::parse_id_field(j, "id", digest_len, Kind::release);
        rec.node = std::move(r);
    } else if (type == "snapshot") {
        std::vector<SnapshotBranch> branches;
        for (const auto& b : j.at("branches"))
            branches.push_back({text_to_bytes(b.at("name").get<std::string>()),
                                detail::parse_id_field(b, "target", digest_len)});
        rec.id = detail::parse_id_field(j, "id", digest_len, Kind::snapshot);
        rec.node = make_snapshot(std::move(branches));
    } else {
        raise(Errc::parse_error, "unknown record type: " + type);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Load / export

inline IngestStats load_dump(DagStore& store, LineReader& reader) {
    auto writer = store.begin_write();
    std::string line;
    uint64_t line_no = 0;
    while (reader.next_line(line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            auto rec = parse_dump_record(j, store.hash().len);
            switch (rec.what) {
            case ParsedRecord::What::node:
                writer.put_as(rec.id, rec.node);
                break;
            case ParsedRecord::What::origin:
                writer.add_origin(rec.origin);
                break;
            case ParsedRecord::What::visit:
                writer.record_visit(rec.origin, rec.time, rec.snapshot);
                break;
            }
        } catch (const nlohmann::json::exception& e) {
            raise(Errc::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            if (e.code() == Errc::parse_error || e.code() == Errc::dangling_reference ||
                e.code() == Errc::missing_node)
                raise(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
            throw;
        }
    }
    auto stats = writer.stats();
    writer.commit();
    return stats;
}

inline IngestStats load_dump(DagStore& store, std::istream& in) {
    StreamLineReader reader(in);
    return load_dump(store, reader);
}

inline IngestStats load_dump_file(DagStore& store, const std::filesystem::path& path) {
    if (path.extension() == ".gz") {
        GzipLineReader reader(path);
        return load_dump(store, reader);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_failure, "cannot open " + path.string());
    StreamLineReader reader(in);
    return load_dump(store, reader);
}

// Writes the whole store as a topologically ordered dump: contents, then
// directories (children first), revisions (parents first), releases,
// snapshots, origins, visits.  Deterministic for a given store.
inline void export_dump(DagStore& store, std::ostream& out) {
    auto emit = [&](const NodeId& id, const DagNode& node) {
        out << dump_record(id, node).dump() << "\n";
    };

    auto& raw = store.raw();
    auto scan_kind = [&](Kind k) {
        return raw.count_prefix("nodes", std::string(1, static_cast<char>(k))) > 0
                   ? std::optional<storage::Scan>(
                         raw.scan("nodes", std::string(1, static_cast<char>(k))))
                   : std::nullopt;
    };

    if (auto s = scan_kind(Kind::content))
        while (s->next()) {
            NodeId id = keys::parse_node_key(s->key(), store.hash().len);
            emit(id, store.decode_node(Kind::content, s->value()));
        }

    // Directories: children before parents (iterative post-order).
    std::unordered_set<NodeId, NodeIdHash> done;
    if (auto s = scan_kind(Kind::directory))
        while (s->next()) {
            NodeId start = keys::parse_node_key(s->key(), store.hash().len);
            if (done.count(start)) continue;
            std::vector<std::pair<NodeId, bool>> stack{{start, false}};
            while (!stack.empty()) {
                auto [id, expanded] = stack.back();
                stack.pop_back();
                if (done.count(id)) continue;
                auto node = store.get_node(id);
                if (!node) continue;  // dangling edge: reported by validate
                if (expanded) {
                    done.insert(id);
                    emit(id, *node);
                    continue;
                }
                stack.push_back({id, true});
                for (const auto& e : std::get<Directory>(*node).entries)
                    if (e.target.kind == Kind::directory && !done.count(e.target))
                        stack.push_back({e.target, false});
            }
        }

    // Revisions: chronological, hoisting not-yet-emitted parents first.
    done.clear();
    auto rs = store.revisions_chronological();
    while (rs.next()) {
        if (done.count(rs.id())) continue;
        std::vector<std::pair<NodeId, bool>> stack{{rs.id(), false}};
        while (!stack.empty()) {
            auto [id, expanded] = stack.back();
            stack.pop_back();
            if (done.count(id)) continue;
            auto node = store.get_revision(id);
            if (!node) continue;
            if (expanded) {
                done.insert(id);
                emit(id, *node);
                continue;
            }
            stack.push_back({id, true});
            for (const auto& p : node->parents)
                if (!done.count(p)) stack.push_back({p, false});
        }
    }

    for (Kind k : {Kind::release, Kind::snapshot})
        if (auto s = scan_kind(k))
            while (s->next()) {
                NodeId id = keys::parse_node_key(s->key(), store.hash().len);
                emit(id, store.decode_node(k, s->value()));
            }

    for (const auto& url : store.origins()) {
        nlohmann::ordered_json j{{"type", "origin"}, {"url", url}};
        out << j.dump() << "\n";
    }
    for (const auto& v : store.visits()) {
        nlohmann::ordered_json j{{"type", "visit"},
                                 {"origin", v.origin},
                                 {"time", v.time},
                                 {"snapshot", to_string(v.snapshot)}};
        out << j.dump() << "\n";
    }
}

} // namespace prov
