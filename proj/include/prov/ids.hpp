#pragma once
// Node identifiers: a node kind plus the digest of the node's canonical
// manifest.  Two nodes with equal manifests share one id, which is what makes
// the graph deduplicate across revisions, origins, and ingestion runs.

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace prov {

enum class Kind : uint8_t {
    content   = 1,
    directory = 2,
    revision  = 3,
    release   = 4,
    snapshot  = 5,
};

inline std::string_view kind_name(Kind k) {
    switch (k) {
    case Kind::content:   return "content";
    case Kind::directory: return "directory";
    case Kind::revision:  return "revision";
    case Kind::release:   return "release";
    case Kind::snapshot:  return "snapshot";
    }
    return "unknown";
}

// Short tag used in printable ids, e.g. "cnt:3f2a...".
inline std::string_view kind_tag(Kind k) {
    switch (k) {
    case Kind::content:   return "cnt";
    case Kind::directory: return "dir";
    case Kind::revision:  return "rev";
    case Kind::release:   return "rel";
    case Kind::snapshot:  return "snp";
    }
    return "unk";
}

inline std::optional<Kind> kind_from_tag(std::string_view tag) {
    if (tag == "cnt") return Kind::content;
    if (tag == "dir") return Kind::directory;
    if (tag == "rev") return Kind::revision;
    if (tag == "rel") return Kind::release;
    if (tag == "snp") return Kind::snapshot;
    return std::nullopt;
}

// Digest container sized for the largest supported hash (SHA-256); `len`
// says how many leading bytes are meaningful (20 for the SHA-1 default).
struct NodeId {
    Kind kind = Kind::content;
    uint8_t len = 0;
    std::array<unsigned char, 32> bytes{};

    std::string_view digest() const {
        return {reinterpret_cast<const char*>(bytes.data()), len};
    }

    friend bool operator==(const NodeId& a, const NodeId& b) {
        return a.kind == b.kind && a.len == b.len &&
               std::memcmp(a.bytes.data(), b.bytes.data(), a.len) == 0;
    }

    // Orders by kind, then digest bytes: the tie-break order used by queries.
    friend std::strong_ordering operator<=>(const NodeId& a, const NodeId& b) {
        if (a.kind != b.kind) return a.kind <=> b.kind;
        int c = std::memcmp(a.bytes.data(), b.bytes.data(), std::min(a.len, b.len));
        if (c != 0) return c <=> 0;
        return a.len <=> b.len;
    }
};

namespace detail {

inline constexpr char hex_digits[] = "0123456789abcdef";

inline std::string to_hex(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(hex_digits[c >> 4]);
        out.push_back(hex_digits[c & 0xf]);
    }
    return out;
}

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline std::optional<std::string> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    std::string out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]), lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

} // namespace detail

inline NodeId make_node_id(Kind kind, std::string_view digest) {
    if (digest.size() == 0 || digest.size() > 32)
        raise(Errc::invalid_argument, "digest length out of range");
    NodeId id;
    id.kind = kind;
    id.len = static_cast<uint8_t>(digest.size());
    std::memcpy(id.bytes.data(), digest.data(), digest.size());
    return id;
}

inline std::string to_string(const NodeId& id) {
    return std::string(kind_tag(id.kind)) + ":" + detail::to_hex(id.digest());
}

// Parses "rev:ab12..."; digest length must match `digest_len` when given.
inline std::optional<NodeId> parse_node_id(std::string_view text,
                                           std::optional<size_t> digest_len = std::nullopt) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto kind = kind_from_tag(text.substr(0, colon));
    if (!kind) return std::nullopt;
    auto raw = detail::from_hex(text.substr(colon + 1));
    if (!raw || raw->empty() || raw->size() > 32) return std::nullopt;
    if (digest_len && raw->size() != *digest_len) return std::nullopt;
    return make_node_id(*kind, *raw);
}

struct NodeIdHash {
    size_t operator()(const NodeId& id) const noexcept {
        // FNV-1a over kind + digest; digests are uniform, so this is plenty.
        uint64_t h = 1469598103934665603ull;
        auto mix = [&h](unsigned char c) { h = (h ^ c) * 1099511628211ull; };
        mix(static_cast<unsigned char>(id.kind));
        for (uint8_t i = 0; i < id.len; ++i) mix(id.bytes[i]);
        return static_cast<size_t>(h);
    }
};

} // namespace prov
