#pragma once
// Error taxonomy for the provenance engine.  Failures that callers are
// expected to branch on carry a stable Errc; plain absence (lookup misses,
// empty query results) is reported with std::optional instead of throwing.

#include <stdexcept>
#include <string>
#include <string_view>

namespace prov {

enum class Errc {
    invalid_argument,     // malformed parameter, bad config value, bad CLI input
    invalid_entry_name,   // directory entry name empty or containing '/' or NUL
    parse_error,          // undecodable manifest, dump record, or key bytes
    corrupt,              // store-level invariant violated (bad magic, id mismatch)
    dangling_reference,   // strict insert/load saw an edge to a missing node
    missing_node,         // an operation required a node that is not present
    no_content_data,      // content bytes requested but only metadata is stored
    unknown_keyspace,     // storage access to a keyspace that was never declared
    locked,               // second writer tried to open a store
    closed,               // use after close
    io_failure,           // filesystem / SQLite / pipe failure
    clock_regression,     // strict-order build saw a timestamp below the watermark
    repo_not_found,       // git ingestion pointed at something that is not a repo
    unsupported_object,   // git object shape outside the supported model
    insufficient_data,    // a fit was asked for on too few points
    mismatched_corpus,    // cross-model comparison over different corpora
    missing_visit_journal // origin analytics need visits but none are recorded
};

inline std::string_view errc_name(Errc c) {
    switch (c) {
    case Errc::invalid_argument:      return "invalid_argument";
    case Errc::invalid_entry_name:    return "invalid_entry_name";
    case Errc::parse_error:           return "parse_error";
    case Errc::corrupt:               return "corrupt";
    case Errc::dangling_reference:    return "dangling_reference";
    case Errc::missing_node:          return "missing_node";
    case Errc::no_content_data:       return "no_content_data";
    case Errc::unknown_keyspace:      return "unknown_keyspace";
    case Errc::locked:                return "locked";
    case Errc::closed:                return "closed";
    case Errc::io_failure:            return "io_failure";
    case Errc::clock_regression:      return "clock_regression";
    case Errc::repo_not_found:        return "repo_not_found";
    case Errc::unsupported_object:    return "unsupported_object";
    case Errc::insufficient_data:     return "insufficient_data";
    case Errc::mismatched_corpus:     return "mismatched_corpus";
    case Errc::missing_visit_journal: return "missing_visit_journal";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace prov
