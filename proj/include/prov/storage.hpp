#pragma once
// Persistent ordered key-value substrate.  The contract is: named keyspaces,
// bytewise-lexicographic iteration with prefix + resume-from-key, atomic
// durable batches applied in submission order, crash consistency, many
// readers / one writer.  The backend is SQLite — one `WITHOUT ROWID` table
// per keyspace in WAL mode — which provides exactly those guarantees; the
// store directory holds MANIFEST (json), LOCK (flock guard for the single
// writer), and kv.sqlite3 (+ WAL side files).

#include <sqlite3.h>
#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"

namespace prov::storage {

enum class OpenMode { read, write, create };

struct WriteOp {
    std::string keyspace;
    std::string key;
    std::string value;
};

struct KeyspaceStats {
    std::string name;
    uint64_t entries = 0;
    uint64_t key_bytes = 0;
    uint64_t value_bytes = 0;
};

struct StoreStats {
    std::vector<KeyspaceStats> keyspaces;
    uint64_t total_entries = 0;
    uint64_t total_bytes = 0;      // keys + values
    uint64_t file_bytes = 0;       // on-disk footprint of the backing files
};

namespace detail {

inline void check_sqlite(int rc, sqlite3* db, const char* what) {
    if (rc != SQLITE_OK && rc != SQLITE_ROW && rc != SQLITE_DONE)
        raise(Errc::io_failure,
              std::string(what) + ": " + (db ? sqlite3_errmsg(db) : sqlite3_errstr(rc)));
}

class Stmt {
public:
    Stmt() = default;
    Stmt(sqlite3* db, const std::string& sql) : db_(db) {
        check_sqlite(sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt_, nullptr), db, "prepare");
    }
    ~Stmt() { reset_handle(); }
    Stmt(Stmt&& o) noexcept : db_(o.db_), stmt_(o.stmt_) { o.stmt_ = nullptr; }
    Stmt& operator=(Stmt&& o) noexcept {
        if (this != &o) { reset_handle(); db_ = o.db_; stmt_ = o.stmt_; o.stmt_ = nullptr; }
        return *this;
    }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    sqlite3_stmt* get() const { return stmt_; }
    explicit operator bool() const { return stmt_ != nullptr; }

    void bind_blob(int idx, std::string_view bytes) {
        // A null data pointer would bind SQL NULL; empty blobs must stay blobs.
        static const char empty = 0;
        const char* p = bytes.data() ? bytes.data() : &empty;
        check_sqlite(sqlite3_bind_blob(stmt_, idx, p, static_cast<int>(bytes.size()),
                                       SQLITE_TRANSIENT),
                     db_, "bind");
    }
    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        check_sqlite(rc, db_, "step");
        return false;
    }
    std::string_view column_bytes(int col) const {
        const void* p = sqlite3_column_blob(stmt_, col);
        int n = sqlite3_column_bytes(stmt_, col);
        return {static_cast<const char*>(p), static_cast<size_t>(n)};
    }
    int64_t column_int(int col) const { return sqlite3_column_int64(stmt_, col); }
    void reset() {
        sqlite3_reset(stmt_);
        sqlite3_clear_bindings(stmt_);
    }

private:
    void reset_handle() {
        if (stmt_) sqlite3_finalize(stmt_);
        stmt_ = nullptr;
    }
    sqlite3* db_ = nullptr;
    sqlite3_stmt* stmt_ = nullptr;
};

class Connection {
public:
    Connection() = default;
    Connection(const std::filesystem::path& file, bool create) {
        int flags = SQLITE_OPEN_READWRITE | (create ? SQLITE_OPEN_CREATE : 0) |
                    SQLITE_OPEN_NOMUTEX;
        int rc = sqlite3_open_v2(file.string().c_str(), &db_, flags, nullptr);
        if (rc != SQLITE_OK) {
            std::string msg = db_ ? sqlite3_errmsg(db_) : sqlite3_errstr(rc);
            if (db_) sqlite3_close(db_);
            db_ = nullptr;
            raise(Errc::io_failure, "cannot open store database: " + msg);
        }
        sqlite3_busy_timeout(db_, 30000);
        exec("PRAGMA journal_mode=WAL");
        exec("PRAGMA synchronous=NORMAL");
        exec("PRAGMA cache_size=-65536");  // 64 MiB page cache
    }
    ~Connection() { close(); }
    Connection(Connection&& o) noexcept : db_(o.db_) { o.db_ = nullptr; }
    Connection& operator=(Connection&& o) noexcept {
        if (this != &o) { close(); db_ = o.db_; o.db_ = nullptr; }
        return *this;
    }
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    sqlite3* get() const { return db_; }
    explicit operator bool() const { return db_ != nullptr; }

    void exec(const std::string& sql) {
        char* err = nullptr;
        int rc = sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err);
        std::string msg = err ? err : "";
        if (err) sqlite3_free(err);
        if (rc != SQLITE_OK)
            raise(Errc::io_failure, "sqlite exec failed: " + msg + " (" + sql + ")");
    }

    void close() {
        if (db_) sqlite3_close(db_);
        db_ = nullptr;
    }

private:
    sqlite3* db_ = nullptr;
};

inline void validate_keyspace_name(std::string_view name) {
    if (name.empty() || name.size() > 64)
        raise(Errc::invalid_argument, "bad keyspace name");
    for (char c : name)
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'))
            raise(Errc::invalid_argument, "bad keyspace name: " + std::string(name));
}

// Smallest byte string strictly greater than every key with this prefix, or
// empty when no upper bound exists (prefix empty or all 0xff).
inline std::string prefix_upper_bound(std::string_view prefix) {
    std::string hi(prefix);
    while (!hi.empty()) {
        auto& last = reinterpret_cast<unsigned char&>(hi.back());
        if (last != 0xff) { ++last; return hi; }
        hi.pop_back();
    }
    return hi;
}

} // namespace detail

// Streaming ordered cursor over one keyspace.  Owns a private read
// connection, so it sees a stable committed snapshot and stays valid while
// the owning store keeps writing.
class Scan {
public:
    Scan() = default;
    Scan(Scan&&) noexcept = default;
    // The statement must be finalized before its connection goes away, so
    // move-assignment cannot be member-wise (conn_ precedes stmt_).
    Scan& operator=(Scan&& o) noexcept {
        if (this != &o) {
            stmt_ = detail::Stmt();
            conn_ = std::move(o.conn_);
            stmt_ = std::move(o.stmt_);
            key_ = std::move(o.key_);
            value_ = std::move(o.value_);
        }
        return *this;
    }

    bool next() {
        if (!stmt_) return false;
        if (!stmt_.step()) {
            stmt_ = detail::Stmt();
            return false;
        }
        key_.assign(stmt_.column_bytes(0));
        value_.assign(stmt_.column_bytes(1));
        return true;
    }

    const std::string& key() const { return key_; }
    const std::string& value() const { return value_; }

private:
    friend class Store;
    Scan(detail::Connection conn, const std::string& table, std::string_view prefix,
         std::optional<std::string_view> resume_after)
        : conn_(std::move(conn)) {
        std::string lo(resume_after ? std::string(*resume_after) : std::string(prefix));
        std::string hi = detail::prefix_upper_bound(prefix);
        std::string sql = "SELECT k, v FROM " + table + " WHERE k " +
                          (resume_after ? ">" : ">=") + " ?1";
        if (!hi.empty()) sql += " AND k < ?2";
        sql += " ORDER BY k";
        stmt_ = detail::Stmt(conn_.get(), sql);
        stmt_.bind_blob(1, lo);
        if (!hi.empty()) stmt_.bind_blob(2, hi);
    }

    detail::Connection conn_;
    detail::Stmt stmt_;
    std::string key_, value_;
};

class Store {
public:
    struct CreateOptions {
        std::string hash;
        explicit CreateOptions(std::string h = "sha1") : hash(std::move(h)) {}
    };

    Store(const std::filesystem::path& dir, OpenMode mode, CreateOptions opts = CreateOptions())
        : dir_(dir), mode_(mode) {
        namespace fs = std::filesystem;
        auto manifest_path = dir_ / "MANIFEST";
        if (mode == OpenMode::create) {
            if (fs::exists(manifest_path))
                raise(Errc::invalid_argument, "store already exists: " + dir_.string());
            fs::create_directories(dir_);
            manifest_["format"] = kFormat;
            manifest_["hash"] = opts.hash;
            manifest_["store_id"] = random_id();
            std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
            out << manifest_.dump(2) << "\n";
            if (!out) raise(Errc::io_failure, "cannot write MANIFEST");
        } else {
            if (!fs::exists(manifest_path))
                raise(Errc::missing_node, "no store at " + dir_.string());
            std::ifstream in(manifest_path, std::ios::binary);
            try {
                manifest_ = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                raise(Errc::corrupt, "unreadable MANIFEST: " + std::string(e.what()));
            }
            if (manifest_.value("format", "") != kFormat)
                raise(Errc::corrupt, "unrecognized store format");
        }

        if (mode != OpenMode::read) acquire_write_lock();

        db_ = detail::Connection(db_path(), mode == OpenMode::create);
        if (mode != OpenMode::read)
            db_.exec("CREATE TABLE IF NOT EXISTS keyspaces (name TEXT PRIMARY KEY) WITHOUT ROWID");
        refresh_keyspaces();
    }

    ~Store() { close(); }
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    const std::filesystem::path& dir() const { return dir_; }
    OpenMode mode() const { return mode_; }
    const nlohmann::json& manifest() const { return manifest_; }
    std::string hash_name() const { return manifest_.value("hash", "sha1"); }
    std::string store_id() const { return manifest_.value("store_id", ""); }

    // Applies all writes atomically; returns a monotone commit token.
    // Within one batch, a later write to the same key wins.
    uint64_t batch(const std::vector<WriteOp>& writes) {
        std::lock_guard lk(mu_);
        require_open();
        if (mode_ == OpenMode::read)
            raise(Errc::invalid_argument, "store opened read-only");
        if (writes.empty()) return batch_seq_;

        db_.exec("BEGIN IMMEDIATE");
        try {
            for (const auto& w : writes) {
                detail::validate_keyspace_name(w.keyspace);
                ensure_keyspace_locked(w.keyspace);
                auto& stmt = put_stmts_[w.keyspace];
                if (!stmt)
                    stmt = detail::Stmt(db_.get(), "INSERT OR REPLACE INTO ks_" + w.keyspace +
                                                       " (k, v) VALUES (?1, ?2)");
                stmt.bind_blob(1, w.key);
                stmt.bind_blob(2, w.value);
                stmt.step();
                stmt.reset();
            }
            uint64_t next = batch_seq_ + 1;
            detail::Stmt seq(db_.get(),
                             "INSERT OR REPLACE INTO keyspaces (name) VALUES ('_seq_" +
                                 std::to_string(next) + "')");
            // The token is derived from the committed keyspace catalog so it
            // survives crashes; remove the previous token row first.
            detail::Stmt del(db_.get(), "DELETE FROM keyspaces WHERE name GLOB '_seq_*'");
            del.step();
            seq.step();
            db_.exec("COMMIT");
            batch_seq_ = next;
            return batch_seq_;
        } catch (...) {
            db_.exec("ROLLBACK");
            throw;
        }
    }

    std::optional<std::string> get(std::string_view keyspace, std::string_view key) {
        std::lock_guard lk(mu_);
        require_open();
        const std::string* table = table_for(keyspace);
        if (!table) return std::nullopt;  // declared check below for scans; point reads miss
        auto& stmt = get_stmts_[std::string(keyspace)];
        if (!stmt) stmt = detail::Stmt(db_.get(), "SELECT v FROM " + *table + " WHERE k = ?1");
        stmt.bind_blob(1, key);
        std::optional<std::string> out;
        if (stmt.step()) out = std::string(stmt.column_bytes(0));
        stmt.reset();
        return out;
    }

    bool exists(std::string_view keyspace, std::string_view key) {
        std::lock_guard lk(mu_);
        require_open();
        const std::string* table = table_for(keyspace);
        if (!table) return false;
        auto& stmt = exists_stmts_[std::string(keyspace)];
        if (!stmt) stmt = detail::Stmt(db_.get(), "SELECT 1 FROM " + *table + " WHERE k = ?1");
        stmt.bind_blob(1, key);
        bool hit = stmt.step();
        stmt.reset();
        return hit;
    }

    // Largest key in the keyspace, if any.
    std::optional<std::string> last_key(std::string_view keyspace) {
        std::lock_guard lk(mu_);
        require_open();
        const std::string* table = table_for(keyspace);
        if (!table) return std::nullopt;
        detail::Stmt stmt(db_.get(), "SELECT k FROM " + *table + " ORDER BY k DESC LIMIT 1");
        if (!stmt.step()) return std::nullopt;
        return std::string(stmt.column_bytes(0));
    }

    // Ordered stream of (key, value) for keys with `prefix`.
    Scan scan(std::string_view keyspace, std::string_view prefix = {}) {
        return scan_impl(keyspace, prefix, std::nullopt);
    }

    // Same as scan(), but starts strictly after `resume_after`.
    Scan scan_after(std::string_view keyspace, std::string_view prefix,
                    std::string_view resume_after) {
        return scan_impl(keyspace, prefix, resume_after);
    }

    uint64_t count_prefix(std::string_view keyspace, std::string_view prefix = {}) {
        std::lock_guard lk(mu_);
        require_open();
        const std::string* table = table_for(keyspace);
        if (!table) return 0;
        std::string hi = detail::prefix_upper_bound(prefix);
        std::string sql = "SELECT COUNT(*) FROM " + *table + " WHERE k >= ?1";
        if (!hi.empty()) sql += " AND k < ?2";
        detail::Stmt stmt(db_.get(), sql);
        stmt.bind_blob(1, prefix);
        if (!hi.empty()) stmt.bind_blob(2, hi);
        stmt.step();
        return static_cast<uint64_t>(stmt.column_int(0));
    }

    StoreStats stats() {
        std::lock_guard lk(mu_);
        require_open();
        refresh_keyspaces_locked();
        StoreStats out;
        for (const auto& name : keyspaces_) {
            detail::Stmt stmt(db_.get(),
                              "SELECT COUNT(*), COALESCE(SUM(LENGTH(k)),0), "
                              "COALESCE(SUM(LENGTH(v)),0) FROM ks_" + name);
            stmt.step();
            KeyspaceStats ks;
            ks.name = name;
            ks.entries = static_cast<uint64_t>(stmt.column_int(0));
            ks.key_bytes = static_cast<uint64_t>(stmt.column_int(1));
            ks.value_bytes = static_cast<uint64_t>(stmt.column_int(2));
            out.total_entries += ks.entries;
            out.total_bytes += ks.key_bytes + ks.value_bytes;
            out.keyspaces.push_back(std::move(ks));
        }
        std::error_code ec;
        for (const char* f : {"kv.sqlite3", "kv.sqlite3-wal", "MANIFEST"}) {
            auto sz = std::filesystem::file_size(dir_ / f, ec);
            if (!ec) out.file_bytes += sz;
        }
        return out;
    }

    std::vector<std::string> keyspace_names() {
        std::lock_guard lk(mu_);
        require_open();
        refresh_keyspaces_locked();
        return {keyspaces_.begin(), keyspaces_.end()};
    }

    void close() {
        std::lock_guard lk(mu_);
        if (closed_) return;
        closed_ = true;
        get_stmts_.clear();
        exists_stmts_.clear();
        put_stmts_.clear();
        db_.close();
        if (lock_fd_ >= 0) {
            ::flock(lock_fd_, LOCK_UN);
            ::close(lock_fd_);
            lock_fd_ = -1;
        }
    }

private:
    static constexpr const char* kFormat = "prov-store-1";

    std::filesystem::path db_path() const { return dir_ / "kv.sqlite3"; }

    static std::string random_id() {
        std::random_device rd;
        std::string out;
        for (int i = 0; i < 4; ++i) {
            uint32_t v = rd();
            char buf[9];
            std::snprintf(buf, sizeof buf, "%08x", v);
            out += buf;
        }
        return out;
    }

    void acquire_write_lock() {
        auto lock_path = dir_ / "LOCK";
        lock_fd_ = ::open(lock_path.string().c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (lock_fd_ < 0) raise(Errc::io_failure, "cannot open LOCK file");
        if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(lock_fd_);
            lock_fd_ = -1;
            raise(Errc::locked, "another writer holds " + dir_.string());
        }
    }

    void require_open() const {
        if (closed_) raise(Errc::closed, "store is closed");
    }

    void ensure_keyspace_locked(const std::string& name) {
        if (keyspaces_.count(name)) return;
        db_.exec("CREATE TABLE IF NOT EXISTS ks_" + name +
                 " (k BLOB PRIMARY KEY, v BLOB NOT NULL) WITHOUT ROWID");
        db_.exec("INSERT OR IGNORE INTO keyspaces (name) VALUES ('" + name + "')");
        keyspaces_.insert(name);
        get_stmts_.erase(name);
    }

    void refresh_keyspaces() {
        std::lock_guard lk(mu_);
        refresh_keyspaces_locked();
    }

    void refresh_keyspaces_locked() {
        keyspaces_.clear();
        batch_seq_ = 0;
        detail::Stmt probe(db_.get(),
                           "SELECT name FROM sqlite_master WHERE type='table' AND name='keyspaces'");
        if (!probe.step()) return;
        detail::Stmt stmt(db_.get(), "SELECT name FROM keyspaces ORDER BY name");
        while (stmt.step()) {
            std::string name(stmt.column_bytes(0));
            if (name.rfind("_seq_", 0) == 0)
                batch_seq_ = std::max<uint64_t>(batch_seq_, std::stoull(name.substr(5)));
            else
                keyspaces_.insert(std::move(name));
        }
    }

    // Returns the table name if the keyspace exists (re-checking the catalog
    // once on miss, in case another handle created it).
    const std::string* table_for(std::string_view keyspace) {
        detail::validate_keyspace_name(keyspace);
        auto it = keyspaces_.find(std::string(keyspace));
        if (it == keyspaces_.end()) {
            refresh_keyspaces_locked();
            it = keyspaces_.find(std::string(keyspace));
            if (it == keyspaces_.end()) return nullptr;
        }
        table_buf_ = "ks_" + *it;
        return &table_buf_;
    }

    Scan scan_impl(std::string_view keyspace, std::string_view prefix,
                   std::optional<std::string_view> resume_after) {
        {
            std::lock_guard lk(mu_);
            require_open();
            if (!table_for(keyspace))
                raise(Errc::unknown_keyspace, "no keyspace " + std::string(keyspace));
        }
        detail::Connection conn(db_path(), false);
        return Scan(std::move(conn), "ks_" + std::string(keyspace), prefix, resume_after);
    }

    std::filesystem::path dir_;
    OpenMode mode_;
    nlohmann::json manifest_;
    detail::Connection db_;
    std::mutex mu_;
    std::set<std::string> keyspaces_;
    std::map<std::string, detail::Stmt> get_stmts_;
    std::map<std::string, detail::Stmt> exists_stmts_;
    std::map<std::string, detail::Stmt> put_stmts_;
    std::string table_buf_;
    uint64_t batch_seq_ = 0;
    int lock_fd_ = -1;
    bool closed_ = false;
};

} // namespace prov::storage
