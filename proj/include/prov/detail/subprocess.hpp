#pragma once
// Minimal fork/exec subprocess plumbing: run-and-capture, plus a persistent
// bidirectional pipe for batch protocols.  No shell is ever involved.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <string>
#include <vector>

#include "../errors.hpp"

namespace prov::detail {

struct RunResult {
    int status = -1;  // raw waitpid status
    std::string out;

    bool ok() const { return WIFEXITED(status) && WEXITSTATUS(status) == 0; }
};

// Runs argv with stdout captured and stderr discarded.
inline RunResult run_capture(const std::vector<std::string>& argv) {
    int fds[2];
    if (pipe(fds) != 0) raise(Errc::io_failure, "pipe failed");
    pid_t pid = fork();
    if (pid < 0) raise(Errc::io_failure, "fork failed");
    if (pid == 0) {
        ::close(fds[0]);
        ::dup2(fds[1], STDOUT_FILENO);
        int devnull = ::open("/dev/null", O_RDWR);
        if (devnull >= 0) {
            ::dup2(devnull, STDERR_FILENO);
            ::dup2(devnull, STDIN_FILENO);
        }
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        _exit(127);
    }
    ::close(fds[1]);
    RunResult res;
    char buf[1 << 16];
    ssize_t n;
    while ((n = ::read(fds[0], buf, sizeof buf)) > 0) res.out.append(buf, size_t(n));
    ::close(fds[0]);
    waitpid(pid, &res.status, 0);
    return res;
}

// Long-lived child with both pipe directions open; used for request/response
// protocols that would be too slow as one process per request.
class BidiProcess {
public:
    explicit BidiProcess(const std::vector<std::string>& argv) {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            raise(Errc::io_failure, "pipe failed");
        pid_ = fork();
        if (pid_ < 0) raise(Errc::io_failure, "fork failed");
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            int devnull = ::open("/dev/null", O_WRONLY);
            if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            std::vector<char*> args;
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            ::execvp(args[0], args.data());
            _exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
    }

    ~BidiProcess() { shutdown(); }
    BidiProcess(const BidiProcess&) = delete;
    BidiProcess& operator=(const BidiProcess&) = delete;

    void write_all(std::string_view bytes) {
        while (!bytes.empty()) {
            ssize_t n = ::write(in_fd_, bytes.data(), bytes.size());
            if (n <= 0) raise(Errc::io_failure, "subprocess pipe write failed");
            bytes.remove_prefix(size_t(n));
        }
    }

    // Reads through the next '\n' (consumed, not returned).
    std::string read_line() {
        std::string line;
        for (;;) {
            auto nl = buf_.find('\n', scan_pos_);
            if (nl != std::string::npos) {
                line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                scan_pos_ = 0;
                return line;
            }
            scan_pos_ = buf_.size();
            if (!fill()) raise(Errc::io_failure, "subprocess closed mid-line");
        }
    }

    std::string read_exact(size_t n) {
        while (buf_.size() < n)
            if (!fill()) raise(Errc::io_failure, "subprocess closed mid-record");
        std::string out = buf_.substr(0, n);
        buf_.erase(0, n);
        scan_pos_ = 0;
        return out;
    }

    void shutdown() {
        if (in_fd_ >= 0) ::close(in_fd_);
        if (out_fd_ >= 0) ::close(out_fd_);
        in_fd_ = out_fd_ = -1;
        if (pid_ > 0) {
            int status;
            waitpid(pid_, &status, 0);
            pid_ = -1;
        }
    }

private:
    bool fill() {
        char tmp[1 << 16];
        ssize_t n = ::read(out_fd_, tmp, sizeof tmp);
        if (n <= 0) return false;
        buf_.append(tmp, size_t(n));
        return true;
    }

    pid_t pid_ = -1;
    int in_fd_ = -1, out_fd_ = -1;
    std::string buf_;
    size_t scan_pos_ = 0;
};

} // namespace prov::detail
