#pragma once

// Estimator backend living in a child process, spoken to over its standard
// streams with the line protocol in protocol.hpp. The child announces itself
// with `hello`; the host answers `hello-ack`; then requests and results
// strictly alternate.

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <string>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pose_consensus/estimator.hpp"

namespace pose_consensus {

inline constexpr std::chrono::milliseconds kDefaultBackendTimeout{300'000};

class ProcessBackend final : public EstimatorBackend {
 public:
  // Runs `command` through /bin/sh -c and completes the handshake. Throws
  // BackendUnavailable when the child cannot start or the handshake fails.
  explicit ProcessBackend(std::string command,
                          std::chrono::milliseconds timeout = kDefaultBackendTimeout)
      : command_(std::move(command)), timeout_(timeout) {
    // A dead child must surface as an error on write, not kill the host.
    std::signal(SIGPIPE, SIG_IGN);
    spawn();
    try {
      handshake();
    } catch (...) {
      shutdown();
      throw;
    }
  }

  ~ProcessBackend() override { shutdown(); }

  ProcessBackend(const ProcessBackend&) = delete;
  ProcessBackend& operator=(const ProcessBackend&) = delete;

  std::string id() const override { return hello_.backend; }
  std::string version() const override { return hello_.version; }
  pid_t pid() const { return pid_; }

 protected:
  std::string do_call(const EstimatorRequest& req) override {
    if (pid_ < 0) throw BackendUnavailable("backend process is not running");
    write_line(serialize_request(req));
    return read_line();
  }

 private:
  void spawn() {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw BackendUnavailable(std::string("pipe: ") + std::strerror(errno));
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw BackendUnavailable(std::string("pipe: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw BackendUnavailable(std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      // exec so that pid_ is the backend itself rather than a shell.
      const std::string line = "exec " + command_;
      ::execl("/bin/sh", "sh", "-c", line.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    ::fcntl(in_fd_, F_SETFD, FD_CLOEXEC);
    ::fcntl(out_fd_, F_SETFD, FD_CLOEXEC);
  }

  void handshake() {
    std::string line;
    try {
      line = read_line();
    } catch (const BackendTimeout&) {
      throw BackendUnavailable("backend sent no hello within the timeout");
    }
    try {
      hello_ = parse_hello(line);
    } catch (const MalformedResponse& e) {
      throw BackendUnavailable(std::string("bad hello: ") + e.what());
    }
    if (hello_.protocol != kProtocolVersion) {
      throw BackendUnavailable("backend speaks protocol " + std::to_string(hello_.protocol));
    }
    write_line(serialize_hello_ack());
  }

  void write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(in_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendUnavailable(std::string("write to backend failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        shutdown();
        throw BackendTimeout("backend did not answer within " + std::to_string(timeout_.count()) + " ms");
      }
      pollfd pfd{out_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw BackendUnavailable(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(out_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendUnavailable(std::string("read from backend failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        shutdown();
        throw BackendUnavailable("backend closed its output");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shutdown() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    in_fd_ = out_fd_ = -1;
    if (pid_ > 0) {
      // Closing stdin asks a well-behaved backend to exit; give it a moment.
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          return;
        }
        ::usleep(10'000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  Hello hello_;
};

}  // namespace pose_consensus
