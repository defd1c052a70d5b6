#pragma once

// Minimal POSIX child process with piped stdin/stdout, used by the
// line-protocol backend.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "error.hpp"

extern char** environ;

namespace coherencekit {

// Splits a command line on whitespace, honouring single and double quotes and
// backslash escapes outside quotes. No shell is involved.
inline std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> args;
  std::string current;
  bool in_token = false;
  char quote = 0;
  bool escaped = false;
  for (char ch : command) {
    if (escaped) {
      current.push_back(ch);
      escaped = false;
    } else if (quote == 0 && ch == '\\') {
      escaped = true;
      in_token = true;
    } else if (quote != 0) {
      if (ch == quote) {
        quote = 0;
      } else {
        current.push_back(ch);
      }
    } else if (ch == '\'' || ch == '"') {
      quote = ch;
      in_token = true;
    } else if (ch == ' ' || ch == '\t' || ch == '\n') {
      if (in_token) args.push_back(std::move(current));
      current.clear();
      in_token = false;
    } else {
      current.push_back(ch);
      in_token = true;
    }
  }
  if (quote != 0) throw Error("unterminated quote in command: " + std::string(command));
  if (escaped) current.push_back('\\');
  if (in_token) args.push_back(std::move(current));
  return args;
}

class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    auto args = split_command(command);
    if (args.empty()) throw BackendError("subprocess command is empty");
    ::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw BackendError("pipe: " + std::string(std::strerror(errno)));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw BackendError("pipe: " + std::string(std::strerror(errno)));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    const int rc = ::posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      pid_ = -1;
      throw BackendError("cannot spawn \"" + command + "\": " + std::strerror(rc));
    }
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];
    ::fcntl(stdin_fd_, F_SETFL, ::fcntl(stdin_fd_, F_GETFL) | O_NONBLOCK);
    ::fcntl(stdout_fd_, F_SETFL, ::fcntl(stdout_fd_, F_GETFL) | O_NONBLOCK);
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    if (stdin_fd_ >= 0) ::close(stdin_fd_);
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 100; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }

  // Writes `out` fully to the child's stdin while handing every complete line
  // read from its stdout to `on_line`. Returns when `done()` reports true.
  // Throws BackendError on broken pipe, child EOF, or `timeout` of inactivity.
  template <typename OnLine, typename Done>
  void exchange(std::string_view out, OnLine&& on_line, Done&& done,
                std::chrono::milliseconds timeout) {
    std::size_t written = 0;
    while (!done() || written < out.size()) {
      pollfd fds[2];
      nfds_t count = 0;
      fds[count++] = {stdout_fd_, POLLIN, 0};
      if (written < out.size()) fds[count++] = {stdin_fd_, POLLOUT, 0};
      const int ready = ::poll(fds, count, static_cast<int>(timeout.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw BackendError("poll: " + std::string(std::strerror(errno)));
      }
      if (ready == 0) throw BackendError("subprocess timed out waiting for responses");

      if (count == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP)) != 0) {
        const ssize_t n = ::write(stdin_fd_, out.data() + written, out.size() - written);
        if (n < 0) {
          if (errno != EAGAIN && errno != EINTR) {
            throw BackendError("broken pipe writing to subprocess: " + std::string(std::strerror(errno)));
          }
        } else {
          written += static_cast<std::size_t>(n);
        }
      }
      if ((fds[0].revents & (POLLIN | POLLHUP | POLLERR)) != 0) {
        char buf[8192];
        const ssize_t n = ::read(stdout_fd_, buf, sizeof buf);
        if (n == 0) throw BackendError("subprocess closed its output before answering all requests");
        if (n < 0) {
          if (errno != EAGAIN && errno != EINTR) {
            throw BackendError("read from subprocess: " + std::string(std::strerror(errno)));
          }
          continue;
        }
        pending_.append(buf, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = pending_.find('\n')) != std::string::npos) {
          std::string line = pending_.substr(0, pos);
          pending_.erase(0, pos + 1);
          if (!line.empty()) on_line(line);
        }
      }
    }
  }

 private:
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string pending_;
};

}  // namespace coherencekit
