#include "streamflow/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <system_error>
#include <vector>

namespace streamflow {

namespace {

[[noreturn]] void child_exec(const std::string& command, const std::string& cwd,
                             char* const* envp, int out_fd) {
  // Own process group so a timeout can kill the whole tree.
  setpgid(0, 0);
  if (chdir(cwd.c_str()) != 0) {
    const char msg[] = "sh: cannot chdir to working directory\n";
    ssize_t ignored = write(STDERR_FILENO, msg, sizeof(msg) - 1);
    (void)ignored;
    _exit(127);
  }
  dup2(out_fd, STDOUT_FILENO);
  close(out_fd);
  const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
  execve("/bin/sh", const_cast<char* const*>(argv), envp);
  _exit(127);
}

}  // namespace

CommandResult run_command(const std::string& command,
                          const std::filesystem::path& cwd,
                          const std::map<std::string, std::string>& env,
                          std::optional<double> timeout_sec) {
  int fds[2];
  if (pipe(fds) != 0) {
    throw std::system_error(errno, std::generic_category(), "pipe");
  }

  std::vector<std::string> env_strings;
  env_strings.reserve(env.size());
  for (const auto& [key, value] : env) env_strings.push_back(key + "=" + value);
  std::vector<char*> envp;
  envp.reserve(env_strings.size() + 1);
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::string cwd_str = cwd.string();
  pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw std::system_error(errno, std::generic_category(), "fork");
  }
  if (pid == 0) {
    close(fds[0]);
    child_exec(command, cwd_str, envp.data(), fds[1]);
  }
  close(fds[1]);

  CommandResult result;
  auto deadline = std::chrono::steady_clock::now();
  if (timeout_sec) {
    deadline += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(*timeout_sec));
  }

  char buf[1 << 14];
  bool open = true;
  while (open) {
    int wait_ms = -1;
    if (timeout_sec) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                      deadline - std::chrono::steady_clock::now())
                      .count();
      if (left <= 0) {
        result.timed_out = true;
        killpg(pid, SIGKILL);
        break;
      }
      wait_ms = static_cast<int>(left);
    }
    struct pollfd pfd = {fds[0], POLLIN, 0};
    int rc = poll(&pfd, 1, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;  // re-check deadline
    ssize_t n = read(fds[0], buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) {
      open = false;
    } else {
      result.output.append(buf, static_cast<size_t>(n));
    }
  }
  close(fds[0]);

  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (result.timed_out) {
    result.exit_code = 124;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace streamflow
