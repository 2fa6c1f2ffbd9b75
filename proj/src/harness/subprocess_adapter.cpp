#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <sstream>

#include "core/error.hpp"
#include "harness/harness.hpp"

namespace mutforge::harness {

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  bool signaled = false;
  bool timed_out = false;
  std::string output;  // stdout and stderr interleaved
  double wall_time = 0.0;
};

CommandResult run_command(const std::string& cmd, const fs::path& cwd, double timeout) {
  int fds[2];
  if (pipe(fds) != 0) throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  std::string dir = cwd.string();
  auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw Error(ErrorCode::Io, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[1], STDOUT_FILENO);
    dup2(fds[1], STDERR_FILENO);
    close(fds[0]);
    close(fds[1]);
    int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    if (chdir(dir.c_str()) != 0) _exit(127);
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(fds[1]);

  CommandResult res;
  auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(timeout));
  char buf[4096];
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      res.timed_out = true;
      break;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd p{fds[0], POLLIN, 0};
    int rc = poll(&p, 1, static_cast<int>(std::min<long long>(left + 1, 1000)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) continue;
    ssize_t n = read(fds[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    res.output.append(buf, static_cast<std::size_t>(n));
  }
  if (res.timed_out) kill(-pid, SIGKILL);
  close(fds[0]);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!res.timed_out) kill(-pid, SIGKILL);  // reap stray grandchildren
  res.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (WIFEXITED(status)) {
    res.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    res.signaled = !res.timed_out;
  }
  return res;
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "mutforge-ws-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) {
      throw Error(ErrorCode::Io, std::string("mkdtemp: ") + std::strerror(errno));
    }
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

class SubprocessAdapter final : public ToolchainAdapter {
 public:
  explicit SubprocessAdapter(SubprocessConfig cfg) : cfg_(std::move(cfg)) {}

  std::string name() const override { return "subprocess"; }
  bool concurrent() const override { return true; }

  CompileOutcome check(const Workspace& ws) override {
    if (cfg_.check_cmd.empty()) return CompileOutcome::success();
    TempDir dir;
    ws.write_to(dir.path());
    auto r = run_command(cfg_.check_cmd, dir.path(), cfg_.timeout);
    if (!r.timed_out && !r.signaled && r.exit_code == 0) return CompileOutcome::success();
    std::vector<Diagnostic> diags;
    SourceLocation where{ws.project.files.empty() ? "<project>" : ws.project.files.begin()->first,
                         1, 1};
    std::istringstream in(r.output);
    for (std::string line; std::getline(in, line);) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      diags.push_back({"toolchain", line, where});
    }
    if (r.timed_out) diags.push_back({"toolchain-timeout", "check command timed out", where});
    if (diags.empty()) {
      diags.push_back({"toolchain", "check failed with exit code " + std::to_string(r.exit_code),
                       where});
    }
    return CompileOutcome::failure(std::move(diags));
  }

  std::vector<std::string> list_tests(const Workspace& ws) override {
    if (cfg_.list_tests_cmd.empty()) {
      throw Error(ErrorCode::Config, "subprocess adapter: list_tests_cmd is not configured");
    }
    TempDir dir;
    ws.write_to(dir.path());
    auto r = run_command(cfg_.list_tests_cmd, dir.path(), cfg_.timeout);
    if (r.timed_out || r.signaled || r.exit_code != 0) {
      throw Error(ErrorCode::Io, "list_tests_cmd failed: " + r.output);
    }
    std::vector<std::string> out;
    std::istringstream in(r.output);
    for (std::string line; std::getline(in, line);) {
      auto b = line.find_first_not_of(" \t\r");
      auto e = line.find_last_not_of(" \t\r");
      if (b != std::string::npos) out.push_back(line.substr(b, e - b + 1));
    }
    return out;
  }

  std::vector<TestOutcome> run_tests(const Workspace& ws, const std::vector<std::string>& tests,
                                     double timeout_seconds) override {
    if (cfg_.test_cmd.empty()) {
      throw Error(ErrorCode::Config, "subprocess adapter: test_cmd is not configured");
    }
    TempDir dir;
    ws.write_to(dir.path());
    std::vector<TestOutcome> out;
    for (const auto& id : tests) {
      std::string cmd = cfg_.test_cmd;
      std::string quoted = shell_quote(id);
      for (std::size_t p = 0; (p = cmd.find("{test_id}", p)) != std::string::npos;
           p += quoted.size()) {
        cmd.replace(p, 9, quoted);
      }
      auto r = run_command(cmd, dir.path(), timeout_seconds);
      Verdict v = Verdict::Fail;
      if (r.timed_out) {
        v = Verdict::Timeout;
      } else if (r.exit_code == cfg_.pass_exit_code) {
        v = Verdict::Pass;
      } else if (r.signaled || r.exit_code > 128) {
        v = Verdict::Crash;  // shells report a signalled child as 128 + signo
      }
      out.push_back({id, v, r.wall_time});
    }
    return out;
  }

 private:
  SubprocessConfig cfg_;
};

}  // namespace

std::unique_ptr<ToolchainAdapter> make_subprocess_adapter(SubprocessConfig cfg) {
  return std::make_unique<SubprocessAdapter>(std::move(cfg));
}

}  // namespace mutforge::harness
