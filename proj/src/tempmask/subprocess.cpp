// External evaluator runner: POSIX spawn with a timeout, result handoff
// through a JSON file.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <stdlib.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>

#include "tempmask/evaluation.hpp"
#include "tempmask/io.hpp"
#include "tempmask/result_file.hpp"

extern char** environ;

namespace tempmask {

namespace {

std::string shell_quote(const std::string& value) {
  std::string out = "'";
  for (char ch : value) {
    if (ch == '\'')
      out += "'\\''";
    else
      out += ch;
  }
  out += '\'';
  return out;
}

void replace_once(std::string& text, const std::string& placeholder, const std::string& value) {
  const auto pos = text.find(placeholder);
  if (pos != std::string::npos) text.replace(pos, placeholder.size(), value);
}

class TempDir {
 public:
  TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "tempmask-XXXXXX").string();
    if (!::mkdtemp(pattern.data()))
      fail(ErrorKind::io, std::string("cannot create temporary directory: ") + std::strerror(errno));
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

std::string tail_of(const std::filesystem::path& log, std::size_t max_bytes = 2000) {
  std::string text;
  try {
    text = read_text_file(log);
  } catch (const Error&) {
    return {};
  }
  if (text.size() > max_bytes) text = "..." + text.substr(text.size() - max_bytes);
  return text;
}

class SpawnActions {
 public:
  SpawnActions() { posix_spawn_file_actions_init(&actions_); }
  ~SpawnActions() { posix_spawn_file_actions_destroy(&actions_); }
  posix_spawn_file_actions_t* get() { return &actions_; }

 private:
  posix_spawn_file_actions_t actions_;
};

class SpawnAttributes {
 public:
  SpawnAttributes() { posix_spawnattr_init(&attr_); }
  ~SpawnAttributes() { posix_spawnattr_destroy(&attr_); }
  posix_spawnattr_t* get() { return &attr_; }

 private:
  posix_spawnattr_t attr_;
};

}  // namespace

EvalResult run_subprocess(const EvaluatorSpec& spec, const std::string& sequence_id,
                          const TemporalMask& mask, std::uint64_t rep_seed) {
  spec.validate();
  require(spec.kind == EvaluatorKind::subprocess, ErrorKind::parameter,
          "run_subprocess needs a subprocess evaluator spec");

  TempDir dir;
  const auto mask_path = dir.path() / "mask.csv";
  const auto out_path = dir.path() / "result.json";
  const auto log_path = dir.path() / "output.log";
  write_file_atomic(mask_path, to_csv(mask));

  std::string command = spec.command_template;
  replace_once(command, "{mask}", shell_quote(mask_path.string()));
  replace_once(command, "{sequence}", shell_quote(sequence_id));
  replace_once(command, "{out}", shell_quote(out_path.string()));

  // Environment: inherited, with the repetition seed replaced.
  const std::string seed_entry = std::string(kSeedEnvVar) + "=" + std::to_string(rep_seed);
  const std::string seed_prefix = std::string(kSeedEnvVar) + "=";
  std::vector<char*> envp;
  for (char** e = environ; e && *e; ++e)
    if (std::strncmp(*e, seed_prefix.c_str(), seed_prefix.size()) != 0) envp.push_back(*e);
  envp.push_back(const_cast<char*>(seed_entry.c_str()));
  envp.push_back(nullptr);

  SpawnActions actions;
  posix_spawn_file_actions_addopen(actions.get(), STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(actions.get(), STDOUT_FILENO, log_path.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(actions.get(), STDOUT_FILENO, STDERR_FILENO);
  SpawnAttributes attributes;
  posix_spawnattr_setflags(attributes.get(), POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(attributes.get(), 0);

  std::string shell = "/bin/sh";
  std::string dash_c = "-c";
  char* argv[] = {shell.data(), dash_c.data(), command.data(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", actions.get(), attributes.get(), argv, envp.data());
  require(rc == 0, ErrorKind::evaluation,
          std::string("cannot start evaluator: ") + std::strerror(rc));

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(spec.timeout_seconds);
  auto pause = std::chrono::microseconds(200);
  int status = 0;
  while (true) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0 && errno != EINTR)
      fail(ErrorKind::evaluation, std::string("waitpid failed: ") + std::strerror(errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      fail(ErrorKind::timeout, "evaluator exceeded " + format_double(spec.timeout_seconds) +
                                   " s on sequence '" + sequence_id + "'");
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::microseconds(20000));
  }

  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string how = WIFEXITED(status)
                                ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                : "was killed by signal " + std::to_string(WTERMSIG(status));
    fail(ErrorKind::evaluation, "evaluator " + how + "; output:\n" + tail_of(log_path));
  }

  std::error_code ec;
  require(std::filesystem::exists(out_path, ec), ErrorKind::protocol,
          "evaluator did not write its result file; output:\n" + tail_of(log_path));
  const ResultFile result = parse_result_file(read_text_file(out_path));
  return make_eval_result(result.ate_rmse, result.tracking_rate, spec.usm_params);
}

}  // namespace tempmask
