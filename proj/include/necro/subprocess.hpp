// Copyright 2026 The necro Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <signal.h>
#include <spawn.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "necro/error.hpp"

extern char** environ;

namespace necro {

/// Splits a command line on whitespace. Single and double quotes group words;
/// no other shell syntax is interpreted.
inline std::vector<std::string> split_command(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  char quote = 0;
  for (char c : line) {
    if (quote != 0) {
      if (c == quote) {
        quote = 0;
      } else {
        cur.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      have = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (have) out.push_back(cur);
      cur.clear();
      have = false;
    } else {
      cur.push_back(c);
      have = true;
    }
  }
  if (quote != 0) throw ValidationError("unterminated quote in command: " + line);
  if (have) out.push_back(cur);
  return out;
}

struct ProcessResult {
  int exit_code = -1;      // valid when !signaled
  bool signaled = false;
  bool timed_out = false;
  long max_rss_kb = 0;     // peak resident set of the child
  double seconds = 0.0;
};

/// Spawns argv (PATH lookup), waits up to `timeout` and kills the child on
/// expiry. Child stdout is redirected to our stderr unless `keep_stdout`.
inline ProcessResult run_process(const std::vector<std::string>& argv,
                                 std::optional<std::chrono::milliseconds> timeout = std::nullopt,
                                 const std::optional<std::filesystem::path>& cwd = std::nullopt,
                                 bool keep_stdout = false) {
  if (argv.empty()) throw ValidationError("empty command");
  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (!keep_stdout) posix_spawn_file_actions_adddup2(&actions, STDERR_FILENO, STDOUT_FILENO);
  if (cwd) posix_spawn_file_actions_addchdir_np(&actions, cwd->c_str());

  const auto start = std::chrono::steady_clock::now();
  pid_t pid = 0;
  int rc = posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw BackendError("cannot spawn '" + argv[0] + "': " + std::strerror(rc));

  ProcessResult result;
  int status = 0;
  struct rusage usage {};
  for (;;) {
    pid_t w = wait4(pid, &status, WNOHANG, &usage);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) throw BackendError(std::string("wait4 failed: ") + std::strerror(errno));
    if (timeout && std::chrono::steady_clock::now() - start > *timeout) {
      kill(pid, SIGKILL);
      wait4(pid, &status, 0, &usage);
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.max_rss_kb = usage.ru_maxrss;
  if (WIFSIGNALED(status)) {
    result.signaled = true;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  }
  return result;
}

}  // namespace necro
