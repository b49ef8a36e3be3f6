#pragma once

// Adapter for third-party solver binaries.
//
// Protocol: the instance is written as a TSPLIB file; the command template's
// {instance_path} and {cutoff} placeholders are substituted and the result is
// run through /bin/sh. The child must print a line "TOUR: i1 i2 ... in"
// (1-based) on stdout. Non-zero exit, a missing or invalid tour, or running
// past the cutoff all count as an unsuccessful run charged the full cutoff.

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>

#include "tspsel/error.hpp"
#include "tspsel/instances.hpp"
#include "tspsel/solvers.hpp"

extern char** environ;

namespace tspsel {

namespace detail {

inline std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t at = text.find(key); at != std::string::npos; at = text.find(key, at + value.size()))
    text.replace(at, key.size(), value);
  return text;
}

struct ChildResult {
  bool started = false;
  bool timed_out = false;
  int exit_code = -1;
  std::string stdout_text;
  double elapsed_s = 0.0;
};

inline ChildResult run_shell(const std::string& command, double timeout_s) {
  ChildResult result;
  int fds[2];
  if (pipe(fds) != 0) return result;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);

  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = 0;
  const auto start = std::chrono::steady_clock::now();
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char**>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(fds[1]);
  if (rc != 0) {
    close(fds[0]);
    return result;
  }
  result.started = true;

  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  char buf[4096];
  bool open = true;
  while (open) {
    const double left = timeout_s - elapsed();
    if (left <= 0.0) {
      result.timed_out = true;
      kill(pid, SIGKILL);
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::min(left * 1000.0, 100.0)) + 1);
    if (ready > 0) {
      const ssize_t got = read(fds[0], buf, sizeof buf);
      if (got <= 0)
        open = false;
      else
        result.stdout_text.append(buf, static_cast<std::size_t>(got));
    }
  }
  close(fds[0]);
  int status = 0;
  while (true) {
    if (!result.timed_out && elapsed() > timeout_s) {
      result.timed_out = true;
      kill(pid, SIGKILL);
    }
    const pid_t w = waitpid(pid, &status, result.timed_out ? 0 : WNOHANG);
    if (w == pid) break;
    if (w < 0) break;
    usleep(1000);
  }
  result.elapsed_s = elapsed();
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

/// Extracts a 0-based tour from the first "TOUR:" line, if any.
inline std::optional<Tour> parse_tour_line(const std::string& text, std::size_t n) {
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto body = trim(line);
    if (!body.starts_with("TOUR:")) continue;
    Tour tour;
    for (auto token : split_ws(body.substr(5))) {
      std::size_t v = 0;
      if (!parse_number(token, v) || v == 0) return std::nullopt;
      tour.order.push_back(v - 1);
    }
    if (!is_permutation_of(tour.order, n)) return std::nullopt;
    return tour;
  }
  return std::nullopt;
}

}  // namespace detail

/// Runs an external solver in wall-clock mode. Never throws for child
/// failures; those are reported as unsuccessful outcomes.
inline SolveOutcome solve_external(const Instance& inst, const SolverSpec& spec, const Budget& budget,
                                   std::uint64_t seed, const std::filesystem::path& scratch_dir) {
  budget.validate();
  if (spec.command.empty()) throw ConfigError("external solver " + spec.id + " has no command template");
  std::filesystem::create_directories(scratch_dir);
  const auto path = scratch_dir / (inst.id + "." + spec.id + "." + std::to_string(seed) + ".tsp");
  write_tsplib(inst, path);

  std::string cmd = detail::substitute(spec.command, "{instance_path}", path.string());
  cmd = detail::substitute(cmd, "{cutoff}", format_real(budget.cutoff_s));
  cmd = detail::substitute(cmd, "{seed}", std::to_string(seed));
  const auto child = detail::run_shell(cmd, budget.cutoff_s);
  std::error_code ec;
  std::filesystem::remove(path, ec);

  SolveOutcome out;
  out.time_s = budget.cutoff_s;
  if (!child.started || child.timed_out || child.exit_code != 0) return out;
  const auto tour = detail::parse_tour_line(child.stdout_text, inst.size());
  if (!tour) return out;
  out.best_tour = *tour;
  out.best_length = tour_length(inst, *tour);
  out.trace.push_back({child.elapsed_s, out.best_length});
  if (out.best_length <= budget.target_length && child.elapsed_s <= budget.cutoff_s) {
    out.success = true;
    out.time_s = child.elapsed_s;
  }
  return out;
}

/// Dispatches to the built-in portfolio or the external adapter.
inline SolveOutcome solve(const Instance& inst, const SolverSpec& spec, const Budget& budget, std::uint64_t seed,
                          const std::filesystem::path& scratch_dir = std::filesystem::temp_directory_path()) {
  if (spec.kind == SolverKind::external) return solve_external(inst, spec, budget, seed, scratch_dir);
  SolveOutcome out = solve_builtin(inst, spec, budget, seed);
  if (budget.wallclock && out.success && out.time_s > budget.cutoff_s) {
    out.success = false;
    out.time_s = budget.cutoff_s;
  }
  return out;
}

}  // namespace tspsel
