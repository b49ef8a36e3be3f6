#pragma once

// File-level plumbing shared by the command-line tool: content hashes,
// corpus directories, portfolio files and JSON manifests.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tspsel/error.hpp"
#include "tspsel/instances.hpp"
#include "tspsel/solvers.hpp"

#ifndef TSPSEL_VERSION
#define TSPSEL_VERSION "1.0.0"
#endif

namespace tspsel {

inline constexpr const char* kToolVersion = TSPSEL_VERSION;
inline constexpr int kRunTableFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;

/// 64-bit FNV-1a of a byte string, as 16 lowercase hex digits.
inline std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_hash(const std::filesystem::path& path) { return content_hash(read_file(path)); }

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed to write " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

/// TSPLIB files of a corpus directory, sorted by file name.
inline std::vector<std::filesystem::path> corpus_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("corpus directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".tsp") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .tsp files in " + dir.string());
  return files;
}

/// All instances of a corpus, sorted by id; ids must be unique.
inline std::vector<Instance> load_corpus(const std::filesystem::path& dir) {
  std::vector<Instance> out;
  for (const auto& f : corpus_files(dir)) out.push_back(read_tsplib(f));
  std::sort(out.begin(), out.end(), [](const Instance& a, const Instance& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].id == out[i - 1].id) throw ConfigError("duplicate instance id " + out[i].id + " in corpus");
  return out;
}

inline nlohmann::json corpus_hashes(const std::filesystem::path& dir) {
  nlohmann::json files = nlohmann::json::object();
  std::string combined;
  for (const auto& f : corpus_files(dir)) {
    const auto h = file_hash(f);
    files[f.filename().string()] = h;
    combined += f.filename().string() + ":" + h + "\n";
  }
  return {{"files", files}, {"corpus_hash", content_hash(combined)}};
}

inline nlohmann::json solver_json(const SolverSpec& s) {
  nlohmann::json j{{"id", s.id}, {"kind", to_string(s.kind)}, {"params", s.params}};
  if (s.kind == SolverKind::external) j["command"] = s.command;
  return j;
}

inline nlohmann::json portfolio_json(const std::vector<SolverSpec>& specs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : specs) arr.push_back(solver_json(s));
  return {{"solvers", arr}};
}

/// Portfolio file: {"solvers": [{"id", "kind", "params": {...}, "command"}]}
/// or a bare array of the same objects. The result is sorted by id.
inline std::vector<SolverSpec> parse_portfolio(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_array() ? j : j.at("solvers");
  if (!arr.is_array() || arr.empty()) throw ConfigError("portfolio must list at least one solver");
  std::vector<SolverSpec> out;
  try {
    for (const auto& item : arr) {
      SolverSpec s;
      s.id = item.at("id").get<std::string>();
      const auto kind = parse_solver_kind(item.value("kind", s.id));
      if (!kind) throw ConfigError("unknown solver kind for " + s.id);
      s.kind = *kind;
      if (item.contains("params")) s.params = item.at("params").get<std::map<std::string, double>>();
      s.command = item.value("command", std::string{});
      if (s.kind == SolverKind::external && s.command.empty())
        throw ConfigError("external solver " + s.id + " needs a command");
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad portfolio: ") + e.what());
  }
  std::sort(out.begin(), out.end(), [](const SolverSpec& a, const SolverSpec& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].id == out[i - 1].id) throw ConfigError("duplicate solver id " + out[i].id);
  return out;
}

inline std::vector<SolverSpec> load_portfolio(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("portfolio file " + path.string() + " does not exist");
  return parse_portfolio(read_json(path));
}

}  // namespace tspsel
