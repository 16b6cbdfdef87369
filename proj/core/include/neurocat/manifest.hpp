#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "neurocat/config.hpp"

namespace neurocat {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

struct StageRecord {
  std::string backend;  // clustering backend / segmentation id
  std::string prompt_template;
  std::size_t neurons_in = 0;
  std::size_t eligible = 0;
  std::size_t failures = 0;
  std::optional<double> seconds;  // absent in deterministic runs
  std::map<std::string, std::string> artifacts;  // file name -> sha256
};

// One manifest per output directory. Each subcommand updates its own stage
// entry, so repeated runs into the same directory accumulate.
struct RunManifest {
  std::string tool_version;
  std::string config_text;
  std::map<std::string, std::string> inputs;  // role -> sha256
  std::map<std::string, StageRecord> stages;

  // Digest over tool version, config and input digests; every artifact
  // written by a run carries it.
  std::string run_digest() const;

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);

  static RunManifest load_or_new(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

inline constexpr std::string_view kManifestName = "manifest.json";

std::string tool_version();

}  // namespace neurocat
