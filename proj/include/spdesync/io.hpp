#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spdesync/experiments.hpp"
#include "spdesync/field.hpp"

namespace spdesync {

/// Writes to a temporary sibling and renames it over `path`, so readers never
/// see a partial file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the content, as hex.
std::string git_blob_sha1(std::string_view content);

/// Raw little-endian float64 values in row-major order at `path`, with a
/// JSON sidecar `<path>.json` holding {"d", "L", "N"}.
void write_field(const std::filesystem::path& path, const Field& f);
Field read_field(const std::filesystem::path& path);

const char* code_version() noexcept;

struct RunManifest {
  std::string kind;
  std::string config_ini;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> member_seeds;
  std::string version;
  std::string started;
  std::string finished;
  std::vector<std::pair<std::string, std::string>> outputs;  ///< file name, git blob SHA-1
  bool passed = false;

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
  /// Re-parses the config echo.
  ExperimentConfig config() const;
};

/// UTC timestamp in ISO 8601.
std::string iso_timestamp(std::chrono::system_clock::time_point t);

/// Writes <kind>.csv, <kind>_summary.json and manifest.json into `dir`
/// (created if missing) and returns the manifest.
RunManifest write_run(const std::filesystem::path& dir, const ExperimentResult& result,
                      std::chrono::system_clock::time_point started,
                      std::chrono::system_clock::time_point finished);

}  // namespace spdesync
