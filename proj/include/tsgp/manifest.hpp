#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace tsgp {

inline constexpr char kToolVersion[] = "0.1.0";

/// Lower-case hex SHA-256 of a file's bytes. Throws kIo.
std::string sha256_file(const std::string& path);
std::string sha256_hex(const std::string& bytes);

struct RunManifest {
  std::string subcommand;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

/// Resolved configuration, seed, input digests and tool version. Contains
/// no timestamps or host data, so deterministic reruns write identical
/// manifests.
nlohmann::json manifest_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace tsgp
