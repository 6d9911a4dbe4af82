#include "tsgp/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "tsgp/error.hpp"

namespace tsgp {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& p : m.inputs) inputs.push_back({{"path", p}, {"sha256", sha256_file(p)}});
  return {{"subcommand", m.subcommand}, {"config", m.config},   {"seed", m.seed},
          {"inputs", inputs},           {"outputs", m.outputs}, {"tool_version", kToolVersion}};
}

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << manifest_json(m).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

}  // namespace tsgp
