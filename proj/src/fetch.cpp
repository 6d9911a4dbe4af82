#include "tsgp/fetch.hpp"

#include <zlib.h>

#include <filesystem>
#include <fstream>

#include <httplib.h>

#include "tsgp/error.hpp"

namespace tsgp {

namespace fs = std::filesystem;

std::string cached_dataset_path(const std::string& name, const std::string& cache_dir) {
  return (fs::path(cache_dir) / (name + ".tsv")).string();
}

std::string gunzip(const std::string& compressed) {
  z_stream zs{};
  // 32 + MAX_WBITS: auto-detect gzip or zlib headers.
  if (inflateInit2(&zs, 32 + MAX_WBITS) != Z_OK) throw Error(ErrorCode::kFormat, "inflateInit2");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::string out;
  char buf[1 << 15];
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::kFormat, "corrupt gzip stream");
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::kFormat, "truncated gzip stream");
  return out;
}

namespace {

bool valid_name(const std::string& name) {
  if (name.empty() || name == "." || name == "..") return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      return false;
    }
  }
  return true;
}

// "https://host[:port]/prefix" -> {"https://host[:port]", "/prefix"}
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::kNetwork, "bad base URL " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

}  // namespace

std::string fetch_pmlb(const std::string& name, const std::string& cache_dir,
                       const std::string& base_url) {
  if (!valid_name(name)) throw Error(ErrorCode::kNotFound, "invalid dataset name '" + name + "'");
  const std::string target = cached_dataset_path(name, cache_dir);
  if (fs::exists(target)) return target;

  const auto [host, prefix] = split_url(base_url);
  httplib::Client client(host);
  client.set_follow_location(true);
  client.set_connection_timeout(20);
  client.set_read_timeout(120);
  const auto res = client.Get(prefix + "/" + name + "/" + name + ".tsv.gz");
  if (!res) {
    throw Error(ErrorCode::kNetwork, "GET " + base_url + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 404) throw Error(ErrorCode::kNotFound, "no PMLB dataset '" + name + "'");
  if (res->status != 200) {
    throw Error(ErrorCode::kNetwork, "GET " + base_url + ": HTTP " + std::to_string(res->status));
  }
  std::string body;
  try {
    body = gunzip(res->body);
  } catch (const Error& e) {
    throw Error(ErrorCode::kNetwork, std::string("download of '") + name + "' unusable: " + e.what());
  }

  fs::create_directories(cache_dir);
  const std::string tmp = target + ".part";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::kIo, "cannot write " + tmp);
    }
  }
  fs::rename(tmp, target);
  return target;
}

}  // namespace tsgp
