#pragma once

#include <string>

namespace tsgp {

inline constexpr char kPmlbBaseUrl[] = "https://github.com/EpistasisLab/pmlb/raw/master/datasets";

/// Path of the cached TSV for `name`, downloading
/// <base_url>/<name>/<name>.tsv.gz on a cache miss. The cache is only
/// written after a complete download. Throws kNotFound or kNetwork.
std::string fetch_pmlb(const std::string& name, const std::string& cache_dir,
                       const std::string& base_url = kPmlbBaseUrl);

std::string cached_dataset_path(const std::string& name, const std::string& cache_dir);

/// Inflates gzip or zlib data; throws kFormat on corrupt input.
std::string gunzip(const std::string& compressed);

}  // namespace tsgp
