#pragma once

#include <string>

#include <json.hpp>

#include "tsgp/transformer.hpp"

namespace tsgp {

// Layout:
//   "TSGPMDL1"                         8 bytes
//   header length                      u32 little-endian
//   JSON header                        hyperparams, vocabulary, model
//                                      options, tensor manifest
//                                      {name, shape, offset}
//   tensor payloads                    float32 little-endian, manifest order,
//                                      offsets relative to the payload start

inline constexpr char kCheckpointMagic[8] = {'T', 'S', 'G', 'P', 'M', 'D', 'L', '1'};

nlohmann::json hyperparams_to_json(const Hyperparams& h);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

std::string checkpoint_bytes(const ModelParams& model);
/// Throws kBadMagic, kManifestMismatch, kTruncated or kFormat.
ModelParams model_from_bytes(const std::string& bytes);

void save_checkpoint(const ModelParams& model, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

/// Parsed JSON header of a checkpoint file.
nlohmann::json read_checkpoint_header(const std::string& path);

}  // namespace tsgp
