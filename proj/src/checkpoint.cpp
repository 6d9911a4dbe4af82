#include "tsgp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tsgp/error.hpp"

namespace tsgp {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

json hyperparams_to_json(const Hyperparams& h) {
  return json{{"d_model", h.d_model},
              {"n_heads", h.n_heads},
              {"n_encoder_layers", h.n_encoder_layers},
              {"n_decoder_layers", h.n_decoder_layers},
              {"ffn_dim", h.ffn_dim},
              {"max_len", h.max_len},
              {"dropout", h.dropout},
              {"lr", h.lr},
              {"weight_decay", h.weight_decay},
              {"beta1", h.beta1},
              {"beta2", h.beta2},
              {"adam_eps", h.adam_eps},
              {"clip_norm", h.clip_norm},
              {"epochs", h.epochs},
              {"batch_size", h.batch_size},
              {"init_std", h.init_std}};
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams h;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("d_model", h.d_model);
  get("n_heads", h.n_heads);
  get("n_encoder_layers", h.n_encoder_layers);
  get("n_decoder_layers", h.n_decoder_layers);
  get("ffn_dim", h.ffn_dim);
  get("max_len", h.max_len);
  get("dropout", h.dropout);
  get("lr", h.lr);
  get("weight_decay", h.weight_decay);
  get("beta1", h.beta1);
  get("beta2", h.beta2);
  get("adam_eps", h.adam_eps);
  get("clip_norm", h.clip_norm);
  get("epochs", h.epochs);
  get("batch_size", h.batch_size);
  get("init_std", h.init_std);
  return h;
}

namespace {

json model_options() {
  return json{{"sd_conditioning", "affine scalar projection prepended at position 0 of encoder "
                                  "and decoder inputs"},
              {"tied_embeddings", false},
              {"positional", "sinusoidal"},
              {"norm", "pre"},
              {"activation", "gelu_tanh"},
              {"embedding_scale", "sqrt(d_model)"}};
}

json build_header(const ModelParams& model) {
  json manifest = json::array();
  std::size_t offset = 0;
  for_each_tensor(model.weights, [&](const std::string& name, const Mat& t) {
    manifest.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"offset", offset}});
    offset += static_cast<std::size_t>(t.size()) * sizeof(float);
  });
  return json{{"hyperparams", hyperparams_to_json(model.hyper)},
              {"vocabulary", model.vocab.symbols()},
              {"n_vars", model.vocab.n_vars()},
              {"model", model_options()},
              {"tensors", manifest}};
}

}  // namespace

std::string checkpoint_bytes(const ModelParams& model) {
  const std::string header = build_header(model).dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  const auto len = static_cast<std::uint32_t>(header.size());
  char len_bytes[4];
  std::memcpy(len_bytes, &len, 4);
  out.append(len_bytes, 4);
  out += header;
  for_each_tensor(model.weights, [&](const std::string&, const Mat& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const float f = static_cast<float>(t.data()[i]);
      char b[4];
      std::memcpy(b, &f, 4);
      out.append(b, 4);
    }
  });
  return out;
}

namespace {

json parse_header(const std::string& bytes, std::size_t* payload_start) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw Error(ErrorCode::kBadMagic, "not a TSGPMDL1 checkpoint");
  }
  if (bytes.size() < 12) throw Error(ErrorCode::kTruncated, "missing header length");
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 4);
  if (bytes.size() < 12 + static_cast<std::size_t>(len)) {
    throw Error(ErrorCode::kTruncated, "header extends past end of file");
  }
  *payload_start = 12 + len;
  try {
    return json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace

ModelParams model_from_bytes(const std::string& bytes) {
  std::size_t payload = 0;
  const json header = parse_header(bytes, &payload);

  ModelParams model;
  try {
    const Hyperparams hyper = hyperparams_from_json(header.at("hyperparams"));
    const Vocabulary vocab(header.at("n_vars").get<int>());
    if (header.at("vocabulary").get<std::vector<std::string>>() != vocab.symbols()) {
      throw Error(ErrorCode::kManifestMismatch, "vocabulary does not match n_vars layout");
    }
    model = init_model(hyper, vocab, 0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint header: ") + e.what());
  }

  const json& manifest = header.at("tensors");
  std::size_t index = 0;
  std::size_t expected_offset = 0;
  std::size_t total = 0;
  for_each_tensor(model.weights, [&](const std::string& name, const Mat& t) {
    if (index >= manifest.size()) throw Error(ErrorCode::kManifestMismatch, "missing " + name);
    const json& entry = manifest[index++];
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    if (entry.at("name").get<std::string>() != name || shape.size() != 2 ||
        shape[0] != t.rows() || shape[1] != t.cols() ||
        entry.at("offset").get<std::size_t>() != expected_offset) {
      throw Error(ErrorCode::kManifestMismatch, "tensor " + name + " disagrees with header");
    }
    expected_offset += static_cast<std::size_t>(t.size()) * sizeof(float);
  });
  total = expected_offset;
  if (index != manifest.size()) {
    throw Error(ErrorCode::kManifestMismatch, "manifest lists extra tensors");
  }
  if (bytes.size() - payload != total) {
    throw Error(ErrorCode::kTruncated, "payload holds " + std::to_string(bytes.size() - payload) +
                                           " bytes, manifest declares " + std::to_string(total));
  }

  const char* p = bytes.data() + payload;
  for_each_tensor(model.weights, [&](const std::string&, Mat& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      float f;
      std::memcpy(&f, p, 4);
      p += 4;
      t.data()[i] = f;
    }
  });
  return model;
}

void save_checkpoint(const ModelParams& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  const std::string bytes = checkpoint_bytes(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ModelParams load_checkpoint(const std::string& path) { return model_from_bytes(slurp(path)); }

json read_checkpoint_header(const std::string& path) {
  std::size_t payload = 0;
  return parse_header(slurp(path), &payload);
}

}  // namespace tsgp
