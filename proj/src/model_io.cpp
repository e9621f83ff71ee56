#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xprot/error.hpp"
#include "xprot/model.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight archive I/O assumes a little-endian host");

namespace xprot {

namespace {

constexpr char kMagic[8] = {'X', 'P', 'R', 'O', 'T', 'W', '1', '\0'};

using json = nlohmann::ordered_json;

json config_to_json_obj(const ModelConfig& c) {
  json j;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_model"] = c.d_model;
  j["d_ff"] = c.d_ff;
  j["vocab_size"] = c.vocab_size;
  j["max_positions"] = c.max_positions;
  j["n_classes"] = c.n_classes;
  j["task_kind"] = c.task_kind == TaskKind::multilabel ? "multilabel" : "multiclass";
  j["head_hidden"] = c.head_hidden;
  j["dropout_rate"] = c.dropout_rate;
  if (!c.class_vocab.empty()) j["class_vocab"] = c.class_vocab;
  return j;
}

ModelConfig config_from_json_obj(const json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.vocab_size = j.value("vocab_size", kVocabSize);
    c.max_positions = j.value("max_positions", std::size_t{1002});
    c.n_classes = j.at("n_classes").get<std::size_t>();
    const std::string kind = j.value("task_kind", "multiclass");
    if (kind == "multilabel") {
      c.task_kind = TaskKind::multilabel;
    } else if (kind == "multiclass") {
      c.task_kind = TaskKind::multiclass;
    } else {
      throw Error(ErrorCode::manifest_mismatch, "model config: unknown task_kind '" + kind + "'");
    }
    c.head_hidden = j.value("head_hidden", std::size_t{50});
    c.dropout_rate = j.value("dropout_rate", 0.10);
    if (j.contains("class_vocab")) {
      c.class_vocab = j.at("class_vocab").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::manifest_mismatch, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
  return config_to_json_obj(config).dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("model config: ") + e.what());
  }
  return config_from_json_obj(j);
}

void save_weights(const std::string& path, const ModelConfig& config,
                  const ModelWeights& weights) {
  config.validate();
  weights.validate(config);

  json manifest;
  manifest["config"] = config_to_json_obj(config);
  json tensors = json::array();
  std::uint64_t offset = 0;
  for_each_param(weights, [&](const std::string& name, ParamGroup, const Tensor& t) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["dtype"] = "f64";
    entry["offset"] = offset;
    entry["byte_len"] = static_cast<std::uint64_t>(t.size() * sizeof(double));
    tensors.push_back(entry);
    offset += t.size() * sizeof(double);
  });
  manifest["tensors"] = tensors;
  const std::string manifest_text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::io_error, "save_weights: cannot open " + path);
  }
  out.write(kMagic, 8);
  const std::uint64_t manifest_len = manifest_text.size();
  out.write(reinterpret_cast<const char*>(&manifest_len), 8);
  out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
  for_each_param(weights, [&](const std::string&, ParamGroup, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) {
    throw Error(ErrorCode::io_error, "save_weights: write failed for " + path);
  }
}

std::pair<ModelConfig, ModelWeights> load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "load_weights: cannot open " + path);
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error(ErrorCode::bad_magic, "load_weights: bad magic in " + path);
  }
  std::uint64_t manifest_len = 0;
  std::memcpy(&manifest_len, bytes.data() + 8, 8);
  if (bytes.size() < 16 + manifest_len) {
    throw Error(ErrorCode::truncated_payload, "load_weights: truncated manifest in " + path);
  }
  json manifest;
  try {
    manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + manifest_len);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::manifest_mismatch, std::string("load_weights: manifest: ") + e.what());
  }
  ModelConfig config = config_from_json_obj(manifest.at("config"));
  ModelWeights weights = ModelWeights::zeros(config);

  const char* payload = bytes.data() + 16 + manifest_len;
  const std::uint64_t payload_len = bytes.size() - 16 - manifest_len;

  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    throw Error(ErrorCode::manifest_mismatch, "load_weights: manifest lacks tensors array");
  }
  for (const auto& entry : manifest["tensors"]) {
    std::string name, dtype;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0, byte_len = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
      dtype = entry.at("dtype").get<std::string>();
      offset = entry.at("offset").get<std::uint64_t>();
      byte_len = entry.at("byte_len").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::manifest_mismatch, std::string("load_weights: tensor entry: ") + e.what());
    }
    Tensor* target = nullptr;
    for_each_param(weights, [&](const std::string& n, ParamGroup, Tensor& t) {
      if (n == name) target = &t;
    });
    if (target == nullptr) {
      throw Error(ErrorCode::manifest_mismatch, "load_weights: unknown tensor '" + name + "'");
    }
    if (target->shape() != shape) {
      throw Error(ErrorCode::manifest_mismatch,
                  "load_weights: tensor '" + name + "' shape mismatch against config");
    }
    const std::size_t elem_size = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    if (elem_size == 0) {
      throw Error(ErrorCode::manifest_mismatch, "load_weights: unknown dtype '" + dtype + "'");
    }
    if (byte_len != target->size() * elem_size || offset + byte_len > payload_len) {
      throw Error(ErrorCode::truncated_payload,
                  "load_weights: payload for tensor '" + name + "' out of bounds");
    }
    if (elem_size == 8) {
      std::memcpy(target->data(), payload + offset, byte_len);
    } else {
      for (std::size_t i = 0; i < target->size(); ++i) {
        float f;
        std::memcpy(&f, payload + offset + i * 4, 4);
        (*target)[i] = static_cast<double>(f);  // widen f32 storage to f64
      }
    }
  }
  weights.validate(config);
  return {std::move(config), std::move(weights)};
}

}  // namespace xprot
