#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "dfn/model.hpp"

namespace dfn {

constexpr const char* kCheckpointVersion = "dfn-ckpt-1";

// A checkpoint is a directory holding manifest.json (format version, config
// echo, vocabulary, tensor directory with shapes and byte offsets) and
// tensors.bin (raw little-endian float32 arrays, in manifest order).
template <class T>
void save_checkpoint(const ModelParams<T>& model, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = model.cfg.to_text();
  manifest["vocab"] = {{"tokens", model.vocab.tokens},
                       {"chars", model.vocab.chars}};
  nlohmann::json tensors = nlohmann::json::array();
  std::ofstream bin(fs::path(dir) / "tensors.bin", std::ios::binary);
  if (!bin) throw DataError("cannot write " + dir + "/tensors.bin");
  size_t offset = 0;
  for (size_t i = 0; i < model.set.count(); ++i) {
    const Tensor<T>* t = model.set.at(i);
    std::vector<float> row(t->v.begin(), t->v.end());
    bin.write(reinterpret_cast<const char*>(row.data()),
              std::streamsize(row.size() * sizeof(float)));
    tensors.push_back({{"name", t->name},
                       {"shape", t->shape},
                       {"offset", offset},
                       {"bytes", row.size() * sizeof(float)},
                       {"frozen", t->frozen}});
    offset += row.size() * sizeof(float);
  }
  manifest["tensors"] = tensors;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("cannot write " + dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";
}

template <class T>
std::unique_ptr<ModelParams<T>> load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("cannot open checkpoint manifest in " + dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir + "/manifest.json: " + e.what());
  }
  if (manifest.value("format_version", "") != kCheckpointVersion)
    throw DataError(dir + ": unsupported checkpoint version '" +
                    manifest.value("format_version", "<missing>") + "'");
  TrainConfig cfg = TrainConfig::from_text(manifest.at("config").get<std::string>());
  Vocabulary vocab;
  vocab.tokens = manifest.at("vocab").at("tokens").get<std::vector<std::string>>();
  vocab.chars = manifest.at("vocab").at("chars").get<std::vector<std::string>>();
  vocab.rebuild_maps();
  auto model = std::make_unique<ModelParams<T>>(cfg, std::move(vocab));

  std::ifstream bin(fs::path(dir) / "tensors.bin", std::ios::binary);
  if (!bin) throw DataError("cannot open " + dir + "/tensors.bin");
  for (const auto& entry : manifest.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    Tensor<T>* t = model->set.find(name);
    if (!t) throw DataError(dir + ": checkpoint tensor '" + name +
                            "' does not exist in this model");
    size_t bytes = entry.at("bytes").get<size_t>();
    if (bytes != t->size() * sizeof(float))
      throw DataError(dir + ": tensor '" + name + "' byte length mismatch");
    std::vector<float> row(t->size());
    bin.seekg(std::streamoff(entry.at("offset").get<size_t>()));
    bin.read(reinterpret_cast<char*>(row.data()), std::streamsize(bytes));
    if (!bin) throw DataError(dir + ": truncated tensors.bin at '" + name + "'");
    for (size_t k = 0; k < row.size(); ++k) t->v[k] = T(row[k]);
  }
  return model;
}

}  // namespace dfn
