#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvf/errors.hpp"
#include "mvf/model.hpp"
#include "mvf/tensor.hpp"

namespace mvf {

/// One tensor in the flat checkpoint container, keyed like
/// "block2/layer0/conv1/weight". Payload bytes round-trip bit-exactly.
struct CheckpointEntry {
  std::string key;
  uint8_t dtype = 4;  // element size: 4 = float, 8 = double
  std::vector<uint32_t> dims;
  std::vector<uint8_t> bytes;
};

void write_checkpoint(const std::string& path,
                      const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

template <typename T>
CheckpointEntry to_entry(const std::string& key, const Tensor<T>& t) {
  CheckpointEntry e;
  e.key = key;
  e.dtype = sizeof(T);
  e.dims = {static_cast<uint32_t>(t.n), static_cast<uint32_t>(t.c),
            static_cast<uint32_t>(t.h), static_cast<uint32_t>(t.w)};
  e.bytes.resize(t.size() * sizeof(T));
  std::memcpy(e.bytes.data(), t.data.data(), e.bytes.size());
  return e;
}

template <typename T>
void save_model(FusionModel<T>& model, const std::string& path) {
  std::vector<CheckpointEntry> entries;
  for (auto& p : model.parameters()) entries.push_back(to_entry(p.name, *p.value));
  for (auto& b : model.buffers()) entries.push_back(to_entry(b.name, *b.value));
  write_checkpoint(path, entries);
}

template <typename T>
void load_model(FusionModel<T>& model, const std::string& path) {
  const auto entries = read_checkpoint(path);
  std::map<std::string, const CheckpointEntry*> by_key;
  for (const auto& e : entries) by_key[e.key] = &e;
  const auto restore = [&](const std::string& key, Tensor<T>* dst) {
    const auto it = by_key.find(key);
    if (it == by_key.end())
      throw DataError(path + ": checkpoint is missing key '" + key + "'");
    const CheckpointEntry& e = *it->second;
    if (e.dtype != sizeof(T))
      throw DataError(path + ": dtype mismatch for '" + key + "'");
    if (e.bytes.size() != dst->size() * sizeof(T))
      throw DataError(path + ": shape mismatch for '" + key + "'");
    std::memcpy(dst->data.data(), e.bytes.data(), e.bytes.size());
    by_key.erase(it);
  };
  for (auto& p : model.parameters()) restore(p.name, p.value);
  for (auto& b : model.buffers()) restore(b.name, b.value);
  if (!by_key.empty())
    throw DataError(path + ": checkpoint has unexpected key '" +
                    by_key.begin()->first + "'");
}

}  // namespace mvf
