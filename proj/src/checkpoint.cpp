#include "mvf/checkpoint.hpp"

#include <fstream>

namespace mvf {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'F', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<CheckpointEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot write checkpoint");
  out.write(kMagic, sizeof(kMagic));
  write_le<uint32_t>(out, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    write_le<uint16_t>(out, static_cast<uint16_t>(e.key.size()));
    out.write(e.key.data(), static_cast<std::streamsize>(e.key.size()));
    write_le<uint8_t>(out, e.dtype);
    write_le<uint8_t>(out, static_cast<uint8_t>(e.dims.size()));
    for (uint32_t d : e.dims) write_le<uint32_t>(out, d);
    write_le<uint64_t>(out, e.bytes.size());
    out.write(reinterpret_cast<const char*>(e.bytes.data()),
              static_cast<std::streamsize>(e.bytes.size()));
  }
  if (!out) throw DataError(path + ": checkpoint write failed");
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open checkpoint");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError(path + ": not a checkpoint container");
  const auto count = read_le<uint32_t>(in, path);
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const auto keylen = read_le<uint16_t>(in, path);
    e.key.resize(keylen);
    in.read(e.key.data(), keylen);
    e.dtype = read_le<uint8_t>(in, path);
    const auto ndim = read_le<uint8_t>(in, path);
    for (uint8_t d = 0; d < ndim; ++d) e.dims.push_back(read_le<uint32_t>(in, path));
    const auto nbytes = read_le<uint64_t>(in, path);
    e.bytes.resize(nbytes);
    in.read(reinterpret_cast<char*>(e.bytes.data()),
            static_cast<std::streamsize>(nbytes));
    if (!in) throw DataError(path + ": truncated checkpoint");
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace mvf
