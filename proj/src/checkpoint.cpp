#include "invit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "invit/errors.hpp"
#include "invit/version.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace invit {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'T', 'C', 'K', 'P', 'T'};

void append_u32(std::string& out, uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}

void append_u64(std::string& out, uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), 8);
}

const uint32_t* crc_table() {
  static const auto table = [] {
    static uint32_t t[256];
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}

}  // namespace

uint32_t crc32_bytes(const unsigned char* data, size_t len) {
  const uint32_t* t = crc_table();
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = t[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  nlohmann::json dir = nlohmann::json::object();
  uint64_t offset = 0;  // in float32 elements
  for (const auto& [name, blob] : ckpt.arrays) {
    const uint64_t count = blob.data.size();
    if (count != static_cast<uint64_t>(blob.rows) * static_cast<uint64_t>(blob.cols))
      throw LogicError("checkpoint array '" + name + "' shape does not match its data");
    dir[name] = {{"rows", blob.rows}, {"cols", blob.cols}, {"offset", offset}};
    offset += count;
  }
  header["arrays"] = dir;
  const std::string header_str = header.dump();

  std::string bytes;
  bytes.append(kMagic, 8);
  append_u32(bytes, kCheckpointVersion);
  append_u64(bytes, header_str.size());
  bytes += header_str;
  for (const auto& [name, blob] : ckpt.arrays) {
    (void)name;
    bytes.append(reinterpret_cast<const char*>(blob.data.data()),
                 blob.data.size() * sizeof(float));
  }
  append_u32(bytes, crc32_bytes(reinterpret_cast<const unsigned char*>(bytes.data()),
                                bytes.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open checkpoint file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 + 4 + 8 + 4) throw InputError("checkpoint file truncated: " + path);

  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw InputError("not a checkpoint file (bad magic): " + path);

  uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const uint32_t actual_crc = crc32_bytes(
      reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size() - 4);
  if (stored_crc != actual_crc)
    throw InputError("checkpoint checksum mismatch (corrupt file): " + path);

  uint32_t version;
  std::memcpy(&version, bytes.data() + 8, 4);
  if (version != kCheckpointVersion)
    throw InputError("unsupported checkpoint format version " + std::to_string(version) +
                     " (this build reads version " + std::to_string(kCheckpointVersion) + ")");

  uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + 12, 8);
  const size_t payload_begin = 20 + header_len;
  if (payload_begin + 4 > bytes.size())
    throw InputError("checkpoint header length out of range: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(20, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  const size_t payload_floats = (bytes.size() - 4 - payload_begin) / sizeof(float);
  for (const auto& [name, entry] : header.at("arrays").items()) {
    ArrayBlob blob;
    blob.rows = entry.at("rows").get<int>();
    blob.cols = entry.at("cols").get<int>();
    const uint64_t offset = entry.at("offset").get<uint64_t>();
    const uint64_t count = static_cast<uint64_t>(blob.rows) * static_cast<uint64_t>(blob.cols);
    if (offset + count > payload_floats)
      throw InputError("checkpoint array '" + name + "' extends past the payload");
    blob.data.resize(count);
    std::memcpy(blob.data.data(), bytes.data() + payload_begin + offset * sizeof(float),
                count * sizeof(float));
    ckpt.arrays.emplace(name, std::move(blob));
  }
  return ckpt;
}

void pack_tensors(Checkpoint& ckpt, const std::string& prefix,
                  const std::vector<std::string>& names,
                  const std::vector<TensorT<float>>& tensors) {
  if (names.size() != tensors.size())
    throw LogicError("pack_tensors: names/tensors size mismatch");
  for (size_t i = 0; i < names.size(); ++i) {
    ArrayBlob blob;
    blob.rows = tensors[i].rows();
    blob.cols = tensors[i].cols();
    blob.data = tensors[i].data();
    ckpt.arrays[prefix + "/" + names[i]] = std::move(blob);
  }
}

void unpack_tensors(const Checkpoint& ckpt, const std::string& prefix,
                    const std::vector<std::string>& names,
                    std::vector<TensorT<float>>& tensors) {
  if (names.size() != tensors.size())
    throw LogicError("unpack_tensors: names/tensors size mismatch");
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string key = prefix + "/" + names[i];
    auto it = ckpt.arrays.find(key);
    if (it == ckpt.arrays.end())
      throw InputError("checkpoint is missing array '" + key + "'");
    const ArrayBlob& blob = it->second;
    if (blob.rows != tensors[i].rows() || blob.cols != tensors[i].cols())
      throw InputError("checkpoint array '" + key + "' has shape " +
                       std::to_string(blob.rows) + "x" + std::to_string(blob.cols) +
                       ", expected " + std::to_string(tensors[i].rows()) + "x" +
                       std::to_string(tensors[i].cols()));
    std::copy(blob.data.begin(), blob.data.end(), tensors[i].data().begin());
  }
}

void pack_vectors(Checkpoint& ckpt, const std::string& prefix,
                  const std::vector<std::string>& names,
                  const std::vector<std::vector<float>>& vecs) {
  if (names.size() != vecs.size())
    throw LogicError("pack_vectors: names/vectors size mismatch");
  for (size_t i = 0; i < names.size(); ++i) {
    ArrayBlob blob;
    blob.rows = 1;
    blob.cols = static_cast<int>(vecs[i].size());
    blob.data = vecs[i];
    ckpt.arrays[prefix + "/" + names[i]] = std::move(blob);
  }
}

void unpack_vectors(const Checkpoint& ckpt, const std::string& prefix,
                    const std::vector<std::string>& names,
                    std::vector<std::vector<float>>& vecs) {
  if (names.size() != vecs.size())
    throw LogicError("unpack_vectors: names/vectors size mismatch");
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string key = prefix + "/" + names[i];
    auto it = ckpt.arrays.find(key);
    if (it == ckpt.arrays.end())
      throw InputError("checkpoint is missing array '" + key + "'");
    if (it->second.data.size() != vecs[i].size())
      throw InputError("checkpoint array '" + key + "' has " +
                       std::to_string(it->second.data.size()) + " elements, expected " +
                       std::to_string(vecs[i].size()));
    vecs[i] = it->second.data;
  }
}

}  // namespace invit
