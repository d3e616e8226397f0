#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "invit/tensor.hpp"

namespace invit {

/// Named float32 array with a 2D shape (rows x cols; vectors use rows = 1).
struct ArrayBlob {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;
};

/// On-disk snapshot: free-form JSON metadata plus named arrays. The binary
/// layout is: magic "INVTCKPT", u32 format version, u64 header length, the
/// header JSON (UTF-8, sorted keys), the arrays concatenated as little-endian
/// float32 in name order, and a trailing CRC-32 of all preceding bytes.
struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, ArrayBlob> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Copies named tensors into `ckpt.arrays` under `prefix/name`.
void pack_tensors(Checkpoint& ckpt, const std::string& prefix,
                  const std::vector<std::string>& names,
                  const std::vector<TensorT<float>>& tensors);

/// Copies arrays `prefix/name` back into the given tensors; shapes must match.
void unpack_tensors(const Checkpoint& ckpt, const std::string& prefix,
                    const std::vector<std::string>& names,
                    std::vector<TensorT<float>>& tensors);

/// Flat-vector variants for optimizer moment buffers; the names and element
/// counts must line up with the packed tensors.
void pack_vectors(Checkpoint& ckpt, const std::string& prefix,
                  const std::vector<std::string>& names,
                  const std::vector<std::vector<float>>& vecs);
void unpack_vectors(const Checkpoint& ckpt, const std::string& prefix,
                    const std::vector<std::string>& names,
                    std::vector<std::vector<float>>& vecs);

uint32_t crc32_bytes(const unsigned char* data, size_t len);

}  // namespace invit
