#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fewsum/tensor.hpp"

namespace fewsum {

// Binary checkpoint: magic + version, a JSON metadata blob, a manifest of
// (tensor name, shape, dtype, byte offset), then raw little-endian f64 data.
struct Checkpoint {
  std::string metadata_json;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

uint64_t file_hash(const std::string& path);

}  // namespace fewsum
