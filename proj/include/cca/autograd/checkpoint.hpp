#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cca/autograd/tensor.hpp"

namespace cca::ag {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

/// "CCAW", u32 version, u32 count, then per tensor: u32 name length, name
/// bytes, u32 rank, u32 dims, float32 data. All little-endian.
std::vector<std::byte> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::byte> bytes);

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

/// One "name shape count" line per tensor plus a parameter total.
std::string checkpoint_summary(const std::vector<NamedTensor>& tensors);

}  // namespace cca::ag
