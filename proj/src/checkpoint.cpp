#include "cca/autograd/checkpoint.hpp"

#include <cstring>

#include "cca/image.hpp"

namespace cca::ag {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

std::vector<std::byte> encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::vector<std::byte> out;
  for (char ch : std::string("CCAW")) out.push_back(static_cast<std::byte>(ch));
  le::put_u32(out, kCheckpointVersion);
  le::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    if (t.data.size() != numel(t.shape)) throw Error(ErrorKind::Shape, "checkpoint tensor " + t.name);
    le::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    for (char ch : t.name) out.push_back(static_cast<std::byte>(ch));
    le::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) le::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) le::put_f32(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::byte> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "CCAW", 4) != 0)
    throw Error(ErrorKind::Io, "not a CCAW checkpoint");
  std::size_t pos = 4;
  if (le::get_u32(bytes, pos) != kCheckpointVersion) throw Error(ErrorKind::Io, "unsupported CCAW version");
  const std::uint32_t count = le::get_u32(bytes, pos);
  std::vector<NamedTensor> out(count);
  for (NamedTensor& t : out) {
    const std::uint32_t len = le::get_u32(bytes, pos);
    if (pos + len > bytes.size()) throw Error(ErrorKind::Io, "truncated checkpoint");
    t.name.assign(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
    const std::uint32_t rank = le::get_u32(bytes, pos);
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(le::get_u32(bytes, pos));
    t.data.resize(numel(t.shape));
    for (float& v : t.data) v = le::get_f32(bytes, pos);
  }
  if (pos != bytes.size()) throw Error(ErrorKind::Io, "trailing bytes in checkpoint");
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  write_bytes(path, encode_checkpoint(tensors));
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_bytes(path));
}

std::string checkpoint_summary(const std::vector<NamedTensor>& tensors) {
  std::string out;
  std::size_t total = 0;
  for (const NamedTensor& t : tensors) {
    out += t.name + " " + shape_string(t.shape) + " " + std::to_string(t.data.size()) + "\n";
    total += t.data.size();
  }
  out += "total_parameters " + std::to_string(total) + "\n";
  return out;
}

}  // namespace cca::ag
