#include "cca/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "cca/error.hpp"

namespace cca {

RgbImage RgbImage::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || x0 + w > width_ || y0 + h > height_)
    throw Error(ErrorKind::Size, "crop window outside image");
  RgbImage out(w, h);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, x, y) = at(c, x0 + x, y0 + y);
  return out;
}

void RgbImage::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

namespace le {

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::vector<std::byte>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::span<const std::byte> in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw Error(ErrorKind::Io, "truncated binary file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

float get_f32(std::span<const std::byte> in, std::size_t& pos) {
  return std::bit_cast<float>(get_u32(in, pos));
}

}  // namespace le

std::vector<std::byte> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  in.seekg(0, std::ios::end);
  const auto n = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  return buf;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

// Reads the whitespace/comment separated header tokens of a netpbm file.
struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm(std::span<const std::byte> bytes) {
  NetpbmHeader h;
  std::size_t pos = 0;
  auto next_token = [&]() {
    std::string tok;
    while (pos < bytes.size()) {
      const char ch = static_cast<char>(bytes[pos]);
      if (ch == '#') {
        while (pos < bytes.size() && static_cast<char>(bytes[pos]) != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        break;
      }
    }
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
      tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorKind::Io, "malformed netpbm header");
  }
  ++pos;  // single whitespace byte before raster
  h.data_offset = pos;
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw Error(ErrorKind::Io, "malformed netpbm header");
  return h;
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const NetpbmHeader h = parse_netpbm(bytes);
  if (h.magic != "P6") throw Error(ErrorKind::Io, path.string() + ": not a binary PPM (P6)");
  const int bps = h.maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * 3 * bps;
  if (h.data_offset + need > bytes.size()) throw Error(ErrorKind::Io, path.string() + ": truncated");
  RgbImage img(h.width, h.height);
  std::size_t p = h.data_offset;
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x)
      for (int c = 0; c < 3; ++c) {
        unsigned v = static_cast<unsigned>(bytes[p++]);
        if (bps == 2) v = (v << 8) | static_cast<unsigned>(bytes[p++]);
        img.at(c, x, y) = static_cast<double>(v) / h.maxval;
      }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::byte> out;
  out.reserve(header.size() + static_cast<std::size_t>(img.width()) * img.height() * 3);
  for (char ch : header) out.push_back(static_cast<std::byte>(ch));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(c, x, y), 0.0, 1.0);
        out.push_back(static_cast<std::byte>(static_cast<unsigned>(std::lround(v * 255.0))));
      }
  write_bytes(path, out);
}

void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
  std::vector<std::byte> out;
  for (char ch : header) out.push_back(static_cast<std::byte>(ch));
  for (std::uint16_t v : img.values()) {
    out.push_back(static_cast<std::byte>(v >> 8));
    out.push_back(static_cast<std::byte>(v & 0xff));
  }
  write_bytes(path, out);
}

Grid<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const NetpbmHeader h = parse_netpbm(bytes);
  if (h.magic != "P5" || h.maxval != 65535)
    throw Error(ErrorKind::Io, path.string() + ": not a 16-bit PGM");
  if (h.data_offset + static_cast<std::size_t>(h.width) * h.height * 2 > bytes.size())
    throw Error(ErrorKind::Io, path.string() + ": truncated");
  Grid<std::uint16_t> g(h.width, h.height);
  std::size_t p = h.data_offset;
  for (auto& v : g.values()) {
    v = static_cast<std::uint16_t>((static_cast<unsigned>(bytes[p]) << 8) |
                                   static_cast<unsigned>(bytes[p + 1]));
    p += 2;
  }
  return g;
}

void write_float_raster(const std::filesystem::path& path, const Grid<float>& grid) {
  std::vector<std::byte> out;
  for (char ch : std::string("CCAZ")) out.push_back(static_cast<std::byte>(ch));
  le::put_u32(out, static_cast<std::uint32_t>(grid.width()));
  le::put_u32(out, static_cast<std::uint32_t>(grid.height()));
  for (float v : grid.values()) le::put_f32(out, v);
  write_bytes(path, out);
}

Grid<float> read_float_raster(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "CCAZ", 4) != 0)
    throw Error(ErrorKind::Io, path.string() + ": not a CCAZ raster");
  std::size_t pos = 4;
  const auto w = static_cast<int>(le::get_u32(bytes, pos));
  const auto h = static_cast<int>(le::get_u32(bytes, pos));
  Grid<float> g(w, h);
  for (auto& v : g.values()) v = le::get_f32(bytes, pos);
  return g;
}

}  // namespace cca
