#include "ts3ra/model_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace ts3ra::model_io {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 8);
}

void get_bytes(std::istream& is, char* out, std::size_t n) {
  is.read(out, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw FormatError("model file truncated");
  }
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  get_bytes(is, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  get_bytes(is, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void write(std::ostream& os, const Section& section) {
  os.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  put_u32(os, kVersion);
  os.write(section.tag.data(), 4);
  put_u32(os, static_cast<std::uint32_t>(section.tensors.size()));
  for (const auto& t : section.tensors) {
    put_u32(os, static_cast<std::uint32_t>(t.rows));
    put_u32(os, static_cast<std::uint32_t>(t.cols));
  }
  for (const auto& t : section.tensors) {
    for (double d : t.data) put_f64(os, d);
  }
  if (!os) throw FormatError("model write failed");
}

Section read(std::istream& is) {
  char magic[8];
  get_bytes(is, magic, 8);
  if (std::memcmp(magic, kMagic.data(), 8) != 0) {
    throw FormatError("bad magic: not a TS3RA model file");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  Section s;
  get_bytes(is, s.tag.data(), 4);
  const std::uint32_t count = get_u32(is);
  if (count > (1u << 16)) throw FormatError("implausible tensor count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(count);
  for (auto& [r, c] : shapes) {
    r = get_u32(is);
    c = get_u32(is);
    if (static_cast<std::uint64_t>(r) * c > (1ull << 28)) {
      throw FormatError("implausible tensor shape");
    }
  }
  for (const auto& [r, c] : shapes) {
    nn::Matrix m(r, c);
    for (double& d : m.data) d = get_f64(is);
    s.tensors.push_back(std::move(m));
  }
  return s;
}

}  // namespace ts3ra::model_io
