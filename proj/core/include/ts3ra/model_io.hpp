#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ts3ra/tensor.hpp"

namespace ts3ra::model_io {

/// Container layout (all integers little-endian):
///   magic "TS3RA-SN" (8 bytes), version u32, section tag (4 bytes),
///   tensor count u32, then rows u32 / cols u32 per tensor,
///   then every tensor's values as f64 in declaration order.
inline constexpr std::string_view kMagic = "TS3RA-SN";
inline constexpr std::uint32_t kVersion = 1;

using Tag = std::array<char, 4>;
inline constexpr Tag kSliceNetTag{'S', 'N', 'E', 'T'};
inline constexpr Tag kHopfieldTag{'H', 'O', 'P', 'F'};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Section {
  Tag tag{};
  std::vector<nn::Matrix> tensors;
};

void write(std::ostream& os, const Section& section);
Section read(std::istream& is);

}  // namespace ts3ra::model_io
