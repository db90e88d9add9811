#pragma once

// Stand-alone SHA-1 / SHA-256 / HMAC / PBKDF2 written from the FIPS 180-4
// and RFC 2104 / RFC 8018 descriptions. Shares no code with the library,
// which delegates to OpenSSL.

#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

using Bytes = std::vector<std::uint8_t>;

enum class Hash { kSha1, kSha256 };

Bytes sha1(const Bytes& msg);
Bytes sha256(const Bytes& msg);
Bytes hmac(Hash h, const Bytes& key, const Bytes& msg);
Bytes pbkdf2(Hash h, const Bytes& password, const Bytes& salt,
             std::uint32_t iterations, std::size_t length);

Bytes bytes(const std::string& s);
std::string hex(const Bytes& b);

}  // namespace oracle
