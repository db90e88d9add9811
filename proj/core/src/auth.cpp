#include "ts3ra/auth.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace ts3ra::auth {

namespace {

const EVP_MD* digest_of(Prf prf) {
  switch (prf) {
    case Prf::kHmacSha1: return EVP_sha1();
    case Prf::kHmacSha256: return EVP_sha256();
    case Prf::kHmacSha512: return EVP_sha512();
  }
  return EVP_sha256();
}

struct MdCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  MdCtx() {
    if (ctx == nullptr) throw std::bad_alloc();
  }
  ~MdCtx() { EVP_MD_CTX_free(ctx); }
  MdCtx(const MdCtx&) = delete;
  MdCtx& operator=(const MdCtx&) = delete;
};

void check(int rc, const char* what) {
  if (rc != 1) throw std::runtime_error(std::string("openssl: ") + what);
}

Octets sha256(OctetView a, OctetView b) {
  MdCtx c;
  check(EVP_DigestInit_ex(c.ctx, EVP_sha256(), nullptr), "init");
  check(EVP_DigestUpdate(c.ctx, a.data(), a.size()), "update");
  check(EVP_DigestUpdate(c.ctx, b.data(), b.size()), "update");
  Octets out(32);
  unsigned len = 0;
  check(EVP_DigestFinal_ex(c.ctx, out.data(), &len), "final");
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Octets to_octets(std::string_view text) { return {text.begin(), text.end()}; }

std::string to_hex(OctetView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

Octets from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex");
  Octets out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("bad hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

std::size_t prf_output_length(Prf prf) {
  switch (prf) {
    case Prf::kHmacSha1: return 20;
    case Prf::kHmacSha256: return 32;
    case Prf::kHmacSha512: return 64;
  }
  return 0;
}

std::string_view prf_name(Prf prf) {
  switch (prf) {
    case Prf::kHmacSha1: return "HMAC-SHA-1";
    case Prf::kHmacSha256: return "HMAC-SHA-256";
    case Prf::kHmacSha512: return "HMAC-SHA-512";
  }
  return "?";
}

// Inner and outer digest states after absorbing key^ipad / key^opad.
struct Hmac::State {
  MdCtx inner;
  MdCtx outer;
  MdCtx scratch;
};

Hmac::Hmac(Prf prf, OctetView key)
    : state_(new State), out_len_(prf_output_length(prf)) {
  const EVP_MD* md = digest_of(prf);
  const std::size_t block = static_cast<std::size_t>(EVP_MD_get_block_size(md));
  Octets k(block, 0);
  if (key.size() > block) {
    MdCtx c;
    unsigned len = 0;
    check(EVP_DigestInit_ex(c.ctx, md, nullptr), "init");
    check(EVP_DigestUpdate(c.ctx, key.data(), key.size()), "update");
    check(EVP_DigestFinal_ex(c.ctx, k.data(), &len), "final");
  } else {
    std::copy(key.begin(), key.end(), k.begin());
  }
  Octets ipad(block), opad(block);
  for (std::size_t i = 0; i < block; ++i) {
    ipad[i] = k[i] ^ 0x36;
    opad[i] = k[i] ^ 0x5c;
  }
  try {
    check(EVP_DigestInit_ex(state_->inner.ctx, md, nullptr), "init");
    check(EVP_DigestUpdate(state_->inner.ctx, ipad.data(), block), "update");
    check(EVP_DigestInit_ex(state_->outer.ctx, md, nullptr), "init");
    check(EVP_DigestUpdate(state_->outer.ctx, opad.data(), block), "update");
  } catch (...) {
    delete state_;
    throw;
  }
  OPENSSL_cleanse(k.data(), k.size());
}

Hmac::~Hmac() { delete state_; }

void Hmac::mac(OctetView message, std::span<std::uint8_t> out) const {
  std::uint8_t inner_digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_MD_CTX* s = state_->scratch.ctx;
  check(EVP_MD_CTX_copy_ex(s, state_->inner.ctx), "copy");
  check(EVP_DigestUpdate(s, message.data(), message.size()), "update");
  check(EVP_DigestFinal_ex(s, inner_digest, &len), "final");
  check(EVP_MD_CTX_copy_ex(s, state_->outer.ctx), "copy");
  check(EVP_DigestUpdate(s, inner_digest, len), "update");
  check(EVP_DigestFinal_ex(s, out.data(), &len), "final");
}

Octets Hmac::mac(OctetView message) const {
  Octets out(out_len_);
  mac(message, out);
  return out;
}

Octets pbkdf2_hmac(Prf prf, OctetView password, OctetView salt,
                   std::uint32_t iterations, std::size_t key_length) {
  if (iterations < 1) throw InvariantError("pbkdf2: iterations must be >= 1");
  const std::size_t h_len = prf_output_length(prf);
  const std::uint64_t max_len =
      static_cast<std::uint64_t>(std::numeric_limits<std::uint32_t>::max()) *
      h_len;
  if (key_length > max_len) {
    throw InvariantError("pbkdf2: derived key too long for " +
                         std::string(prf_name(prf)));
  }
  const Hmac prf_keyed(prf, password);
  const std::size_t blocks = (key_length + h_len - 1) / h_len;

  Octets out(key_length);
  Octets salt_block(salt.begin(), salt.end());
  salt_block.resize(salt.size() + 4);
  Octets u(h_len), t(h_len);
  for (std::size_t i = 1; i <= blocks; ++i) {
    const auto idx = static_cast<std::uint32_t>(i);
    salt_block[salt.size() + 0] = static_cast<std::uint8_t>(idx >> 24);
    salt_block[salt.size() + 1] = static_cast<std::uint8_t>(idx >> 16);
    salt_block[salt.size() + 2] = static_cast<std::uint8_t>(idx >> 8);
    salt_block[salt.size() + 3] = static_cast<std::uint8_t>(idx);
    prf_keyed.mac(salt_block, u);
    t = u;
    for (std::uint32_t c = 1; c < iterations; ++c) {
      prf_keyed.mac(u, u);
      for (std::size_t j = 0; j < h_len; ++j) t[j] ^= u[j];
    }
    const std::size_t offset = (i - 1) * h_len;
    const std::size_t n = std::min(h_len, key_length - offset);
    std::copy_n(t.begin(), n, out.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return out;
}

void KeyDerivationParams::validate() const {
  if (iteration_count < 1) {
    throw InvariantError("KeyDerivationParams: iteration_count must be >= 1");
  }
  if (output_key_length < 1) {
    throw InvariantError("KeyDerivationParams: output_key_length must be >= 1");
  }
  if (salt.size() < kMinSaltLength) {
    throw InvariantError("KeyDerivationParams: salt must be >= 8 octets");
  }
}

Octets derive_key(const KeyDerivationParams& params) {
  params.validate();
  return pbkdf2_hmac(params.prf, params.password, params.salt,
                     params.iteration_count, params.output_key_length);
}

Octets SimulatedPuf::respond(OctetView challenge) const {
  std::uint8_t seed_le[8];
  for (int i = 0; i < 8; ++i) {
    seed_le[i] = static_cast<std::uint8_t>(seed_ >> (8 * i));
  }
  Octets digest = sha256(seed_le, challenge);
  digest.resize(16);
  return digest;
}

std::string_view reason_name(AuthReason reason) {
  switch (reason) {
    case AuthReason::kOk: return "ok";
    case AuthReason::kBadKey: return "bad_key";
    case AuthReason::kBadPuf: return "bad_puf";
    case AuthReason::kStaleTimestamp: return "stale_timestamp";
    case AuthReason::kUnknownDevice: return "unknown_device";
  }
  return "?";
}

bool boolean_gate_literal(bool timestamp_valid, bool puf_valid,
                          bool key_valid) {
  const bool both = timestamp_valid && puf_valid;
  const bool either = timestamp_valid || puf_valid;
  return !(both && either) && key_valid;
}

// -- VirtualAuthority --------------------------------------------------------

void VirtualAuthority::puf_enroll(const PufChallengeResponse& crp) {
  if (crp.challenge.empty() || crp.response.empty()) {
    throw InvariantError("puf_enroll: empty challenge or response");
  }
  CrpTable& table = crp_store_[crp.device];
  auto [it, inserted] = table.try_emplace(crp.challenge, crp.response);
  if (!inserted && it->second != crp.response) {
    throw TamperError("puf_enroll: conflicting response for device " +
                      std::to_string(crp.device.value));
  }
}

std::optional<Octets> VirtualAuthority::lookup(DeviceId device,
                                               OctetView challenge) const {
  auto dev = crp_store_.find(device);
  if (dev == crp_store_.end()) return std::nullopt;
  auto it = dev->second.find(Octets(challenge.begin(), challenge.end()));
  if (it == dev->second.end()) return std::nullopt;
  return it->second;
}

std::size_t VirtualAuthority::crp_count() const {
  std::size_t n = 0;
  for (const auto& [_, table] : crp_store_) n += table.size();
  return n;
}

std::size_t VirtualAuthority::crp_count(DeviceId device) const {
  auto it = crp_store_.find(device);
  return it == crp_store_.end() ? 0 : it->second.size();
}

bool VirtualAuthority::puf_verify(DeviceId device,
                                  const PufResponder& responder,
                                  Rng& rng) const {
  auto dev = crp_store_.find(device);
  if (dev == crp_store_.end() || dev->second.empty()) {
    throw UnknownDeviceError("puf_verify: no enrolled pairs for device " +
                             std::to_string(device.value));
  }
  auto it = dev->second.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.below(dev->second.size())));
  const Octets answer = responder(it->first);
  return answer.size() == it->second.size() &&
         CRYPTO_memcmp(answer.data(), it->second.data(), answer.size()) == 0;
}

void VirtualAuthority::register_device(DeviceId device,
                                       CredentialRecord record) {
  OPENSSL_cleanse(record.kdf.password.data(), record.kdf.password.size());
  record.kdf.password.clear();
  registered_[device] = std::move(record);
}

void VirtualAuthority::deregister_device(DeviceId device) {
  registered_.erase(device);
  crp_store_.erase(device);
  verified_.erase(device);
}

bool VirtualAuthority::is_registered(DeviceId device) const {
  return registered_.contains(device);
}

AuthVerdict VirtualAuthority::authenticate(const AuthAttempt& attempt,
                                           double now_s,
                                           const PufResponder& responder,
                                           Rng& rng,
                                           const AuthPolicy& policy) {
  auto reg = registered_.find(attempt.device);
  if (reg == registered_.end() || crp_count(attempt.device) == 0) {
    return AuthVerdict::reject(AuthReason::kUnknownDevice);
  }
  if (std::abs(now_s - attempt.timestamp_s) > policy.timestamp_skew_s) {
    return AuthVerdict::reject(AuthReason::kStaleTimestamp);
  }
  if (!puf_verify(attempt.device, responder, rng)) {
    return AuthVerdict::reject(AuthReason::kBadPuf);
  }
  KeyDerivationParams kdf = reg->second.kdf;
  kdf.password = attempt.password;
  const Octets key = derive_key(kdf);
  const Octets& expected = reg->second.derived_key;
  if (key.size() != expected.size() ||
      CRYPTO_memcmp(key.data(), expected.data(), key.size()) != 0) {
    return AuthVerdict::reject(AuthReason::kBadKey);
  }
  verified_.insert(attempt.device);
  return AuthVerdict::ok();
}

// -- RegistrationRecord ------------------------------------------------------

std::string RegistrationRecord::to_line() const {
  return std::to_string(device.value) + " = " + to_hex(password) + "," +
         std::to_string(puf_seed) + "," + std::to_string(challenge_count);
}

RegistrationRecord RegistrationRecord::parse_line(std::string_view line) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
      s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
      s.remove_suffix(1);
    }
    return s;
  };
  auto parse_uint = [](std::string_view s, auto& out, const char* what) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw std::invalid_argument(std::string("registration: bad ") + what);
    }
  };
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw std::invalid_argument("registration: expected '<id> = ...'");
  }
  RegistrationRecord r;
  parse_uint(trim(line.substr(0, eq)), r.device.value, "device id");
  std::string_view rest = trim(line.substr(eq + 1));
  const auto c1 = rest.find(',');
  const auto c2 = rest.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
  if (c1 == std::string_view::npos || c2 == std::string_view::npos) {
    throw std::invalid_argument(
        "registration: expected password-hex,puf-seed,count");
  }
  r.password = from_hex(trim(rest.substr(0, c1)));
  parse_uint(trim(rest.substr(c1 + 1, c2 - c1 - 1)), r.puf_seed, "puf seed");
  parse_uint(trim(rest.substr(c2 + 1)), r.challenge_count, "challenge count");
  if (r.challenge_count < 1) {
    throw std::invalid_argument("registration: challenge count must be >= 1");
  }
  return r;
}

// -- VirtualAuthorityPool ----------------------------------------------------

VirtualAuthorityPool::VirtualAuthorityPool(std::size_t devices_per_authority,
                                           AuthPolicy policy)
    : per_authority_(devices_per_authority), policy_(policy) {
  if (per_authority_ == 0) {
    throw InvariantError("VirtualAuthorityPool: capacity must be >= 1");
  }
}

std::uint32_t VirtualAuthorityPool::enroll(const RegistrationRecord& record,
                                           Rng& rng) {
  if (placement_.contains(record.device)) remove(record.device);

  VirtualAuthority* target = nullptr;
  for (auto& va : authorities_) {
    if (va.registered_count() < per_authority_) {
      target = &va;
      break;
    }
  }
  if (target == nullptr) {
    authorities_.emplace_back(next_id_++);
    target = &authorities_.back();
  }

  CredentialRecord cred;
  cred.kdf.password = record.password;
  cred.kdf.salt.resize(16);
  for (auto& b : cred.kdf.salt) b = static_cast<std::uint8_t>(rng.next_u64());
  cred.derived_key = derive_key(cred.kdf);

  const SimulatedPuf puf(record.puf_seed);
  for (std::uint32_t i = 0; i < record.challenge_count; ++i) {
    Octets challenge(16);
    for (auto& b : challenge) b = static_cast<std::uint8_t>(rng.next_u64());
    target->puf_enroll({record.device, challenge, puf.respond(challenge)});
  }
  target->register_device(record.device, std::move(cred));
  placement_[record.device] = target->id();
  return target->id();
}

void VirtualAuthorityPool::remove(DeviceId device) {
  auto it = placement_.find(device);
  if (it == placement_.end()) return;
  const std::uint32_t va_id = it->second;
  placement_.erase(it);
  auto va = std::find_if(authorities_.begin(), authorities_.end(),
                         [&](const auto& a) { return a.id() == va_id; });
  if (va == authorities_.end()) return;
  va->deregister_device(device);
  if (va->registered_count() == 0) authorities_.erase(va);
}

VirtualAuthority* VirtualAuthorityPool::find(DeviceId device) {
  auto it = placement_.find(device);
  if (it == placement_.end()) return nullptr;
  for (auto& va : authorities_) {
    if (va.id() == it->second) return &va;
  }
  return nullptr;
}

const VirtualAuthority* VirtualAuthorityPool::authority_for(
    DeviceId device) const {
  return const_cast<VirtualAuthorityPool*>(this)->find(device);
}

AuthVerdict VirtualAuthorityPool::authenticate(const AuthAttempt& attempt,
                                               double now_s,
                                               const PufResponder& responder,
                                               Rng& rng) {
  VirtualAuthority* va = find(attempt.device);
  if (va == nullptr) return AuthVerdict::reject(AuthReason::kUnknownDevice);
  return va->authenticate(attempt, now_s, responder, rng, policy_);
}

std::size_t VirtualAuthorityPool::unverified_count() const {
  std::size_t n = 0;
  for (const auto& [device, va_id] : placement_) {
    for (const auto& va : authorities_) {
      if (va.id() == va_id && !va.is_verified(device)) ++n;
    }
  }
  return n;
}

}  // namespace ts3ra::auth
