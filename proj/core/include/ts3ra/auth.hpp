#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ts3ra/domain.hpp"
#include "ts3ra/rng.hpp"

namespace ts3ra::auth {

using Octets = std::vector<std::uint8_t>;
using OctetView = std::span<const std::uint8_t>;

Octets to_octets(std::string_view text);
std::string to_hex(OctetView bytes);
Octets from_hex(std::string_view hex);

enum class Prf : std::uint8_t { kHmacSha1, kHmacSha256, kHmacSha512 };

std::size_t prf_output_length(Prf prf);
std::string_view prf_name(Prf prf);

/// Keyed PRF with the key schedule precomputed once; `mac` may be called
/// any number of times.
class Hmac {
 public:
  Hmac(Prf prf, OctetView key);
  ~Hmac();
  Hmac(const Hmac&) = delete;
  Hmac& operator=(const Hmac&) = delete;

  std::size_t output_length() const { return out_len_; }
  /// Writes output_length() bytes into `out`.
  void mac(OctetView message, std::span<std::uint8_t> out) const;
  Octets mac(OctetView message) const;

 private:
  struct State;
  State* state_;
  std::size_t out_len_;
};

/// Raw PBKDF2 (RFC 8018) with no policy checks beyond the
/// derived-key length limit of (2^32 - 1) blocks.
Octets pbkdf2_hmac(Prf prf, OctetView password, OctetView salt,
                   std::uint32_t iterations, std::size_t key_length);

struct KeyDerivationParams {
  Octets password;
  Octets salt;
  std::uint32_t iteration_count = 1000;
  std::size_t output_key_length = 32;
  Prf prf = Prf::kHmacSha256;

  /// iteration_count >= 1, output_key_length >= 1, salt >= 8 octets.
  void validate() const;
};

inline constexpr std::uint32_t kDefaultIterations = 1000;
inline constexpr std::size_t kMinSaltLength = 8;

/// Derives the device secret key. Enforces the parameter policy, then runs
/// pbkdf2_hmac.
Octets derive_key(const KeyDerivationParams& params);

// -- PUF ---------------------------------------------------------------------

struct PufChallengeResponse {
  DeviceId device;
  Octets challenge;
  Octets response;
};

/// Per-device keyed function standing in for silicon: response =
/// first 16 octets of SHA-256(seed || challenge).
class SimulatedPuf {
 public:
  explicit SimulatedPuf(std::uint64_t hidden_seed) : seed_(hidden_seed) {}
  Octets respond(OctetView challenge) const;

 private:
  std::uint64_t seed_;
};

using PufResponder = std::function<Octets(OctetView challenge)>;

class TamperError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownDeviceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// -- verdicts ----------------------------------------------------------------

enum class AuthReason : std::uint8_t {
  kOk,
  kBadKey,
  kBadPuf,
  kStaleTimestamp,
  kUnknownDevice
};

std::string_view reason_name(AuthReason reason);

struct AuthVerdict {
  bool accepted = false;
  AuthReason reason = AuthReason::kUnknownDevice;

  static AuthVerdict ok() { return {true, AuthReason::kOk}; }
  static AuthVerdict reject(AuthReason r) { return {false, r}; }
};

/// Combinational gate, evaluated literally:
/// out = NOT((ts AND puf) AND (ts OR puf)) AND key.
/// Note this is 0 when all three inputs are 1; `authenticate` does not use it.
bool boolean_gate_literal(bool timestamp_valid, bool puf_valid, bool key_valid);

struct CredentialRecord {
  KeyDerivationParams kdf;  // password cleared after derivation
  Octets derived_key;
};

struct AuthAttempt {
  DeviceId device;
  Octets password;
  double timestamp_s = 0.0;
};

struct AuthPolicy {
  double timestamp_skew_s = 2.0;
};

class VirtualAuthority {
 public:
  explicit VirtualAuthority(std::uint32_t id) : id_(id) {}

  std::uint32_t id() const { return id_; }

  /// Idempotent for identical pairs; a different response for an already
  /// enrolled (device, challenge) raises TamperError.
  void puf_enroll(const PufChallengeResponse& crp);
  std::optional<Octets> lookup(DeviceId device, OctetView challenge) const;
  std::size_t crp_count() const;
  std::size_t crp_count(DeviceId device) const;

  /// Issues a uniformly drawn enrolled challenge and compares the
  /// responder's answer against the store. Throws UnknownDeviceError when
  /// the device has no enrolled pairs.
  bool puf_verify(DeviceId device, const PufResponder& responder,
                  Rng& rng) const;

  void register_device(DeviceId device, CredentialRecord record);
  void deregister_device(DeviceId device);
  bool is_registered(DeviceId device) const;
  bool is_verified(DeviceId device) const { return verified_.contains(device); }
  std::size_t registered_count() const { return registered_.size(); }

  /// Checks run in order: registration, timestamp freshness, PUF, key. The
  /// first failure decides the verdict.
  AuthVerdict authenticate(const AuthAttempt& attempt, double now_s,
                           const PufResponder& responder, Rng& rng,
                           const AuthPolicy& policy = {});

 private:
  using CrpTable = std::map<Octets, Octets>;

  std::uint32_t id_;
  std::map<DeviceId, CrpTable> crp_store_;
  std::map<DeviceId, CredentialRecord> registered_;
  std::set<DeviceId> verified_;
};

/// Serialized registration: device id, password, PUF seed, enrolled
/// challenge count. Line form: `<id> = <password-hex>,<puf-seed>,<count>`.
struct RegistrationRecord {
  DeviceId device;
  Octets password;
  std::uint64_t puf_seed = 0;
  std::uint32_t challenge_count = 8;

  std::string to_line() const;
  static RegistrationRecord parse_line(std::string_view line);
  friend bool operator==(const RegistrationRecord&,
                         const RegistrationRecord&) = default;
};

/// Elastic pool of authorities owned by an access point. A new authority is
/// created when every existing one holds `devices_per_authority` devices;
/// an authority left without devices is removed.
class VirtualAuthorityPool {
 public:
  explicit VirtualAuthorityPool(std::size_t devices_per_authority = 125,
                                AuthPolicy policy = {});

  /// Derives the credential key, enrolls `challenge_count` fresh challenges
  /// drawn from `rng` and registers the device. Returns the authority id.
  std::uint32_t enroll(const RegistrationRecord& record, Rng& rng);
  void remove(DeviceId device);

  AuthVerdict authenticate(const AuthAttempt& attempt, double now_s,
                           const PufResponder& responder, Rng& rng);

  std::size_t authority_count() const { return authorities_.size(); }
  const VirtualAuthority* authority_for(DeviceId device) const;
  std::size_t unverified_count() const;

 private:
  VirtualAuthority* find(DeviceId device);

  std::size_t per_authority_;
  AuthPolicy policy_;
  std::uint32_t next_id_ = 0;
  std::vector<VirtualAuthority> authorities_;
  std::map<DeviceId, std::uint32_t> placement_;
};

}  // namespace ts3ra::auth
