#include <benchmark/benchmark.h>

#include "ts3ra/auth.hpp"

using namespace ts3ra;

static void BM_DeriveKey(benchmark::State& state) {
  auth::KeyDerivationParams p;
  p.password = auth::to_octets("device-password");
  p.salt = auth::to_octets("per-device-salt");
  p.iteration_count = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(auth::derive_key(p));
}
BENCHMARK(BM_DeriveKey)->Arg(1000)->Arg(10000);

static void BM_Authenticate(benchmark::State& state) {
  auth::VirtualAuthorityPool pool(125);
  Rng rng(1);
  auth::RegistrationRecord rec{DeviceId{1}, auth::to_octets("pw"), 5, 8};
  pool.enroll(rec, rng);
  auth::PufResponder r = [](auth::OctetView c) { return auth::SimulatedPuf(5).respond(c); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(pool.authenticate({rec.device, rec.password, 1.0}, 1.0, r, rng));
  }
}
BENCHMARK(BM_Authenticate);
