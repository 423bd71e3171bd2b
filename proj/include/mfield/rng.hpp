#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Every stochastic routine in mfield draws from a named stream of this
// generator, so each value is a pure function of (seed, stream, index).
// Batches can therefore be replayed, partitioned across workers, or
// extended without any shared mutable state.
//
// Stream assignments:
//   0   field sampler (sample_field)
//   1   conditional Gaussian sampler
//   2   scenario randomization (random regions, vectors, families)
//   3   outer-configuration resampling in the interacting-field checks
//   16+ reserved for tests

#include <array>
#include <cmath>
#include <cstdint>

#include "mfield/common.hpp"

namespace mfield {

namespace rng_stream {
inline constexpr std::uint32_t kField = 0;
inline constexpr std::uint32_t kConditional = 1;
inline constexpr std::uint32_t kScenario = 2;
inline constexpr std::uint32_t kResample = 3;
inline constexpr std::uint32_t kTest = 16;
}  // namespace rng_stream

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  // Uniform draw in the open interval (0, 1), 53-bit resolution.
  double uniform(std::uint64_t index) const {
    const auto w = block(index);
    return to_unit(w[0], w[1]);
  }

  // Standard normal draw via Box-Muller on two 53-bit uniforms.
  double normal(std::uint64_t index) const {
    const auto w = block(index >> 1);
    const double u1 = to_unit(w[0], w[1]);
    const double u2 = to_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    return (index & 1) ? r * std::sin(a) : r * std::cos(a);
  }

  Vec normal_vector(std::uint64_t base_index, int dim) const {
    Vec z(dim);
    for (int i = 0; i < dim; ++i) z[i] = normal(base_index + static_cast<std::uint64_t>(i));
    return z;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;

  static std::pair<std::uint32_t, std::uint32_t> mulhilo(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    return {static_cast<std::uint32_t>(p >> 32), static_cast<std::uint32_t>(p)};
  }

  std::array<std::uint32_t, 4> block(std::uint64_t counter) const {
    std::array<std::uint32_t, 4> c{static_cast<std::uint32_t>(counter),
                                   static_cast<std::uint32_t>(counter >> 32), stream_,
                                   0x6d666c64u};
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const auto [hi0, lo0] = mulhilo(0xD2511F53u, c[0]);
      const auto [hi1, lo1] = mulhilo(0xCD9E8D57u, c[2]);
      c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return c;
  }

  static double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t u = (static_cast<std::uint64_t>(a) << 32) | b;
    return static_cast<double>(u >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }
};

}  // namespace mfield
