#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace geoexp {

/// Pseudo-random stream used throughout the library.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// derives uniforms, normals and bounded integers with hand-written transforms
/// so that draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Standard normal via the Marsaglia polar method; the second variate is cached.
  double normal();

  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Independent random streams within one replicate. Pairing draws by stream
/// keeps common random numbers aligned when only the spend level changes.
enum class Stream : std::uint32_t {
  design = 1,
  sizes = 2,
  effects = 3,
  pre_noise = 4,
  post_noise = 5,
  gibbs = 6,
  chain = 7,
};

std::string_view stream_name(Stream stream);

/// Deterministic seed for (master_seed, replicate, stream).
///
/// Built from nested splitmix64 finalizers, each a bijection on 64-bit words,
/// so distinct replicate indices never collide for a fixed master seed and stream.
std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t replicate, Stream stream);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace geoexp
