#include "geoexp/rng.hpp"

#include <cmath>

namespace geoexp {

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * factor;
  has_cached_normal_ = true;
  return u * factor;
}

std::uint64_t Rng::index(std::uint64_t n) {
  // Reject the top partial block so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t replicate, Stream stream) {
  const std::uint64_t base = mix64(master_seed);
  const std::uint64_t per_replicate = mix64(base ^ replicate);
  return mix64(per_replicate ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
}

std::string_view stream_name(Stream stream) {
  switch (stream) {
    case Stream::design: return "design";
    case Stream::sizes: return "sizes";
    case Stream::effects: return "effects";
    case Stream::pre_noise: return "pre_noise";
    case Stream::post_noise: return "post_noise";
    case Stream::gibbs: return "gibbs";
    case Stream::chain: return "chain";
  }
  return "unknown";
}

}  // namespace geoexp
