#include "crowdship/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace crowdship {

double RandomStream::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

int RandomStream::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  // Rejection sampling to stay unbiased.
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

double RandomStream::normal() {
  // Box-Muller; u1 nudged away from 0 so log() is safe.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RandomStream::poisson(double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be >= 0");
  if (lambda == 0.0) return 0;
  const double limit = std::exp(-lambda);
  int k = 0;
  double prod = uniform();
  while (prod > limit) {
    ++k;
    prod *= uniform();
  }
  return k;
}

int RandomStream::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("categorical: weights must be finite and >= 0");
    total += w;
  }
  if (total <= 0.0)
    throw std::invalid_argument("categorical: total weight must be positive");
  double mass = uniform() * total;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    mass -= weights[i];
    if (mass < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

// splitmix64 finalizer; good avalanche, trivially portable.
static std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix(master);
  for (char c : stream) h = mix(h ^ static_cast<std::uint8_t>(c));
  h = mix(h ^ a);
  h = mix(h ^ b);
  return h;
}

}  // namespace crowdship
