#pragma once
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace crowdship {

// Deterministic stream of random variates. The raw generator is mt19937_64 but
// every distribution on top of it is implemented here, so sequences are
// bit-identical across standard libraries and platforms.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1), 53-bit resolution.
  double uniform();

  // Uniform integer in [0, n), n >= 1. Rejection-free modulo is avoided to
  // keep the draw unbiased.
  int uniform_int(int n);

  // Standard normal via Box-Muller (one variate per call, two uniforms
  // consumed; the sibling variate is discarded for a fixed draw layout).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Knuth's product method; fine for the small lambdas used here.
  int poisson(double lambda);

  // Index draw from unnormalized nonnegative weights.
  int categorical(const std::vector<double>& weights);

 private:
  std::mt19937_64 gen_;
};

// Stable seed derivation: hash of (master, stream label, two indices).
// Different labels/indices give independent-looking streams; identical inputs
// give identical streams on every platform.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace crowdship
