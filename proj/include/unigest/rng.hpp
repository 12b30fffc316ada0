#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace unigest {

uint64_t splitmix64(uint64_t x);

// Mixes an ordered list of integers into a single stream seed so that
// independent random streams can be derived from (seed, index, ...) keys.
uint64_t hash_stream(std::initializer_list<uint64_t> parts);

// Deterministic random source. All sampling goes through explicit
// transforms of mt19937_64 output, so streams are reproducible across
// standard library implementations and thread counts.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  Rng(std::initializer_list<uint64_t> stream_key) : gen_(hash_stream(stream_key)) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

  // Standard normal via Box-Muller; the spare value is cached.
  double gaussian();

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace unigest
