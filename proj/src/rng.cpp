#include "unigest/rng.hpp"

#include <cmath>

namespace unigest {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t hash_stream(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x2545f4914f6cdd1dULL;
  for (uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double mag = std::sqrt(-2.0 * std::log(u1));
  double two_pi = 2.0 * 3.14159265358979323846;
  spare_ = mag * std::sin(two_pi * u2);
  has_spare_ = true;
  return mag * std::cos(two_pi * u2);
}

}  // namespace unigest
