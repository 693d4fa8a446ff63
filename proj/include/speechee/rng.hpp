#ifndef SPEECHEE_RNG_HPP_
#define SPEECHEE_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>

namespace speechee {

// splitmix64 step, used to spread user seeds and derive stream keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_string(const std::string& s) {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic per-stream generator: derive(seed, "corpus"), derive(seed, id)...
// Keeps independent consumers reproducible regardless of call order elsewhere.
inline std::mt19937_64 make_rng(std::uint64_t seed, const std::string& stream = "") {
  std::uint64_t key = splitmix64(seed ^ splitmix64(hash_string(stream)));
  return std::mt19937_64(key);
}

}  // namespace speechee

#endif  // SPEECHEE_RNG_HPP_
