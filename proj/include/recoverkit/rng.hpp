#ifndef RECOVERKIT_RNG_HPP
#define RECOVERKIT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace recoverkit {

// Every random draw in the toolkit flows from one root seed through named
// substreams, so a rerun with the same config reproduces byte-identical
// output regardless of how work is split across workers.
//
// SplitMix64 keeps the generator portable: no std::*_distribution is used
// anywhere because their outputs are implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0,1), 53-bit resolution
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [0,n), unbiased enough for index selection; n must be > 0
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  // Box-Muller, always consumes exactly two u64 draws
  double normal() {
    double u1 = 1.0 - uniform01();  // (0,1], keeps log finite
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Eigen::VectorXd normal_vec(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derives an independent stream from (root seed, purpose name, index).
// The extra scrambling round decorrelates adjacent indices.
inline RngStream substream(std::uint64_t root, std::string_view name,
                           std::uint64_t index = 0) {
  std::uint64_t z = root ^ fnv1a64(name);
  z ^= 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return RngStream(z ^ (z >> 31));
}

}  // namespace recoverkit

#endif
