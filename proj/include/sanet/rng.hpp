#ifndef SANET_RNG_HPP_
#define SANET_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Distribution transforms over std::mt19937_64. The engine's output sequence
// is fixed by the standard; std::uniform_real_distribution and friends are
// not, so every transform is spelled out here to keep runs reproducible
// across standard libraries.
namespace sanet::rng {

inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

inline double exponential(std::mt19937_64& g, double mean) {
  return -mean * std::log1p(-uniform01(g));
}

// Inversion by sequential search; adequate for the small rates used here.
inline int poisson(std::mt19937_64& g, double lambda) {
  double u = uniform01(g);
  double p = std::exp(-lambda);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 10000) {
    ++k;
    p *= lambda / k;
    cdf += p;
  }
  return k;
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t below(std::mt19937_64& g, std::uint64_t n) {
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = g();
  while (x >= limit) x = g();
  return x % n;
}

// Fisher-Yates.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(below(g, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace sanet::rng

#endif  // SANET_RNG_HPP_
