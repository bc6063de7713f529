#pragma once

#include <cstdint>
#include <random>

namespace deepalloc {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(splitmix64(parent) ^ (index + 0x632be59bd9b4e019ULL));
}

/// Uniform point on the probability simplex (normalized unit exponentials).
template <typename Vector>
void sample_simplex(Rng& rng, Vector& out) {
  std::exponential_distribution<double> expo(1.0);
  double total = 0.0;
  for (auto i = decltype(out.size()){0}; i < out.size(); ++i) {
    out[i] = expo(rng);
    total += out[i];
  }
  for (auto i = decltype(out.size()){0}; i < out.size(); ++i) out[i] /= total;
}

}  // namespace deepalloc
