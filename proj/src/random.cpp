#include "mixinterp/random.hpp"

#include <numeric>
#include <stdexcept>

namespace mixinterp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double SeededRandom::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta parameters must be positive");
  const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
  const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

std::vector<int> SeededRandom::permutation(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  // Fisher-Yates with our own index draws; std::shuffle is implementation-defined.
  for (int i = n - 1; i > 0; --i) {
    const int j = uniform_int(0, i);
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace mixinterp
