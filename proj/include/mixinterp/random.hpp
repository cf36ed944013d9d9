#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mixinterp {

std::uint64_t splitmix64(std::uint64_t x);

// Explicitly seeded random source. Each consumer owns its instance; derived
// streams are obtained with fork() so that results do not depend on call order
// across unrelated components.
class SeededRandom {
 public:
  explicit SeededRandom(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  SeededRandom fork(std::uint64_t stream) const { return SeededRandom(splitmix64(seed_ ^ splitmix64(stream + 0x9e37))); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  // Inclusive on both ends.
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }
  std::vector<int> permutation(int n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace mixinterp
