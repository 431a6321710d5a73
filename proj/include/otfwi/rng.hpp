#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "otfwi/field.hpp"

namespace otfwi {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view s);

/// Seed of the named sub-stream `name` of `seed` (noise, init, sampler, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream) : engine_(derive_seed(seed, stream)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  void fill_normal(Field2D& f) {
    for (auto& x : f.values()) x = normal();
  }
  Field2D normal_field(int nx, int nz) {
    Field2D f(nx, nz);
    fill_normal(f);
    return f;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace otfwi
