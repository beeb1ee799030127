#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace ssanova {

/// Deterministic random stream.  mt19937_64 is fully specified by the
/// standard and the Gaussian draw is a fixed Box-Muller, so identical seeds
/// give identical streams on every platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// substream addressed by a path of integers under one master seed
  static Rng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix(master ^ 0x6a09e667f3bcc909ull);
    for (std::uint64_t x : path)
      h = splitmix(h ^ splitmix(x + 0x9e3779b97f4a7c15ull));
    return Rng(h);
  }

  /// uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// standard normal (Box-Muller, pair cached)
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  int sign() { return uniform() < 0.5 ? -1 : 1; }

  std::uint64_t raw() { return eng_(); }

private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace ssanova
