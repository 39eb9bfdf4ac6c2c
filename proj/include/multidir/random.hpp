#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

// Seeded random source used by every sampler in the library.  All draws are
// derived from raw engine words so that results depend only on the seed and
// the call sequence, not on the standard library's distribution internals.
// A handle is owned by one execution context; it is never shared across
// concurrent samplers.

namespace multidir {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1).
  double uniform_pos() {
    for (;;) {
      const double u = uniform();
      if (u > 0.0) return u;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the Marsaglia polar method.
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        return u * std::sqrt(-2.0 * std::log(s) / s);
      }
    }
  }

  // Gamma(shape, rate) via Marsaglia-Tsang; the shape < 1 case is boosted
  // through Gamma(shape + 1) and a uniform power.
  double gamma(double shape, double rate = 1.0) {
    if (!(shape > 0.0) || !(rate > 0.0)) {
      throw std::domain_error("Rng::gamma: shape and rate must be > 0");
    }
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = normal();
      const double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        return d * v / rate;
      }
    }
  }

  double beta(double a, double b) {
    for (;;) {
      const double x = gamma(a);
      const double y = gamma(b);
      if (x + y > 0.0) return x / (x + y);
    }
  }

  // Index drawn proportionally to the given nonnegative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) {
        throw std::domain_error("Rng::categorical: negative weight");
      }
      total += w;
    }
    if (!(total > 0.0)) {
      throw std::domain_error("Rng::categorical: weights sum to zero");
    }
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace multidir
