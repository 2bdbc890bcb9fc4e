#pragma once

// Seeded random number generation with portable output: all variates are
// derived from mt19937_64 through fixed arithmetic, so traces are
// reproducible across standard libraries. Engines take an Rng by reference;
// parallel replicates derive independent streams via substream().

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "funmix/stats.hpp"

namespace funmix {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed), base_seed_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // U(0,1), never returns 0 or 1.
  double uniform() {
    const double u = (eng_() >> 11) * 0x1.0p-53;
    return u == 0.0 ? 0x1.0p-53 : u;
  }

  // Box-Muller, one variate per call.
  double normal() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi_v<double> * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; shape boosting below 1.
  double gamma(double shape, double rate) {
    if (shape <= 0.0 || rate <= 0.0) throw std::domain_error("Rng::gamma: nonpositive parameter");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
    }
  }

  double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

  // N(mean, sd^2) restricted to (lower, inf) by inverse CDF; the tail
  // probability is clamped at the smallest normal quantile we can resolve.
  double truncated_normal_lower(double mean, double sd, double lower) {
    const double alpha = (lower - mean) / sd;
    const double q = stats::norm_sf(alpha);  // mass above the cut
    double tail = q * (1.0 - uniform());
    if (tail < 1e-300) tail = 1e-300;
    if (tail >= 1.0) return mean + sd * normal();  // cut far below the mass
    const double z = -stats::norm_quantile(tail);
    return mean + sd * std::fmax(z, alpha);
  }

  long poisson(double lambda) {
    if (lambda < 0.0) throw std::domain_error("Rng::poisson: negative mean");
    long k = 0;
    // chunked Knuth; fine for the count scales this project meets
    while (lambda > 30.0) {
      k += poisson_knuth(30.0);
      lambda -= 30.0;
    }
    return k + poisson_knuth(lambda);
  }

  // Independent child stream; splitmix64 scrambling of (seed, index).
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  Rng substream(std::uint64_t index) const { return Rng(derive_seed(base_seed_, index)); }

 private:
  long poisson_knuth(double lambda) {
    const double limit = std::exp(-lambda);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::mt19937_64 eng_;
  std::uint64_t base_seed_;
};

}  // namespace funmix
