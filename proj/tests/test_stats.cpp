#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "funmix/rng.hpp"
#include "funmix/stats.hpp"

using namespace funmix;

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {1e-12, 1e-6, 0.025, 0.31, 0.5, 0.77, 0.975, 1.0 - 1e-9}) {
    const double z = stats::norm_quantile(p);
    REQUIRE(stats::norm_cdf(z) == Catch::Approx(p).epsilon(1e-10).margin(1e-13));
  }
  REQUIRE(stats::norm_quantile(0.5) == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(stats::norm_quantile(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("log normal cdf matches direct evaluation and stays finite in the tail") {
  for (double z : {-5.0, -2.0, 0.0, 1.5, 6.0})
    REQUIRE(stats::log_norm_cdf(z) == Catch::Approx(std::log(stats::norm_cdf(z))).epsilon(1e-12));
  // deep tail: compare against the identity log Phi(z) = log(Phi(-|z|)) via erfc in long double range
  const double lp = stats::log_norm_cdf(-20.0);
  REQUIRE(std::isfinite(lp));
  REQUIRE(lp == Catch::Approx(-203.9172).epsilon(1e-4));
  REQUIRE(std::isfinite(stats::log_norm_cdf(-200.0)));
}

TEST_CASE("digamma against reference values") {
  REQUIRE(stats::digamma(1.0) == Catch::Approx(-0.57721566490153286).epsilon(1e-13));
  REQUIRE(stats::digamma(0.5) == Catch::Approx(-1.9635100260214235).epsilon(1e-13));
  REQUIRE(stats::digamma(7.25) == Catch::Approx(stats::digamma(6.25) + 1.0 / 6.25).epsilon(1e-13));
  REQUIRE(stats::digamma(100.0) == Catch::Approx(4.60016185273808740).epsilon(1e-13));
}

TEST_CASE("incomplete gamma and its quantile") {
  REQUIRE(stats::gamma_p(1.0, 1.0) == Catch::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  REQUIRE(stats::gamma_p(3.5, 2.0) + stats::gamma_q(3.5, 2.0) == Catch::Approx(1.0).margin(1e-14));
  for (double p : {0.025, 0.5, 0.975})
    for (double a : {0.5, 2.0, 37.0}) {
      const double x = stats::gamma_quantile(a, 1.0, p);
      REQUIRE(stats::gamma_p(a, x) == Catch::Approx(p).epsilon(1e-8));
    }
  // rate scaling
  REQUIRE(stats::gamma_quantile(2.0, 4.0, 0.3) == Catch::Approx(stats::gamma_quantile(2.0, 1.0, 0.3) / 4.0).epsilon(1e-10));
}

TEST_CASE("poisson tail") {
  REQUIRE(stats::poisson_sf(-1.0, 3.0) == 1.0);
  REQUIRE(stats::poisson_sf(0.0, 3.0) == Catch::Approx(1.0 - std::exp(-3.0)).epsilon(1e-12));
  REQUIRE(stats::poisson_sf(2.0, 2.0) ==
          Catch::Approx(1.0 - std::exp(-2.0) * (1.0 + 2.0 + 2.0)).epsilon(1e-12));
}

TEST_CASE("rng moments and determinism") {
  Rng a(42), b(42);
  for (int i = 0; i < 5; ++i) REQUIRE(a.uniform() == b.uniform());

  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  REQUIRE(sum / n == Catch::Approx(0.0).margin(0.01));
  REQUIRE(sum2 / n == Catch::Approx(1.0).margin(0.02));

  double gsum = 0.0;
  for (int i = 0; i < n; ++i) gsum += rng.gamma(3.0, 2.0);
  REQUIRE(gsum / n == Catch::Approx(1.5).margin(0.015));

  double psum = 0.0;
  for (int i = 0; i < n; ++i) psum += double(rng.poisson(4.2));
  REQUIRE(psum / n == Catch::Approx(4.2).margin(0.05));
}

TEST_CASE("truncated normal stays above the cut and matches the tail mean") {
  Rng rng(11);
  const double mean = 1.0, sd = 2.0, lower = 2.5;
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.truncated_normal_lower(mean, sd, lower);
    REQUIRE(x >= lower);
    sum += x;
  }
  const double alpha = (lower - mean) / sd;
  const double expected = mean + sd * stats::norm_pdf(alpha) / stats::norm_sf(alpha);
  REQUIRE(sum / n == Catch::Approx(expected).margin(0.02));

  // extreme cut: clamped tail keeps the draw finite and above the cut
  const double far = rng.truncated_normal_lower(0.0, 1.0, 40.0);
  REQUIRE(std::isfinite(far));
  REQUIRE(far >= 40.0);
}

TEST_CASE("substreams are decorrelated and reproducible") {
  Rng root(123);
  Rng s1 = root.substream(1), s1b = Rng(123).substream(1), s2 = root.substream(2);
  REQUIRE(s1.uniform() == s1b.uniform());
  REQUIRE(s1.uniform() != s2.uniform());
}
