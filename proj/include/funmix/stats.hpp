#pragma once

// Scalar special functions shared across the samplers and the variational
// engines: normal pdf/cdf/quantile, digamma, regularized incomplete gamma
// and its inverse. All pure, double precision.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace funmix::stats {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
inline constexpr double log_2pi = 1.8378770664093454835606594;

inline double norm_pdf(double z) { return inv_sqrt_2pi * std::exp(-0.5 * z * z); }

inline double log_norm_pdf(double z) { return -0.5 * log_2pi - 0.5 * z * z; }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2_v<double> / 2.0); }

// Upper tail P(Z > z), accurate far into the tail.
inline double norm_sf(double z) { return 0.5 * std::erfc(z * std::numbers::sqrt2_v<double> / 2.0); }

// log Phi(z); asymptotic expansion below z = -8 where erfc underflows in
// relative terms long before it underflows absolutely.
inline double log_norm_cdf(double z) {
  if (z > -8.0) return std::log(norm_cdf(z));
  const double z2 = z * z;
  // Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8)
  const double series =
      1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
  return log_norm_pdf(z) - std::log(-z) + std::log(series);
}

// Wichura's AS241 (PPND16). Relative error ~1e-15 over (0,1).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_quantile: p outside (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

inline double digamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) throw std::domain_error("digamma: nonpositive integer");
  double result = 0.0;
  if (x < 0.0) {
    // reflection
    result = -std::numbers::pi_v<double> / std::tan(std::numbers::pi_v<double> * x);
    x = 1.0 - x;
  }
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

namespace detail {

// Series expansion of P(a,x), valid x < a+1.
inline double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x), valid x >= a+1 (modified Lentz).
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Regularized lower incomplete gamma P(a,x) = gamma(a,x)/Gamma(a).
inline double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? detail::gamma_p_series(a, x) : 1.0 - detail::gamma_q_cf(a, x);
}

inline double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

// Quantile of Gamma(shape a, rate b): smallest x with P(a, b x) = p.
inline double gamma_quantile(double a, double rate, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gamma_quantile: p outside (0,1)");
  // Wilson-Hilferty start, then bisection + Newton polish on z = rate*x.
  const double g = 1.0 / (9.0 * a);
  double z = a * std::pow(1.0 - g + norm_quantile(p) * std::sqrt(g), 3.0);
  if (!(z > 0.0)) z = a * 1e-3;
  double lo = 0.0, hi = z;
  while (gamma_p(a, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) break;
  }
  if (gamma_p(a, lo) > p) lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    z = 0.5 * (lo + hi);
    const double f = gamma_p(a, z) - p;
    if (f > 0.0) hi = z; else lo = z;
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi) / rate;
}

// log(k!) for the Poisson pieces; exact summation below 20, lgamma above.
inline double log_factorial(long k) {
  if (k < 0) throw std::domain_error("log_factorial: negative");
  if (k < 2) return 0.0;
  if (k < 20) {
    double s = 0.0;
    for (long j = 2; j <= k; ++j) s += std::log(double(j));
    return s;
  }
  return std::lgamma(double(k) + 1.0);
}

inline double poisson_log_pmf(long k, double lambda) {
  return -lambda + k * std::log(lambda) - log_factorial(k);
}

// P(Y > t) for Y ~ Poisson(lambda); direct pmf sum (desk-scale lambdas).
inline double poisson_sf(double t, double lambda) {
  if (t < 0.0) return 1.0;
  const long k = static_cast<long>(std::floor(t));
  double cdf = 0.0;
  for (long j = 0; j <= k; ++j) cdf += std::exp(poisson_log_pmf(j, lambda));
  return cdf > 1.0 ? 0.0 : 1.0 - cdf;
}

}  // namespace funmix::stats
