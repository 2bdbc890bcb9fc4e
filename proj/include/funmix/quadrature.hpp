#pragma once

// Gauss-Hermite quadrature and the rotation trick that reduces Gaussian
// expectations of ridge functions E[F(x'b)], b ~ N(mu, Sigma), to one- and
// two-dimensional integrals: after rotating the first coordinate onto
// x/||x||, x'b is univariate Gaussian with mean x'mu and variance x'Sigma x,
// so only that marginal is integrated.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace funmix {

struct GaussHermiteRule {
  std::vector<double> nodes;    // roots of H_n
  std::vector<double> weights;  // sum to sqrt(pi)
};

// Golub-Welsch on the Hermite Jacobi matrix (weight exp(-t^2)).
inline GaussHermiteRule gauss_hermite_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_rule: n < 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double sqrt_pi = std::sqrt(std::numbers::pi_v<double>);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = sqrt_pi * v0 * v0;
  }
  return rule;
}

inline constexpr int kGaussHermiteNodes = 64;

inline const GaussHermiteRule& default_gh_rule() {
  static const GaussHermiteRule rule = gauss_hermite_rule(kGaussHermiteNodes);
  return rule;
}

namespace detail {

inline double ridge_mean(const Eigen::VectorXd& x, const Eigen::VectorXd& mu) { return x.dot(mu); }

inline double ridge_var(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma) {
  const double v = x.dot(sigma * x);
  return v > 0.0 ? v : 0.0;
}

}  // namespace detail

// E[F(x'b)] for b ~ N(mu, Sigma). A zero x makes the argument constant.
template <typename F>
double gauss_integral_1d(F&& f, const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& sigma) {
  const double m = detail::ridge_mean(x, mu);
  const double v = detail::ridge_var(x, sigma);
  if (v == 0.0) return f(m);
  const auto& rule = default_gh_rule();
  const double scale = std::sqrt(2.0 * v);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi_v<double>);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(m + scale * rule.nodes[i]);
  return acc * inv_sqrt_pi;
}

// Two expectations sharing the same Gaussian argument in one pass.
template <typename F0, typename F1>
std::pair<double, double> gauss_integral_1d_pair(F0&& f0, F1&& f1, const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  const double m = detail::ridge_mean(x, mu);
  const double v = detail::ridge_var(x, sigma);
  if (v == 0.0) return {f0(m), f1(m)};
  const auto& rule = default_gh_rule();
  const double scale = std::sqrt(2.0 * v);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi_v<double>);
  double a0 = 0.0, a1 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = m + scale * rule.nodes[i];
    a0 += rule.weights[i] * f0(u);
    a1 += rule.weights[i] * f1(u);
  }
  return {a0 * inv_sqrt_pi, a1 * inv_sqrt_pi};
}

// E[F(x'b1, x'b2)] for independent b1 ~ N(mu1, Sigma1), b2 ~ N(mu2, Sigma2);
// nested rotations give a tensor Gauss-Hermite grid over the two marginals.
template <typename F>
double gauss_integral_2d(F&& f, const Eigen::VectorXd& x, const Eigen::VectorXd& mu1,
                         const Eigen::MatrixXd& sigma1, const Eigen::VectorXd& mu2,
                         const Eigen::MatrixXd& sigma2) {
  const double m1 = detail::ridge_mean(x, mu1);
  const double v1 = detail::ridge_var(x, sigma1);
  const double m2 = detail::ridge_mean(x, mu2);
  const double v2 = detail::ridge_var(x, sigma2);
  const auto& rule = default_gh_rule();
  const double inv_pi = 1.0 / std::numbers::pi_v<double>;
  if (v1 == 0.0 && v2 == 0.0) return f(m1, m2);
  if (v1 == 0.0) {
    return gauss_integral_1d([&](double u2) { return f(m1, u2); }, x, mu2, sigma2);
  }
  if (v2 == 0.0) {
    return gauss_integral_1d([&](double u1) { return f(u1, m2); }, x, mu1, sigma1);
  }
  const double s1 = std::sqrt(2.0 * v1), s2 = std::sqrt(2.0 * v2);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u1 = m1 + s1 * rule.nodes[i];
    double inner = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
      inner += rule.weights[j] * f(u1, m2 + s2 * rule.nodes[j]);
    acc += rule.weights[i] * inner;
  }
  return acc * inv_pi;
}

}  // namespace funmix
