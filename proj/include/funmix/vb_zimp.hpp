#pragma once

// Coordinate-ascent variational inference for the zero-inflated mixture of
// two Poissons: multinomial responsibilities, gamma factors for both rates,
// and two linearized Gaussian coefficient blocks. The softmax log-normalizer
// expectation in the bound reduces to a two-dimensional Gaussian quadrature
// because the two coefficient blocks are independent under the variational
// family.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "funmix/config.hpp"
#include "funmix/gibbs_zimp.hpp"
#include "funmix/glm.hpp"
#include "funmix/quadrature.hpp"
#include "funmix/stats.hpp"
#include "funmix/vb_normal.hpp"

namespace funmix {

struct VBZimpState {
  Eigen::MatrixXd alpha;  // n x 3, rows sum to 1
  double psi1 = 1.0, zeta1 = 1.0;
  double psi2 = 1.0, zeta2 = 1.0;
  Eigen::VectorXd beta1_mean, beta2_mean;
  Eigen::MatrixXd beta1_cov, beta2_cov;
  std::vector<double> elbo_history;
  bool converged = false;
  int sweeps = 0;
  double wallclock_sec = 0.0;
};

class ZimpCavi {
 public:
  ZimpCavi(Eigen::VectorXd y, Eigen::MatrixXd x, ZimpPrior prior, CaviConfig cfg = {})
      : y_(std::move(y)), x_(std::move(x)), prior_(std::move(prior)), cfg_(cfg), std_(x_) {
    if (y_.size() != x_.rows()) throw std::invalid_argument("ZimpCavi: y/x size mismatch");
    for (Eigen::Index i = 0; i < y_.size(); ++i)
      if (y_[i] < 0.0 || y_[i] != std::floor(y_[i]))
        throw std::invalid_argument("ZimpCavi: responses must be nonnegative integers");
    prior_.coef_prior1.validate();
    prior_.coef_prior2.validate();
    init();
  }

  VBZimpState& state() { return state_; }
  const VBZimpState& state() const { return state_; }

  void init() {
    const Eigen::Index n = y_.size();
    const double split = positive_split_threshold(y_);
    state_.alpha = Eigen::MatrixXd::Zero(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (y_[i] == 0.0) {
        state_.alpha(i, 0) = 1.0 - 2.0 * kAlphaClip;
        state_.alpha(i, 1) = state_.alpha(i, 2) = kAlphaClip;
      } else if (y_[i] <= split) {
        state_.alpha(i, 1) = 1.0 - kAlphaClip;
        state_.alpha(i, 2) = kAlphaClip;
      } else {
        state_.alpha(i, 2) = 1.0 - kAlphaClip;
        state_.alpha(i, 1) = kAlphaClip;
      }
    }
    update_lambdas();
    // rate ordering at initialization only; sweeps preserve it in practice
    if (state_.psi1 / state_.zeta1 > state_.psi2 / state_.zeta2) {
      std::swap(state_.psi1, state_.psi2);
      std::swap(state_.zeta1, state_.zeta2);
      state_.alpha.col(1).swap(state_.alpha.col(2));
    }
    state_.beta1_mean = prior_.coef_prior1.location;
    state_.beta2_mean = prior_.coef_prior2.location;
    state_.beta1_cov = prior_.coef_prior1.current_scales.asDiagonal();
    state_.beta2_cov = prior_.coef_prior2.current_scales.asDiagonal();
    state_.elbo_history.clear();
    state_.converged = false;
    state_.sweeps = 0;
  }

  void update_alpha() {
    const double el1 = state_.psi1 / state_.zeta1, el2 = state_.psi2 / state_.zeta2;
    const double elog1 = stats::digamma(state_.psi1) - std::log(state_.zeta1);
    const double elog2 = stats::digamma(state_.psi2) - std::log(state_.zeta2);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      std::array<double, 3> lw;
      lw[0] = y_[i] == 0.0 ? 0.0 : neg_inf;
      lw[1] = -el1 + y_[i] * elog1 + x_.row(i).dot(state_.beta1_mean);
      lw[2] = -el2 + y_[i] * elog2 + x_.row(i).dot(state_.beta2_mean);
      auto p = normalize_log_weights(lw);
      // clip the populated entries away from 0/1, keep the row on the simplex
      if (y_[i] == 0.0) {
        for (int l = 0; l < 3; ++l) p[l] = std::clamp(p[l], kAlphaClip, 1.0 - kAlphaClip);
        const double total = p[0] + p[1] + p[2];
        for (int l = 0; l < 3; ++l) p[l] /= total;
      } else {
        p[1] = std::clamp(p[1], kAlphaClip, 1.0 - kAlphaClip);
        p[2] = 1.0 - p[1];
        p[0] = 0.0;
      }
      for (int l = 0; l < 3; ++l) state_.alpha(i, l) = p[l];
    }
  }

  void update_lambdas() {
    state_.psi1 = prior_.a1 + state_.alpha.col(1).dot(y_);
    state_.zeta1 = prior_.b1 + state_.alpha.col(1).sum();
    state_.psi2 = prior_.a2 + state_.alpha.col(2).dot(y_);
    state_.zeta2 = prior_.b2 + state_.alpha.col(2).sum();
  }

  void update_betas() {
    const Eigen::Index n = y_.size();
    const Eigen::MatrixXd& xs = std_.standardized();
    Eigen::VectorXd psi1(n), w1(n), psi2(n), w2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta1 = x_.row(i).dot(state_.beta1_mean), eta2 = x_.row(i).dot(state_.beta2_mean);
      const auto p = class_probs(eta1, eta2);
      psi1[i] = pseudo_data_multilogit(eta1, p[1], state_.alpha(i, 1));
      w1[i] = irls_weight(p[1], LinkKind::logit);
      psi2[i] = pseudo_data_multilogit(eta2, p[2], state_.alpha(i, 2));
      w2[i] = irls_weight(p[2], LinkKind::logit);
    }
    const auto post1 = beta_posterior(xs, psi1, w1, prior_.coef_prior1);
    state_.beta1_mean = std_.to_raw(post1.mean);
    state_.beta1_cov = std_.cov_to_raw(post1.covariance);
    const auto post2 = beta_posterior(xs, psi2, w2, prior_.coef_prior2);
    state_.beta2_mean = std_.to_raw(post2.mean);
    state_.beta2_cov = std_.cov_to_raw(post2.covariance);
  }

  // E log(1 + exp(x_i'b1) + exp(x_i'b2)) under the two independent blocks.
  // Same tensor rule as gauss_integral_2d, with log(1 + e^u) hoisted out of
  // the inner loop so each node pair costs one exp and one log1p.
  double log_normalizer_expectation(Eigen::Index i) const {
    const Eigen::VectorXd xi = x_.row(i).transpose();
    const double m1 = xi.dot(state_.beta1_mean), m2 = xi.dot(state_.beta2_mean);
    const double v1 = std::max(xi.dot(state_.beta1_cov * xi), 0.0);
    const double v2 = std::max(xi.dot(state_.beta2_cov * xi), 0.0);
    const auto& rule = default_gh_rule();
    const std::size_t nodes = rule.nodes.size();
    const double s1 = std::sqrt(2.0 * v1), s2 = std::sqrt(2.0 * v2);
    double acc = 0.0;
    for (std::size_t a = 0; a < nodes; ++a) {
      const double u = m1 + s1 * rule.nodes[a];
      // log(1 + e^u), stable in both tails
      const double log_a = u >= 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
      double inner = 0.0;
      for (std::size_t b = 0; b < nodes; ++b) {
        const double v = m2 + s2 * rule.nodes[b];
        const double hi = std::max(log_a, v), lo = std::min(log_a, v);
        inner += rule.weights[b] * (hi + std::log1p(std::exp(lo - hi)));
      }
      acc += rule.weights[a] * inner;
    }
    return acc / std::numbers::pi_v<double>;
  }

  ElboPieces elbo_pieces() const {
    const Eigen::Index n = y_.size();
    ElboPieces p;
    const double el1 = state_.psi1 / state_.zeta1, el2 = state_.psi2 / state_.zeta2;
    const double elog1 = stats::digamma(state_.psi1) - std::log(state_.zeta1);
    const double elog2 = stats::digamma(state_.psi2) - std::log(state_.zeta2);

    for (Eigen::Index i = 0; i < n; ++i) {
      const double a1 = state_.alpha(i, 1), a2 = state_.alpha(i, 2);
      const double lf = stats::log_factorial(long(y_[i]));
      p.e0 += a1 * (-el1 + y_[i] * elog1 - lf) + a2 * (-el2 + y_[i] * elog2 - lf);
      p.e1 += a1 * x_.row(i).dot(state_.beta1_mean) + a2 * x_.row(i).dot(state_.beta2_mean) -
              log_normalizer_expectation(i);
    }

    p.e2 = -std::lgamma(prior_.a1) + prior_.a1 * std::log(prior_.b1) + (prior_.a1 - 1.0) * elog1 -
           prior_.b1 * el1;
    p.e3 = -std::lgamma(prior_.a2) + prior_.a2 * std::log(prior_.b2) + (prior_.a2 - 1.0) * elog2 -
           prior_.b2 * el2;
    // coefficient factors on the standardized scale where the prior lives
    const Eigen::VectorXd m1_std = std_.to_std(state_.beta1_mean);
    const Eigen::VectorXd m2_std = std_.to_std(state_.beta2_mean);
    const Eigen::MatrixXd c1_std = std_.cov_to_std(state_.beta1_cov);
    const Eigen::MatrixXd c2_std = std_.cov_to_std(state_.beta2_cov);
    p.e4 = gaussian_prior_expectation(m1_std, c1_std, prior_.coef_prior1);
    p.e5 = gaussian_prior_expectation(m2_std, c2_std, prior_.coef_prior2);

    for (Eigen::Index i = 0; i < n; ++i)
      for (int l = 0; l < 3; ++l) {
        const double a = state_.alpha(i, l);
        if (a > 0.0) p.f1 += a * std::log(a);
      }
    p.f2 = -std::lgamma(state_.psi1) + state_.psi1 * std::log(state_.zeta1) +
           (state_.psi1 - 1.0) * elog1 - state_.psi1;
    p.f3 = -std::lgamma(state_.psi2) + state_.psi2 * std::log(state_.zeta2) +
           (state_.psi2 - 1.0) * elog2 - state_.psi2;
    p.f4 = gaussian_entropy_negative(c1_std);
    p.f5 = gaussian_entropy_negative(c2_std);

    for (double v : {p.e0, p.e1, p.e2, p.e3, p.e4, p.e5, p.f1, p.f2, p.f3, p.f4, p.f5})
      if (!std::isfinite(v)) throw std::runtime_error("elbo: non-finite piece");
    return p;
  }

  double elbo() const { return elbo_pieces().total(); }

  // One full sweep; the two linearized coefficient moves are damped toward
  // the previous parameters whenever they would lower the bound.
  double sweep_once() {
    update_alpha();
    update_lambdas();
    if (cfg_.em_refresh) {
      em_scale_update(state_.beta1_mean, prior_.coef_prior1);
      em_scale_update(state_.beta2_mean, prior_.coef_prior2);
    }
    const double pre = elbo();
    const Eigen::VectorXd old_m1 = state_.beta1_mean, old_m2 = state_.beta2_mean;
    const Eigen::MatrixXd old_c1 = state_.beta1_cov, old_c2 = state_.beta2_cov;
    update_betas();
    const Eigen::VectorXd new_m1 = state_.beta1_mean, new_m2 = state_.beta2_mean;
    const Eigen::MatrixXd new_c1 = state_.beta1_cov, new_c2 = state_.beta2_cov;
    double bound = elbo();
    double step = 1.0;
    while (bound < pre && step > 1.0 / 64.0) {
      step *= 0.5;
      state_.beta1_mean = old_m1 + step * (new_m1 - old_m1);
      state_.beta2_mean = old_m2 + step * (new_m2 - old_m2);
      state_.beta1_cov = old_c1 + step * (new_c1 - old_c1);
      state_.beta2_cov = old_c2 + step * (new_c2 - old_c2);
      bound = elbo();
    }
    if (bound < pre) {
      state_.beta1_mean = old_m1;
      state_.beta2_mean = old_m2;
      state_.beta1_cov = old_c1;
      state_.beta2_cov = old_c2;
      bound = elbo();
    }
    return bound;
  }

  VBZimpState run() {
    const auto start = std::chrono::steady_clock::now();
    double prev = elbo();  // initial-state baseline
    for (int sweep = 1; sweep <= cfg_.max_sweeps; ++sweep) {
      const double bound = sweep_once();
      state_.elbo_history.push_back(bound);
      state_.sweeps = sweep;
      if (std::fabs(bound - prev) < cfg_.tol * std::max(1.0, std::fabs(prev))) {
        state_.converged = true;
        break;
      }
      prev = bound;
    }
    state_.wallclock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return state_;
  }

 private:
  // E_q[log N(beta; mu_b, S)] with S the diagonal prior.
  static double gaussian_prior_expectation(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                           const CoefPrior& prior) {
    const Eigen::Index d = mean.size();
    double logdet = 0.0, trace = 0.0, quad = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      logdet += std::log(prior.current_scales[k]);
      trace += cov(k, k) / prior.current_scales[k];
      const double c = mean[k] - prior.location[k];
      quad += c * c / prior.current_scales[k];
    }
    return -0.5 * double(d) * stats::log_2pi - 0.5 * logdet - 0.5 * trace - 0.5 * quad;
  }

  // E_q[log q(beta)] for the Gaussian factor.
  static double gaussian_entropy_negative(const Eigen::MatrixXd& cov) {
    const Eigen::Index d = cov.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw std::runtime_error("elbo: coefficient covariance not SPD");
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) logdet += 2.0 * std::log(llt.matrixL()(k, k));
    return -0.5 * double(d) * stats::log_2pi - 0.5 * logdet - 0.5 * double(d);
  }

  Eigen::VectorXd y_;
  Eigen::MatrixXd x_;
  ZimpPrior prior_;
  CaviConfig cfg_;
  DesignStandardizer std_;
  VBZimpState state_;
};

}  // namespace funmix
