#pragma once

// Coordinate-ascent variational inference for the two-component normal
// mixture: Bernoulli responsibilities, Gaussian factors for the component
// means, an inverse-gamma factor for the common variance, and a Gaussian
// coefficient block updated by the same weighted-least-squares
// linearization the sampler uses, anchored at the previous sweep's mean.
// The evidence lower bound is assembled from closed-form pieces; the two
// membership expectations per subject reduce to one-dimensional Gaussian
// quadrature.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "funmix/config.hpp"
#include "funmix/glm.hpp"
#include "funmix/quadrature.hpp"
#include "funmix/stats.hpp"
#include "funmix/gibbs_normal.hpp"

namespace funmix {

inline constexpr double kAlphaClip = 1e-10;

struct VBNormalState {
  Eigen::VectorXd alpha;
  double m0 = 0.0, s0_sq = 1.0;
  double m1 = 1.0, s1_sq = 1.0;
  double A0 = 1.0, B0 = 1.0;
  Eigen::VectorXd beta_mean;
  Eigen::MatrixXd beta_cov;
  std::vector<double> elbo_history;
  bool converged = false;
  int sweeps = 0;
  double wallclock_sec = 0.0;
};

struct ElboPieces {
  double e0 = 0, e1 = 0, e2 = 0, e3 = 0, e4 = 0, e5 = 0;
  double f1 = 0, f2 = 0, f3 = 0, f4 = 0, f5 = 0;
  double total() const { return e0 + e1 + e2 + e3 + e4 + e5 - f1 - f2 - f3 - f4 - f5; }
};

class NormalCavi {
 public:
  NormalCavi(Eigen::VectorXd y, Eigen::MatrixXd x, NormalPrior prior, CaviConfig cfg = {})
      : y_(std::move(y)), x_(std::move(x)), prior_(std::move(prior)), cfg_(cfg), std_(x_) {
    if (y_.size() != x_.rows()) throw std::invalid_argument("NormalCavi: y/x size mismatch");
    if (prior_.coef_prior.location.size() != x_.cols())
      throw std::invalid_argument("NormalCavi: coefficient prior dimension mismatch");
    prior_.coef_prior.validate();
    init();
  }

  VBNormalState& state() { return state_; }
  const VBNormalState& state() const { return state_; }
  const CoefPrior& coef_prior() const { return prior_.coef_prior; }

  void init() {
    const Eigen::Index n = y_.size();
    std::vector<double> sorted(y_.data(), y_.data() + n);
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double median = n ? sorted[n / 2] : 0.0;
    state_.alpha.resize(n);
    double s0 = 0.0, s1 = 0.0;
    long n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool hi = y_[i] > median;
      state_.alpha[i] = hi ? 1.0 - kAlphaClip : kAlphaClip;
      (hi ? s1 : s0) += y_[i];
      (hi ? n1 : n0) += 1;
    }
    state_.m0 = n0 ? s0 / double(n0) : 0.0;
    state_.m1 = n1 ? s1 / double(n1) : state_.m0 + 1.0;
    state_.s0_sq = prior_.tau0_sq;
    state_.s1_sq = prior_.tau1_sq;
    double rss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = y_[i] - (y_[i] > median ? state_.m1 : state_.m0);
      rss += r * r;
    }
    state_.A0 = prior_.a0 + double(n) / 2.0;
    state_.B0 = prior_.b0 + 0.5 * std::max(rss, 1e-8);
    state_.beta_mean = prior_.coef_prior.location;
    state_.beta_cov = prior_.coef_prior.current_scales.asDiagonal();
    state_.elbo_history.clear();
    state_.converged = false;
    state_.sweeps = 0;
  }

  // E log p_i and E log(1 - p_i) under q(beta), one quadrature pass.
  std::pair<double, double> membership_log_expectations(Eigen::Index i) const {
    const Eigen::VectorXd xi = x_.row(i).transpose();
    const LinkKind link = prior_.link;
    return gauss_integral_1d_pair([link](double u) { return log_link_inv(u, link); },
                                  [link](double u) { return log_one_minus_link_inv(u, link); }, xi,
                                  state_.beta_mean, state_.beta_cov);
  }

  void update_alpha() {
    const double e_inv_sigma = state_.A0 / state_.B0;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      const auto [elogp, elog1mp] = membership_log_expectations(i);
      const double la1 =
          elogp - 0.5 * e_inv_sigma * ((y_[i] - state_.m1) * (y_[i] - state_.m1) + state_.s1_sq);
      const double la0 =
          elog1mp - 0.5 * e_inv_sigma * ((y_[i] - state_.m0) * (y_[i] - state_.m0) + state_.s0_sq);
      const double a = 1.0 / (1.0 + std::exp(la0 - la1));
      state_.alpha[i] = std::clamp(a, kAlphaClip, 1.0 - kAlphaClip);
    }
  }

  void update_means() {
    const double e_inv_sigma = state_.A0 / state_.B0;
    const double w1 = state_.alpha.sum(), w0 = double(y_.size()) - w1;
    const double sy1 = state_.alpha.dot(y_), sy0 = y_.sum() - sy1;
    state_.s1_sq = 1.0 / (e_inv_sigma * w1 + 1.0 / prior_.tau1_sq);
    state_.m1 = state_.s1_sq * e_inv_sigma * sy1;
    state_.s0_sq = 1.0 / (e_inv_sigma * w0 + 1.0 / prior_.tau0_sq);
    state_.m0 = state_.s0_sq * e_inv_sigma * sy0;
  }

  void update_sigma2() {
    const Eigen::Index n = y_.size();
    state_.A0 = prior_.a0 + double(n) / 2.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r1 = y_[i] - state_.m1, r0 = y_[i] - state_.m0;
      acc += state_.alpha[i] * (r1 * r1 + state_.s1_sq) + (1.0 - state_.alpha[i]) * (r0 * r0 + state_.s0_sq);
    }
    state_.B0 = prior_.b0 + 0.5 * acc;
  }

  void update_beta() {
    const Eigen::Index n = y_.size();
    const Eigen::MatrixXd& xs = std_.standardized();
    Eigen::VectorXd psi(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = link_inv(x_.row(i).dot(state_.beta_mean), prior_.link);
      psi[i] = pseudo_data(p, state_.alpha[i], prior_.link);
      w[i] = irls_weight(p, prior_.link);
    }
    const auto post = beta_posterior(xs, psi, w, prior_.coef_prior);
    state_.beta_mean = std_.to_raw(post.mean);
    state_.beta_cov = std_.cov_to_raw(post.covariance);
  }

  ElboPieces elbo_pieces() const {
    const Eigen::Index n = y_.size();
    const CoefPrior& cp = prior_.coef_prior;
    ElboPieces p;
    const double e_inv_sigma = state_.A0 / state_.B0;
    const double e_log_sigma = std::log(state_.B0) - stats::digamma(state_.A0);

    double quad = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r1 = y_[i] - state_.m1, r0 = y_[i] - state_.m0;
      quad += state_.alpha[i] * (r1 * r1 + state_.s1_sq) +
              (1.0 - state_.alpha[i]) * (r0 * r0 + state_.s0_sq);
    }
    p.e0 = -0.5 * double(n) * stats::log_2pi - 0.5 * e_inv_sigma * quad - 0.5 * double(n) * e_log_sigma;

    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [elogp, elog1mp] = membership_log_expectations(i);
      p.e1 += state_.alpha[i] * elogp + (1.0 - state_.alpha[i]) * elog1mp;
    }

    p.e2 = -0.5 * std::log(2.0 * std::numbers::pi * prior_.tau0_sq) -
           (state_.m0 * state_.m0 + state_.s0_sq) / (2.0 * prior_.tau0_sq);
    p.e3 = -0.5 * std::log(2.0 * std::numbers::pi * prior_.tau1_sq) -
           (state_.m1 * state_.m1 + state_.s1_sq) / (2.0 * prior_.tau1_sq);
    p.e4 = prior_.a0 * std::log(prior_.b0) - std::lgamma(prior_.a0) - (prior_.a0 + 1.0) * e_log_sigma -
           prior_.b0 * e_inv_sigma;

    // prior and entropy terms for the coefficient factor on the
    // standardized scale where the prior is defined
    const Eigen::Index d = x_.cols();
    const Eigen::VectorXd mean_std = std_.to_std(state_.beta_mean);
    const Eigen::MatrixXd cov_std = std_.cov_to_std(state_.beta_cov);
    Eigen::LLT<Eigen::MatrixXd> llt(cov_std);
    if (llt.info() != Eigen::Success) throw std::runtime_error("elbo: coefficient covariance not SPD");
    double logdet_v = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) logdet_v += 2.0 * std::log(llt.matrixL()(k, k));
    double logdet_prior = 0.0, trace_term = 0.0, quad_term = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      logdet_prior += std::log(cp.current_scales[k]);
      trace_term += cov_std(k, k) / cp.current_scales[k];
      const double c = mean_std[k] - cp.location[k];
      quad_term += c * c / cp.current_scales[k];
    }
    p.e5 = -0.5 * double(d) * stats::log_2pi - 0.5 * logdet_prior - 0.5 * trace_term - 0.5 * quad_term;

    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = state_.alpha[i];
      p.f1 += a * std::log(a) + (1.0 - a) * std::log(1.0 - a);
    }
    p.f2 = -0.5 * std::log(2.0 * std::numbers::pi * state_.s0_sq) - 0.5;
    p.f3 = -0.5 * std::log(2.0 * std::numbers::pi * state_.s1_sq) - 0.5;
    p.f4 = state_.A0 * std::log(state_.B0) - std::lgamma(state_.A0) - (state_.A0 + 1.0) * e_log_sigma -
           state_.A0;
    p.f5 = -0.5 * double(d) * stats::log_2pi - 0.5 * logdet_v - 0.5 * double(d);

    for (double v : {p.e0, p.e1, p.e2, p.e3, p.e4, p.e5, p.f1, p.f2, p.f3, p.f4, p.f5})
      if (!std::isfinite(v)) throw std::runtime_error("elbo: non-finite piece");
    return p;
  }

  double elbo() const { return elbo_pieces().total(); }

  // One full sweep. The three closed-form blocks are exact coordinate
  // ascent; the linearized coefficient step is not, so its move is damped
  // toward the previous parameters whenever it would lower the bound.
  double sweep_once() {
    update_alpha();
    update_means();
    update_sigma2();
    if (cfg_.em_refresh) em_scale_update(state_.beta_mean, prior_.coef_prior);
    const double pre = elbo();
    const Eigen::VectorXd old_mean = state_.beta_mean;
    const Eigen::MatrixXd old_cov = state_.beta_cov;
    update_beta();
    const Eigen::VectorXd new_mean = state_.beta_mean;
    const Eigen::MatrixXd new_cov = state_.beta_cov;
    double bound = elbo();
    double step = 1.0;
    while (bound < pre && step > 1.0 / 64.0) {
      step *= 0.5;
      state_.beta_mean = old_mean + step * (new_mean - old_mean);
      state_.beta_cov = old_cov + step * (new_cov - old_cov);
      bound = elbo();
    }
    if (bound < pre) {
      state_.beta_mean = old_mean;
      state_.beta_cov = old_cov;
      bound = elbo();
    }
    return bound;
  }

  VBNormalState run() {
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
  Eigen::VectorXd y_;
  Eigen::MatrixXd x_;
  NormalPrior prior_;
  CaviConfig cfg_;
  DesignStandardizer std_;
  VBNormalState state_;
};

}  // namespace funmix
