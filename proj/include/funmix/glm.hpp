#pragma once

// The prior-regularized weighted-least-squares step shared by the samplers
// and the variational engines: IRLS pseudo-data and weights for a binary
// link, the Gaussian full conditional of the coefficient block, and the
// approximate-EM refresh of per-coefficient t-prior scales.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "funmix/rng.hpp"
#include "funmix/stats.hpp"

namespace funmix {

enum class LinkKind { logit, probit };

inline constexpr double kProbClip = 1e-8;

// inner IRLS refinement inside each Gibbs sweep
inline constexpr int kIrlsInnerMax = 25;
inline constexpr double kIrlsInnerTol = 1e-4;

inline double clip_prob(double p) {
  return std::clamp(p, kProbClip, 1.0 - kProbClip);
}

inline double link_g(double p, LinkKind link) {
  p = clip_prob(p);
  switch (link) {
    case LinkKind::logit: return std::log(p / (1.0 - p));
    case LinkKind::probit: return stats::norm_quantile(p);
  }
  return 0.0;
}

inline double link_dg(double p, LinkKind link) {
  p = clip_prob(p);
  switch (link) {
    case LinkKind::logit: return 1.0 / (p * (1.0 - p));
    case LinkKind::probit: return 1.0 / stats::norm_pdf(stats::norm_quantile(p));
  }
  return 0.0;
}

inline double link_inv(double eta, LinkKind link) {
  switch (link) {
    case LinkKind::logit: return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case LinkKind::probit: return stats::norm_cdf(eta);
  }
  return 0.0;
}

// log g^{-1}(eta), stable in both tails.
inline double log_link_inv(double eta, LinkKind link) {
  switch (link) {
    case LinkKind::logit: return eta >= 0.0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
    case LinkKind::probit: return stats::log_norm_cdf(eta);
  }
  return 0.0;
}

inline double log_one_minus_link_inv(double eta, LinkKind link) {
  switch (link) {
    case LinkKind::logit: return eta >= 0.0 ? -eta - std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
    case LinkKind::probit: return stats::log_norm_cdf(-eta);
  }
  return 0.0;
}

// Student-t prior on each coefficient, kept as a scale-mixture of normals:
// current_scales holds the working per-coefficient normal variances that the
// approximate EM step refreshes. df = +inf is the fixed Gaussian case.
struct CoefPrior {
  Eigen::VectorXd location;       // mu_b
  double df = 7.0;                // nu; +inf for Gaussian
  Eigen::VectorXd scale;          // s_d, per coefficient
  Eigen::VectorXd current_scales; // sigma_d^2, EM state

  static CoefPrior gaussian(int dim, double s) {
    CoefPrior prior;
    prior.location = Eigen::VectorXd::Zero(dim);
    prior.df = std::numeric_limits<double>::infinity();
    prior.scale = Eigen::VectorXd::Constant(dim, s);
    prior.current_scales = prior.scale.array().square();
    return prior;
  }

  static CoefPrior student_t(int dim, double nu, double s) {
    CoefPrior prior = gaussian(dim, s);
    prior.df = nu;
    return prior;
  }

  void validate() const {
    if (location.size() != scale.size() || scale.size() != current_scales.size())
      throw std::invalid_argument("CoefPrior: dimension mismatch");
    if (df < 1.0) throw std::invalid_argument("CoefPrior: df < 1");
    if ((scale.array() <= 0.0).any() || (current_scales.array() <= 0.0).any())
      throw std::invalid_argument("CoefPrior: nonpositive scale");
  }
};

struct BetaPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// psi = g(p) + (target - p) g'(p). `target` is a hard label in the Gibbs
// samplers and a responsibility in the variational engines.
inline double pseudo_data(double p_hat, double target, LinkKind link) {
  const double p = clip_prob(p_hat);
  return link_g(p, link) + (target - p) * link_dg(p, link);
}

// W = 1 / [ g'(p)^2 V(p) ], V(p) = p(1-p).
inline double irls_weight(double p_hat, LinkKind link) {
  const double p = clip_prob(p_hat);
  const double dg = link_dg(p, link);
  return 1.0 / (dg * dg * p * (1.0 - p));
}

// Working response for one class block of a baseline-logit (multinomial)
// model. The class probability depends on every block, so the
// linearization anchors at the block's current linear predictor; anchoring
// at the binary logit of p_hat would shift the score away from the
// multinomial estimating equations whenever more than two classes exist.
inline double pseudo_data_multilogit(double eta_anchor, double p_hat, double target) {
  const double p = clip_prob(p_hat);
  return eta_anchor + (target - p) * link_dg(p, LinkKind::logit);
}

// Normal full conditional of the coefficient block given pseudo-data psi and
// diagonal weights W: covariance (x'Wx + S^-1)^-1, mean covariance(x'W psi
// + S^-1 mu_b), S = diag(current_scales).
inline BetaPosterior beta_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& psi,
                                    const Eigen::VectorXd& weights, const CoefPrior& prior) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (psi.size() != n || weights.size() != n || prior.location.size() != d)
    throw std::invalid_argument("beta_posterior: dimension mismatch");
  Eigen::MatrixXd precision = x.transpose() * weights.asDiagonal() * x;
  precision.diagonal() += prior.current_scales.cwiseInverse();
  Eigen::VectorXd rhs = x.transpose() * (weights.array() * psi.array()).matrix() +
                        (prior.location.array() / prior.current_scales.array()).matrix();
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(precision);
    Eigen::Index bad = 0;
    ldlt.vectorD().minCoeff(&bad);
    throw std::runtime_error("beta_posterior: normal-equation matrix not positive definite near coefficient " +
                             std::to_string(bad));
  }
  BetaPosterior post;
  post.mean = llt.solve(rhs);
  post.covariance = llt.solve(Eigen::MatrixXd::Identity(d, d));
  // symmetrize the numeric inverse
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  return post;
}

// Approximate EM refresh of the scale-mixture variances:
// sigma_d^2 <- (beta_d^2 + nu s^2) / (1 + nu). No-op for the Gaussian prior.
inline void em_scale_update(const Eigen::VectorXd& beta_hat, CoefPrior& prior) {
  if (std::isinf(prior.df)) return;
  for (Eigen::Index d = 0; d < beta_hat.size(); ++d) {
    const double centered = beta_hat[d] - prior.location[d];
    const double s2 = prior.scale[d] * prior.scale[d];
    prior.current_scales[d] = (centered * centered + prior.df * s2) / (1.0 + prior.df);
  }
}

// Weakly informative priors assume standardized predictors: non-intercept
// columns are centered and scaled to sd 1/2 before the prior applies, and
// fitted coefficients map back to the raw scale through the affine
// transform. Without the centering, a coefficient on a large-mean column
// acts as a hidden intercept and prior-scale draws shift every linear
// predictor at once.
class DesignStandardizer {
 public:
  explicit DesignStandardizer(const Eigen::MatrixXd& x_raw)
      : center_(Eigen::VectorXd::Zero(x_raw.cols())), scale_(Eigen::VectorXd::Ones(x_raw.cols())) {
    x_std_ = x_raw;
    for (Eigen::Index d = 1; d < x_raw.cols(); ++d) {
      const double mean = x_raw.col(d).mean();
      const double sd = std::sqrt((x_raw.col(d).array() - mean).square().sum() / double(x_raw.rows()));
      if (sd > 0.0) {
        center_[d] = mean;
        scale_[d] = 0.5 / sd;
        x_std_.col(d) = (x_raw.col(d).array() - mean) * scale_[d];
      }
    }
  }

  const Eigen::MatrixXd& standardized() const { return x_std_; }

  // beta_raw = T beta_std with T[0,d] = -scale_d center_d, T[d,d] = scale_d
  Eigen::VectorXd to_raw(const Eigen::VectorXd& beta_std) const {
    Eigen::VectorXd raw = beta_std;
    for (Eigen::Index d = 1; d < beta_std.size(); ++d) {
      raw[d] = beta_std[d] * scale_[d];
      raw[0] -= beta_std[d] * scale_[d] * center_[d];
    }
    return raw;
  }

  Eigen::VectorXd to_std(const Eigen::VectorXd& beta_raw) const {
    Eigen::VectorXd std_coef = beta_raw;
    for (Eigen::Index d = 1; d < beta_raw.size(); ++d) {
      std_coef[d] = beta_raw[d] / scale_[d];
      std_coef[0] += beta_raw[d] * center_[d];
    }
    return std_coef;
  }

  Eigen::MatrixXd cov_to_raw(const Eigen::MatrixXd& cov_std) const {
    const Eigen::Index d = cov_std.rows();
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index k = 1; k < d; ++k) {
      t(k, k) = scale_[k];
      t(0, k) = -scale_[k] * center_[k];
    }
    return t * cov_std * t.transpose();
  }

  Eigen::MatrixXd cov_to_std(const Eigen::MatrixXd& cov_raw) const {
    const Eigen::Index d = cov_raw.rows();
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(d, d);  // inverse map
    for (Eigen::Index k = 1; k < d; ++k) {
      t(k, k) = 1.0 / scale_[k];
      t(0, k) = center_[k];
    }
    return t * cov_raw * t.transpose();
  }

 private:
  Eigen::MatrixXd x_std_;
  Eigen::VectorXd center_, scale_;
};

inline Eigen::VectorXd sample_beta(const BetaPosterior& post, Rng& rng) {
  const Eigen::Index d = post.mean.size();
  if (post.covariance.norm() == 0.0) return post.mean;
  Eigen::LLT<Eigen::MatrixXd> llt(post.covariance);
  Eigen::MatrixXd root;
  if (llt.info() == Eigen::Success) {
    root = llt.matrixL();
  } else {
    // semidefinite fallback via LDLT with clamped diagonal
    Eigen::LDLT<Eigen::MatrixXd> ldlt(post.covariance);
    Eigen::VectorXd sqrt_d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    root = ldlt.transpositionsP().transpose() *
           (Eigen::MatrixXd(ldlt.matrixL()) * sqrt_d.asDiagonal());
  }
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
  return post.mean + root * z;
}

}  // namespace funmix
