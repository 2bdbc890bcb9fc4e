#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "funmix/simulate.hpp"
#include "funmix/vb_zimp.hpp"

using namespace funmix;

namespace {

ZimpPrior gaussian_prior(int dim, double scale = 2.5) {
  ZimpPrior prior;
  prior.coef_prior1 = CoefPrior::gaussian(dim, scale);
  prior.coef_prior2 = CoefPrior::gaussian(dim, scale);
  return prior;
}

// Small fixed instance for the Monte Carlo piece oracles: one structural
// zero, three positive counts.
struct Fixture {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  ZimpPrior prior;
  ZimpCavi cavi;

  Fixture()
      : y((Eigen::VectorXd(4) << 0.0, 2.0, 3.0, 11.0).finished()),
        x((Eigen::MatrixXd(4, 2) << 1.0, -0.58834840541455671, 1.0, -0.39223227027637114, 1.0, 0.39223227027637114, 1.0, 0.58834840541455671).finished()),
        prior(gaussian_prior(2)),
        cavi(y, x, prior) {
    auto& st = cavi.state();
    st.alpha.setZero(4, 3);
    st.alpha.row(0) << 0.6, 0.3, 0.1;
    st.alpha.row(1) << 0.0, 0.8, 0.2;
    st.alpha.row(2) << 0.0, 0.55, 0.45;
    st.alpha.row(3) << 0.0, 0.05, 0.95;
    st.psi1 = 4.0;
    st.zeta1 = 2.0;
    st.psi2 = 18.0;
    st.zeta2 = 2.0;
    st.beta1_mean = (Eigen::VectorXd(2) << 0.3, -0.4).finished();
    st.beta2_mean = (Eigen::VectorXd(2) << -0.2, 0.6).finished();
    st.beta1_cov = (Eigen::MatrixXd(2, 2) << 0.5, 0.1, 0.1, 0.4).finished();
    st.beta2_cov = (Eigen::MatrixXd(2, 2) << 0.3, -0.05, -0.05, 0.6).finished();
  }
};

}  // namespace

TEST_CASE("update_alpha: zero indicator, symmetry, hand-computed plug-in") {
  Eigen::VectorXd y(2);
  y << 3.0, 0.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  ZimpCavi cavi(y, x, gaussian_prior(1));
  auto& st = cavi.state();
  st.psi1 = 5.0;
  st.zeta1 = 1.0;
  st.psi2 = 5.0;
  st.zeta2 = 1.0;
  st.beta1_mean.setZero();
  st.beta2_mean.setZero();
  cavi.update_alpha();
  REQUIRE(cavi.state().alpha(0, 0) == 0.0);
  REQUIRE(cavi.state().alpha(0, 1) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(cavi.state().alpha(0, 2) == Catch::Approx(0.5).margin(1e-12));

  // hand arithmetic: psi1 = 3, zeta1 = 1, psi2 = 9, zeta2 = 1, y = 2
  st.psi1 = 3.0;
  st.zeta1 = 1.0;
  st.psi2 = 9.0;
  st.zeta2 = 1.0;
  y[0] = 2.0;
  ZimpCavi c2(y, x, gaussian_prior(1));
  auto& s2 = c2.state();
  s2.psi1 = 3.0;
  s2.zeta1 = 1.0;
  s2.psi2 = 9.0;
  s2.zeta2 = 1.0;
  s2.beta1_mean.setZero();
  s2.beta2_mean.setZero();
  c2.update_alpha();
  const double l1 = -3.0 + 2.0 * stats::digamma(3.0);
  const double l2 = -9.0 + 2.0 * stats::digamma(9.0);
  const double oracle = std::exp(l1) / (std::exp(l1) + std::exp(l2));
  REQUIRE(c2.state().alpha(0, 1) == Catch::Approx(oracle).epsilon(1e-10));

  // rows stay on the simplex after every update
  for (Eigen::Index i = 0; i < 2; ++i)
    REQUIRE(c2.state().alpha.row(i).sum() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("update_lambdas: prior fallback, plug-in, flat-prior weighted mean") {
  Eigen::VectorXd y(3);
  y << 0.0, 3.0, 8.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
  ZimpPrior prior = gaussian_prior(1);
  prior.a1 = 1.7;
  prior.b1 = 0.9;
  ZimpCavi cavi(y, x, prior);
  auto& st = cavi.state();

  st.alpha.setZero(3, 3);
  st.alpha.col(2).setConstant(1.0 / 3.0);  // hand-built rows; only sums matter
  st.alpha(0, 0) = 2.0 / 3.0;
  st.alpha(1, 1) = 0.0;
  st.alpha(1, 2) = 1.0;
  cavi.update_lambdas();
  REQUIRE(st.psi1 == Catch::Approx(prior.a1).margin(1e-14));  // empty column 1
  REQUIRE(st.zeta1 == Catch::Approx(prior.b1).margin(1e-14));

  st.alpha.setZero(3, 3);
  st.alpha(1, 1) = 1.0;  // single subject, y = 3
  st.alpha(0, 0) = 1.0;
  st.alpha(2, 2) = 1.0;
  cavi.update_lambdas();
  REQUIRE(st.psi1 == Catch::Approx(prior.a1 + 3.0));
  REQUIRE(st.zeta1 == Catch::Approx(prior.b1 + 1.0));

  // vanishing priors: the variational mean is the weighted sample mean
  ZimpPrior flat = gaussian_prior(1);
  flat.a2 = 1e-10;
  flat.b2 = 1e-10;
  ZimpCavi c2(y, x, flat);
  auto& s2 = c2.state();
  s2.alpha.setZero(3, 3);
  s2.alpha(1, 2) = 0.4;
  s2.alpha(2, 2) = 0.8;
  c2.update_lambdas();
  const double expected = (0.4 * 3.0 + 0.8 * 8.0) / (0.4 + 0.8);
  REQUIRE(s2.psi2 / s2.zeta2 == Catch::Approx(expected).epsilon(1e-8));
}

TEST_CASE("update_betas: prior-dominated pull and dense-solve oracle") {
  Fixture f;
  const auto st_before = f.cavi.state();

  // oracle for the class-1 block
  Eigen::VectorXd psi1(4), w1(4);
  for (int i = 0; i < 4; ++i) {
    const double eta1 = f.x.row(i).dot(st_before.beta1_mean);
    const auto p = class_probs(eta1, f.x.row(i).dot(st_before.beta2_mean));
    psi1[i] = pseudo_data_multilogit(eta1, p[1], st_before.alpha(i, 1));
    w1[i] = irls_weight(p[1], LinkKind::logit);
  }
  const auto oracle = beta_posterior(f.x, psi1, w1, f.prior.coef_prior1);
  f.cavi.update_betas();
  REQUIRE((f.cavi.state().beta1_mean - oracle.mean).lpNorm<Eigen::Infinity>() < 1e-10);
  REQUIRE((f.cavi.state().beta1_cov - oracle.covariance).lpNorm<Eigen::Infinity>() < 1e-10);

  ZimpPrior tight = gaussian_prior(2, 1e-5);
  tight.coef_prior2.location << 0.15, -0.25;
  ZimpCavi pinned(f.y, f.x, tight);
  pinned.update_betas();
  REQUIRE((pinned.state().beta2_mean - tight.coef_prior2.location).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("elbo pieces match Monte Carlo estimates of their defining expectations") {
  Fixture f;
  const auto& st = f.cavi.state();
  const auto pieces = f.cavi.elbo_pieces();

  Rng rng(9090);
  const long samples = 1000000;
  Eigen::LLT<Eigen::MatrixXd> llt1(st.beta1_cov), llt2(st.beta2_cov);
  const Eigen::MatrixXd root1 = llt1.matrixL(), root2 = llt2.matrixL();

  double e0 = 0, e1 = 0, e2 = 0, e3 = 0, e4 = 0, e5 = 0, f1 = 0, f2 = 0, f3 = 0, f4 = 0, f5 = 0;
  for (long s = 0; s < samples; ++s) {
    const double lambda1 = rng.gamma(st.psi1, st.zeta1);
    const double lambda2 = rng.gamma(st.psi2, st.zeta2);
    Eigen::VectorXd z1(2), z2(2);
    z1 << rng.normal(), rng.normal();
    z2 << rng.normal(), rng.normal();
    const Eigen::VectorXd beta1 = st.beta1_mean + root1 * z1;
    const Eigen::VectorXd beta2 = st.beta2_mean + root2 * z2;

    for (int i = 0; i < 4; ++i) {
      const double u = rng.uniform();
      int g = 0;
      if (u >= st.alpha(i, 0)) g = u < st.alpha(i, 0) + st.alpha(i, 1) ? 1 : 2;
      const long yi = long(f.y[i]);
      if (g != 0) e0 += stats::poisson_log_pmf(yi, g == 1 ? lambda1 : lambda2);
      const double eta1 = f.x.row(i).dot(beta1), eta2 = f.x.row(i).dot(beta2);
      const double m = std::max({0.0, eta1, eta2});
      const double logz = m + std::log(std::exp(-m) + std::exp(eta1 - m) + std::exp(eta2 - m));
      e1 += (g == 1 ? eta1 : (g == 2 ? eta2 : 0.0)) - logz;
      if (st.alpha(i, g) > 0.0) f1 += std::log(st.alpha(i, g));
    }
    const auto log_gamma_pdf = [](double v, double shape, double rate) {
      return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(v) - rate * v;
    };
    e2 += log_gamma_pdf(lambda1, f.prior.a1, f.prior.b1);
    e3 += log_gamma_pdf(lambda2, f.prior.a2, f.prior.b2);
    const auto log_prior_beta = [&](const Eigen::VectorXd& beta, const CoefPrior& cp) {
      double lp = 0.0;
      for (int d = 0; d < 2; ++d)
        lp += -0.5 * std::log(2.0 * std::numbers::pi * cp.current_scales[d]) -
              0.5 * (beta[d] - cp.location[d]) * (beta[d] - cp.location[d]) / cp.current_scales[d];
      return lp;
    };
    e4 += log_prior_beta(beta1, f.prior.coef_prior1);
    e5 += log_prior_beta(beta2, f.prior.coef_prior2);
    f2 += log_gamma_pdf(lambda1, st.psi1, st.zeta1);
    f3 += log_gamma_pdf(lambda2, st.psi2, st.zeta2);
    const auto log_q_beta = [](const Eigen::VectorXd& beta, const Eigen::VectorXd& mean,
                               const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& root) {
      const Eigen::VectorXd c = beta - mean;
      double logdet = 0.0;
      for (int d = 0; d < 2; ++d) logdet += 2.0 * std::log(root(d, d));
      return -std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * c.dot(llt.solve(c));
    };
    f4 += log_q_beta(beta1, st.beta1_mean, llt1, root1);
    f5 += log_q_beta(beta2, st.beta2_mean, llt2, root2);
  }
  const double inv = 1.0 / double(samples);
  const auto close = [&](double got, double mc) {
    REQUIRE(std::fabs(got - mc) / std::max(1.0, std::fabs(mc)) < 1e-2);
  };
  close(pieces.e0, e0 * inv);
  close(pieces.e1, e1 * inv);
  close(pieces.e2, e2 * inv);
  close(pieces.e3, e3 * inv);
  close(pieces.e4, e4 * inv);
  close(pieces.e5, e5 * inv);
  close(pieces.f1, f1 * inv);
  close(pieces.f2, f2 * inv);
  close(pieces.f3, f3 * inv);
  close(pieces.f4, f4 * inv);
  close(pieces.f5, f5 * inv);
}

TEST_CASE("prior-matched factors contribute zero to the bound") {
  Eigen::VectorXd y(1);
  y << 0.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 1);
  ZimpPrior prior = gaussian_prior(1);
  ZimpCavi cavi(y, x, prior);
  auto& st = cavi.state();
  st.psi1 = prior.a1;
  st.zeta1 = prior.b1;
  st.psi2 = prior.a2;
  st.zeta2 = prior.b2;
  st.beta1_mean = prior.coef_prior1.location;
  st.beta2_mean = prior.coef_prior2.location;
  st.beta1_cov = prior.coef_prior1.current_scales.asDiagonal();
  st.beta2_cov = prior.coef_prior2.current_scales.asDiagonal();
  const auto p = cavi.elbo_pieces();
  REQUIRE(p.e2 - p.f2 == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(p.e3 - p.f3 == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(p.e4 - p.f4 == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(p.e5 - p.f5 == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("cavi run: single sweep at huge tolerance, monotone bound, rate bracket") {
  ScenarioConfig sim;
  sim.model = ModelKind::zimp;
  sim.n = 100;
  sim.seed = 23;
  const auto data = generate(sim);
  Design design = build_design(data.data, DesignConfig{});
  const Eigen::VectorXd y = data.data.responses();

  CaviConfig one;
  one.tol = 1e12;
  ZimpCavi quick(y, design.x, gaussian_prior(design.layout.dim()), one);
  REQUIRE(quick.run().sweeps == 1);

  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    ScenarioConfig s2 = sim;
    s2.seed = seed;
    const auto d2 = generate(s2);
    Design des2 = build_design(d2.data, DesignConfig{});
    ZimpCavi cavi(d2.data.responses(), des2.x, gaussian_prior(des2.layout.dim()));
    const auto st = cavi.run();
    for (std::size_t s = 1; s < st.elbo_history.size(); ++s)
      REQUIRE(st.elbo_history[s] >=
              st.elbo_history[s - 1] - 1e-8 * std::max(1.0, std::fabs(st.elbo_history[s - 1])));
    // variational rate means stay inside the positive-count range
    const double l1 = st.psi1 / st.zeta1, l2 = st.psi2 / st.zeta2;
    double ymin = 1e300, ymax = 0.0;
    for (Eigen::Index i = 0; i < d2.data.responses().size(); ++i)
      if (d2.data.responses()[i] > 0) {
        ymin = std::min(ymin, d2.data.responses()[i]);
        ymax = std::max(ymax, d2.data.responses()[i]);
      }
    REQUIRE(l1 >= ymin * 0.5);
    REQUIRE(l2 <= ymax * 1.5);
    REQUIRE(l1 < l2);

    // alpha rows stay on the simplex
    for (Eigen::Index i = 0; i < st.alpha.rows(); ++i)
      REQUIRE(st.alpha.row(i).sum() == Catch::Approx(1.0).margin(1e-12));
  }
}
