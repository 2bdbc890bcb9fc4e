#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "funmix/gibbs_normal.hpp"
#include "funmix/simulate.hpp"
#include "funmix/summary.hpp"

using namespace funmix;

namespace {

// Kolmogorov-Smirnov statistic of samples against a cdf.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    ks = std::max(ks, std::max(std::fabs(F - double(i) / n), std::fabs(F - double(i + 1) / n)));
  }
  return ks;
}

NormalPrior default_prior(int dim) {
  NormalPrior prior;
  prior.coef_prior = CoefPrior::student_t(dim, 7.0, 2.5);
  return prior;
}

}  // namespace

TEST_CASE("gamma full conditional: symmetry, degenerate limit, enumeration") {
  REQUIRE(normal_gamma_prob1(4.5, 0.5, 0.0, 9.0, 18.0) == Catch::Approx(0.5).margin(1e-14));
  REQUIRE(normal_gamma_prob1(9.0, 0.5, 0.0, 9.0, 1e-8) == Catch::Approx(1.0).margin(1e-12));

  // independent two-term enumeration
  const double y = 2.3, p = 0.31, mu0 = -0.5, mu1 = 7.0, s2 = 10.0;
  const double a = std::exp(-0.5 * (y - mu1) * (y - mu1) / s2) * p;
  const double b = std::exp(-0.5 * (y - mu0) * (y - mu0) / s2) * (1.0 - p);
  REQUIRE(normal_gamma_prob1(y, p, mu0, mu1, s2) == Catch::Approx(a / (a + b)).epsilon(1e-12));
}

TEST_CASE("mean full conditional: conjugate oracle, flat-prior limit, empty component") {
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 10.0;
  std::vector<int> gamma{0, 0, 1};
  const double sigma_sq = 4.0, tau_sq = 25.0;

  const auto c0 = normal_mean_conditional(y, gamma, 0, sigma_sq, tau_sq);
  const double v_oracle = 1.0 / (1.0 / tau_sq + 2.0 / sigma_sq);
  REQUIRE(c0.var == Catch::Approx(v_oracle).epsilon(1e-12));
  REQUIRE(c0.mean == Catch::Approx(v_oracle * 3.0 / sigma_sq).epsilon(1e-12));

  // flat prior: posterior mean approaches the group average
  const auto flat = normal_mean_conditional(y, gamma, 0, 1.0, 1e12);
  REQUIRE(flat.mean == Catch::Approx(1.5).epsilon(1e-9));

  // empty component falls back to the prior
  std::vector<int> none{0, 0, 0};
  const auto empty = normal_mean_conditional(y, none, 1, sigma_sq, tau_sq);
  REQUIRE(empty.mean == 0.0);
  REQUIRE(empty.var == Catch::Approx(tau_sq));
}

TEST_CASE("sigma2 full conditional against the closed form and a grid oracle") {
  Eigen::VectorXd y(4);
  y << 0.3, -0.8, 8.6, 9.9;
  std::vector<int> gamma{0, 0, 1, 1};
  const double mu0 = 0.0, mu1 = 9.0, a0 = 2.0, b0 = 2.0;
  const auto g = normal_sigma_conditional(y, gamma, mu0, mu1, a0, b0);
  double rss = 0.3 * 0.3 + 0.8 * 0.8 + 0.4 * 0.4 + 0.9 * 0.9;
  REQUIRE(g.shape == Catch::Approx(2.0 + 2.0));
  REQUIRE(g.rate == Catch::Approx(2.0 + 0.5 * rss).epsilon(1e-12));

  // draws against the numeric normalization of likelihood x prior on a grid
  Rng rng(17);
  std::vector<double> draws;
  draws.reserve(100000);
  for (int i = 0; i < 100000; ++i) draws.push_back(rng.inverse_gamma(g.shape, g.rate));

  const auto log_target = [&](double s2) {
    double lt = -(a0 + 1.0) * std::log(s2) - b0 / s2;  // prior
    for (int i = 0; i < 4; ++i) {
      const double r = y[i] - (gamma[i] ? mu1 : mu0);
      lt += -0.5 * std::log(s2) - 0.5 * r * r / s2;
    }
    return lt;
  };
  const int grid_n = 20000;
  const double lo = 1e-4, hi = 60.0;
  std::vector<double> grid(grid_n), dens(grid_n), cum(grid_n);
  for (int j = 0; j < grid_n; ++j) {
    grid[j] = lo + (hi - lo) * j / double(grid_n - 1);
    dens[j] = std::exp(log_target(grid[j]));
  }
  cum[0] = 0.0;
  for (int j = 1; j < grid_n; ++j)
    cum[j] = cum[j - 1] + 0.5 * (dens[j] + dens[j - 1]) * (grid[j] - grid[j - 1]);
  const double z = cum.back();
  const auto grid_cdf = [&](double s2) {
    if (s2 <= lo) return 0.0;
    if (s2 >= hi) return 1.0;
    const double pos = (s2 - lo) / (hi - lo) * double(grid_n - 1);
    const std::size_t j = std::size_t(pos);
    const double frac = pos - double(j);
    return (cum[j] + frac * (cum[std::min<std::size_t>(j + 1, grid_n - 1)] - cum[j])) / z;
  };
  REQUIRE(ks_statistic(draws, grid_cdf) < 0.01);
}

TEST_CASE("sampled mean draws match the conjugate law (KS)") {
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 10.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
  NormalGibbs sampler(y, x, DesignLayout{{{CoefRef::Kind::intercept, 0, 0, 0, "intercept"}}},
                      default_prior(1));
  sampler.init();
  sampler.state().gamma = {0, 0, 1};
  sampler.state().sigma_sq = 4.0;
  sampler.state().mu0 = 0.0;

  Rng rng(23);
  std::vector<double> mu0_draws, mu1_draws;
  const auto c0 = normal_mean_conditional(y, sampler.state().gamma, 0, 4.0, 100.0);
  const auto c1 = normal_mean_conditional(y, sampler.state().gamma, 1, 4.0, 100.0);
  for (int i = 0; i < 100000; ++i) {
    auto state = sampler.state();
    sampler.sample_means(rng);
    mu0_draws.push_back(sampler.state().mu0);
    mu1_draws.push_back(sampler.state().mu1);
    sampler.state() = state;  // keep the conditional fixed
  }
  REQUIRE(ks_statistic(mu0_draws, [&](double v) {
            return stats::norm_cdf((v - c0.mean) / std::sqrt(c0.var));
          }) < 0.01);
  // mu1 is truncated at mu0 = 0
  const double lo_mass = stats::norm_cdf((0.0 - c1.mean) / std::sqrt(c1.var));
  REQUIRE(ks_statistic(mu1_draws, [&](double v) {
            const double F = stats::norm_cdf((v - c1.mean) / std::sqrt(c1.var));
            return std::max(0.0, (F - lo_mass) / (1.0 - lo_mass));
          }) < 0.01);
}

TEST_CASE("sweeps are deterministic given the seed and keep mu1 > mu0") {
  ScenarioConfig sim;
  sim.n = 60;
  sim.seed = 5;
  const auto data = generate(sim);
  Design design = build_design(data.data, DesignConfig{});
  const Eigen::VectorXd y = data.data.responses();

  NormalGibbs a(y, design.x, design.layout, default_prior(design.layout.dim()));
  NormalGibbs b(y, design.x, design.layout, default_prior(design.layout.dim()));
  Rng ra(99), rb(99);
  a.init();
  b.init();
  for (int s = 0; s < 25; ++s) {
    a.sweep(ra);
    b.sweep(rb);
    REQUIRE(a.state().mu1 > a.state().mu0);
  }
  REQUIRE(a.state().mu0 == b.state().mu0);
  REQUIRE(a.state().beta == b.state().beta);
  REQUIRE(a.state().gamma == b.state().gamma);
}

TEST_CASE("run_chain stores the scheduled number of draws and reproduces bitwise") {
  ScenarioConfig sim;
  sim.n = 40;
  sim.seed = 11;
  const auto data = generate(sim);
  Design design = build_design(data.data, DesignConfig{});
  const Eigen::VectorXd y = data.data.responses();

  ChainConfig cfg;
  cfg.iterations = 300;
  cfg.burnin = 100;
  cfg.thin = 10;
  cfg.seed = 42;
  NormalGibbs sampler(y, design.x, design.layout, default_prior(design.layout.dim()));
  const Trace t1 = sampler.run(cfg);
  REQUIRE(t1.stored() == 20);

  NormalGibbs again(y, design.x, design.layout, default_prior(design.layout.dim()));
  const Trace t2 = again.run(cfg);
  REQUIRE(t1.draws == t2.draws);
  REQUIRE(t1.gamma_draws == t2.gamma_draws);

  ChainConfig one;
  one.iterations = 6;
  one.burnin = 5;
  one.thin = 1;
  NormalGibbs third(y, design.x, design.layout, default_prior(design.layout.dim()));
  REQUIRE(third.run(one).stored() == 1);

  ChainConfig bad;
  bad.iterations = 10;
  bad.burnin = 10;
  REQUIRE_THROWS_AS(sampler.run(bad), std::invalid_argument);
}

TEST_CASE("hpd interval: point draws and the sorted-window oracle") {
  const auto [plo, phi] = hpd_interval(std::vector<double>(50, 3.25), 0.95);
  REQUIRE(plo == 3.25);
  REQUIRE(phi == 3.25);

  std::vector<double> seq;
  for (int i = 1; i <= 100; ++i) seq.push_back(double(i));
  const auto [lo, hi] = hpd_interval(seq, 0.95);
  // direct scan over all 95-length windows of 1..100: all widths equal, first kept
  REQUIRE(hi - lo == Catch::Approx(94.0));
  REQUIRE(lo == 1.0);

  std::vector<double> skew{1, 1.1, 1.2, 1.3, 10.0};
  const auto [slo, shi] = hpd_interval(skew, 0.8);
  REQUIRE(slo == 1.0);
  REQUIRE(shi == Catch::Approx(1.3));
}

TEST_CASE("summarize produces the ppc table and responsibilities") {
  ScenarioConfig sim;
  sim.n = 50;
  sim.seed = 3;
  const auto data = generate(sim);
  Design design = build_design(data.data, DesignConfig{});
  ChainConfig cfg;
  cfg.iterations = 400;
  cfg.burnin = 200;
  cfg.thin = 10;
  NormalGibbs sampler(data.data.responses(), design.x, design.layout, default_prior(design.layout.dim()));
  const Trace trace = sampler.run(cfg);
  const auto fs = summarize_normal_trace(trace, 0.95, {-5.0, 0.0, 5.0, 10.0});
  REQUIRE(fs.ppc.size() == 4);
  REQUIRE(fs.ppc[0].first == -5.0);
  for (const auto& [t, h] : fs.ppc) {
    REQUIRE(h >= 0.0);
    REQUIRE(h <= 1.0);
  }
  // tail probabilities decrease in the threshold
  REQUIRE(fs.ppc[0].second > fs.ppc[3].second);
  REQUIRE(fs.membership.rows() == 50);
  for (Eigen::Index i = 0; i < 50; ++i)
    REQUIRE(fs.membership(i, 0) + fs.membership(i, 1) == Catch::Approx(1.0).margin(1e-12));
  long decile_total = 0;
  for (int b = 0; b < 10; ++b) decile_total += fs.deciles[1][b];
  REQUIRE(decile_total == 50);

  REQUIRE_THROWS_AS(summarize_normal_trace(Trace{}, 0.95, {0.0}), std::invalid_argument);
}

TEST_CASE("label coherence on segregating data") {
  ScenarioConfig sim;
  sim.n = 500;
  sim.seed = 21;
  const auto data = generate(sim);
  Design design = build_design(data.data, DesignConfig{});
  ChainConfig cfg;
  cfg.iterations = 3000;
  cfg.burnin = 1000;
  cfg.thin = 20;
  cfg.seed = 9;
  NormalGibbs sampler(data.data.responses(), design.x, design.layout, default_prior(design.layout.dim()));
  const Trace trace = sampler.run(cfg);
  const auto fs = summarize_normal_trace(trace, 0.95, {});

  long correct = 0, class1 = 0;
  for (int i = 0; i < sim.n; ++i)
    if (data.true_class[i] == 1) {
      ++class1;
      if (fs.membership(i, 1) > 0.5) ++correct;
    }
  REQUIRE(double(correct) / double(class1) >= 0.85);
}
