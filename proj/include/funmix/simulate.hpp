#pragma once

// Simulation studies and their evaluation metrics.
//
// Study 1 (segregating curves). Each subject carries a latent curve class
// c in {0,1} drawn fair-coin. With u the position rescaled to [0,1]:
//   X1 on T=[16,60], 45 points: template sigma(10(u-1/2)) for class 0 and
//     its mirror image for class 1, plus a per-subject level shift
//     a ~ N(0, 0.25) and iid N(0, 0.01) observation noise.
//   X2 on S=[0,1], 30 points: oscillation 0.4 sin(4 pi (s-1/2)) around a
//     class-dependent level +0.75 (class 0) / -0.75 (class 1), plus the
//     same two noise layers.
// Weight functions: w1 is an antisymmetric pair of Gaussian bumps (centers
// 0.2/0.8, width 0.12) and w2 a single bump (center 0.5, width 0.15); both
// are rescaled once, from the noiseless templates, so that the grid sums
// give eta1 = +/- 1.3 (normal model, X1 carrying 45% of the contrast) or
// +/- 2.4 (zero-inflated model, X1 carrying 60%). The companion weights are
// w1' = 0.5 w1 and w2' = -0.25 w2. Memberships: normal model gamma ~
// Bernoulli(sigma(eta1)); zero-inflated model gamma ~
// Multinomial(softmax(0, eta1, eta2)).
//
// Study 2 (non-segregating curves). X1 and X2 are 13-term cubic B-spline
// expansions over nine equally spaced interior knots on [0,10] and [0,1],
// coefficient matrices C1 = Z1 U1 (Z1 iid N(0.1,1)) and C2 = Z2 U2 (Z2 iid
// N(0,1)), U uniform [0,1], sampled on 256-point grids; weights
// w1(t) = -phi(t;2,0.5) + phi(t;7.5,0.5) and w2(s) = 2 sin(10 pi s / 3),
// with the same companion-weight convention as Study 1.
//
// Subjects are generated from per-subject substreams of the seed, so the
// first n subjects of a larger run form exactly the smaller run's dataset.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "funmix/dataset.hpp"
#include "funmix/gibbs_zimp.hpp"
#include "funmix/rng.hpp"

namespace funmix {

enum class Scenario { study1, study2 };

struct ScenarioConfig {
  Scenario scenario = Scenario::study1;
  ModelKind model = ModelKind::normal;
  int n = 500;
  std::uint64_t seed = 1;
  // component parameters; study2 zimp uses lambda2 = 8.5
  double mu1 = 9.0;
  double sigma_sq = 18.0;
  double lambda1 = 2.0;
  double lambda2 = 10.0;
  bool zero_weights = false;  // test hook: all weight functions identically 0

  static ScenarioConfig study2_defaults(ModelKind model, int n = 150, std::uint64_t seed = 1) {
    ScenarioConfig cfg;
    cfg.scenario = Scenario::study2;
    cfg.model = model;
    cfg.n = n;
    cfg.seed = seed;
    cfg.lambda2 = 8.5;
    return cfg;
  }
};

struct SimulatedDataset {
  Dataset data;
  std::vector<int> true_class;       // normal: 0/1; zimp: 0/1/2
  Eigen::MatrixXd true_probs;        // n x 2 (normal: 1-p1, p1) or n x 3
  std::vector<std::vector<double>> weight_grids;   // per covariate
  std::vector<std::vector<double>> weight_values;  // true w_j on its grid
};

// Normal model: p1 = logistic(eta1). Zero-inflated model: softmax over
// (0, eta1, eta2).
inline std::array<double, 3> mixture_probs(double eta1, double eta2, ModelKind model) {
  if (model == ModelKind::normal) {
    const double p1 = link_inv(std::clamp(eta1, -kEtaClamp, kEtaClamp), LinkKind::logit);
    return {1.0 - p1, p1, 0.0};
  }
  return class_probs(eta1, eta2);
}

namespace detail {

inline double bump(double u, double center, double width) {
  const double z = (u - center) / width;
  return std::exp(-z * z);
}

struct Study1Machinery {
  std::vector<double> t_grid, s_grid;       // observation grids
  std::vector<double> w1_normal, w2_normal; // calibrated weights per model
  std::vector<double> w1_zimp, w2_zimp;

  Study1Machinery() {
    for (int j = 0; j < 45; ++j) t_grid.push_back(16.0 + 44.0 * j / 44.0);
    for (int j = 0; j < 30; ++j) s_grid.push_back(double(j) / 29.0);

    // raw shapes
    std::vector<double> w1_raw, w2_raw;
    for (double t : t_grid) {
      const double u = (t - 16.0) / 44.0;
      w1_raw.push_back(bump(u, 0.75, 0.22) - bump(u, 0.25, 0.22));
    }
    for (double s : s_grid) w2_raw.push_back(bump(s, 0.5, 0.25));

    // calibrate against the noiseless class-1 templates so that eta1 hits
    // +/- contrast with a 60/40 split between the X1 and X2 terms (both
    // templates are antisymmetric on their symmetric grids). The normal
    // model keeps substantial membership uncertainty; the zero-inflated
    // model separates harder so that Poisson zeros stay identified with
    // their count class.
    double s1 = 0.0;
    for (std::size_t j = 0; j < t_grid.size(); ++j) s1 += w1_raw[j] * x1_template(t_grid[j], 1);
    double s2 = 0.0;
    for (std::size_t j = 0; j < s_grid.size(); ++j) s2 += w2_raw[j] * x2_template(s_grid[j], 1);
    const double contrast_normal = 1.3, contrast_zimp = 2.4;
    const double x1_share_normal = 0.45, x1_share_zimp = 0.6;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
      w1_normal.push_back(x1_share_normal * contrast_normal / s1 * w1_raw[j]);
      w1_zimp.push_back(x1_share_zimp * contrast_zimp / s1 * w1_raw[j]);
    }
    for (std::size_t j = 0; j < s_grid.size(); ++j) {
      w2_normal.push_back((1.0 - x1_share_normal) * contrast_normal / s2 * w2_raw[j]);
      w2_zimp.push_back((1.0 - x1_share_zimp) * contrast_zimp / s2 * w2_raw[j]);
    }
  }

  static double x1_template(double t, int cls) {
    const double u = (t - 16.0) / 44.0;
    const double rising = 1.0 / (1.0 + std::exp(-10.0 * (u - 0.5)));
    return cls == 1 ? rising : 1.0 - rising;
  }

  static double x2_template(double s, int cls) {
    const double level = cls == 1 ? 0.75 : -0.75;
    return level + 0.4 * std::sin(4.0 * std::numbers::pi_v<double> * (s - 0.5));
  }
};

inline const Study1Machinery& study1() {
  static const Study1Machinery m;
  return m;
}

}  // namespace detail

inline SimulatedDataset gen_study1(const ScenarioConfig& cfg, Rng& rng) {
  if (cfg.n <= 0) throw std::invalid_argument("gen_study1: n must be positive");
  const auto& mach = detail::study1();
  const int levels = cfg.model == ModelKind::normal ? 2 : 3;

  SimulatedDataset out;
  out.true_probs.resize(cfg.n, levels);
  out.weight_grids = {mach.t_grid, mach.s_grid};
  out.weight_values = cfg.model == ModelKind::normal
                          ? std::vector<std::vector<double>>{mach.w1_normal, mach.w2_normal}
                          : std::vector<std::vector<double>>{mach.w1_zimp, mach.w2_zimp};
  if (cfg.zero_weights) {
    out.weight_values[0].assign(mach.t_grid.size(), 0.0);
    out.weight_values[1].assign(mach.s_grid.size(), 0.0);
  }

  for (int i = 0; i < cfg.n; ++i) {
    Rng sub = rng.substream(std::uint64_t(i));
    const int cls = sub.uniform() < 0.5 ? 0 : 1;

    Subject subj;
    subj.id = i + 1;
    subj.curves.resize(2);
    const double level1 = 0.5 * sub.normal();  // N(0, 0.25) level shifts
    const double level2 = 0.5 * sub.normal();
    for (double t : mach.t_grid) {
      subj.curves[0].grid.push_back(t);
      subj.curves[0].values.push_back(detail::Study1Machinery::x1_template(t, cls) + level1 +
                                      0.1 * sub.normal());
    }
    for (double s : mach.s_grid) {
      subj.curves[1].grid.push_back(s);
      subj.curves[1].values.push_back(detail::Study1Machinery::x2_template(s, cls) + level2 +
                                      0.1 * sub.normal());
    }

    double u1 = 0.0, u2 = 0.0;  // the two weighted grid sums
    for (std::size_t j = 0; j < mach.t_grid.size(); ++j)
      u1 += out.weight_values[0][j] * subj.curves[0].values[j];
    for (std::size_t j = 0; j < mach.s_grid.size(); ++j)
      u2 += out.weight_values[1][j] * subj.curves[1].values[j];
    const double eta1 = u1 + u2;
    const double eta2 = 0.5 * u1 - 0.25 * u2;  // w1' = 0.5 w1, w2' = -0.25 w2

    const auto probs = mixture_probs(eta1, eta2, cfg.model);
    if (cfg.model == ModelKind::normal) {
      out.true_probs(i, 0) = probs[0];
      out.true_probs(i, 1) = probs[1];
      const int g = sub.uniform() < probs[1] ? 1 : 0;
      out.true_class.push_back(g);
      subj.response = cfg.mu1 * g + std::sqrt(cfg.sigma_sq) * sub.normal();
    } else {
      for (int l = 0; l < 3; ++l) out.true_probs(i, l) = probs[l];
      const double u = sub.uniform();
      const int g = u < probs[0] ? 0 : (u < probs[0] + probs[1] ? 1 : 2);
      out.true_class.push_back(g);
      subj.response = g == 0 ? 0.0 : double(sub.poisson(g == 1 ? cfg.lambda1 : cfg.lambda2));
    }
    out.data.subjects.push_back(std::move(subj));
  }
  out.data.num_scalars = 0;
  out.data.num_curves = 2;
  return out;
}

inline SimulatedDataset gen_study2(const ScenarioConfig& cfg, Rng& rng) {
  if (cfg.n <= 0) throw std::invalid_argument("gen_study2: n must be positive");
  const int n_points = 256, n_basis = 13;
  const Domain t_dom(0.0, 10.0), s_dom(0.0, 1.0);
  const BasisSpec spec1 = make_knots(t_dom, n_basis), spec2 = make_knots(s_dom, n_basis);
  const int levels = cfg.model == ModelKind::normal ? 2 : 3;

  std::vector<double> t_grid, s_grid;
  for (int j = 0; j < n_points; ++j) {
    t_grid.push_back(10.0 * j / double(n_points - 1));
    s_grid.push_back(double(j) / double(n_points - 1));
  }

  const auto phi = [](double t, double mu, double sd) {
    const double z = (t - mu) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi_v<double>));
  };
  std::vector<double> w1, w2;
  for (double t : t_grid) w1.push_back(cfg.zero_weights ? 0.0 : -phi(t, 2.0, 0.5) + phi(t, 7.5, 0.5));
  for (double s : s_grid)
    w2.push_back(cfg.zero_weights ? 0.0 : 2.0 * std::sin(10.0 * s * std::numbers::pi_v<double> / 3.0));

  // mixing matrices shared across subjects, drawn from the root stream
  Eigen::MatrixXd mix1(n_basis, n_basis), mix2(n_basis, n_basis);
  for (int r = 0; r < n_basis; ++r)
    for (int c = 0; c < n_basis; ++c) {
      mix1(r, c) = rng.uniform();
      mix2(r, c) = rng.uniform();
    }

  // basis values on the two grids
  Eigen::MatrixXd b1(n_points, n_basis), b2(n_points, n_basis);
  for (int j = 0; j < n_points; ++j) {
    const auto v1 = eval_basis(spec1, t_grid[j]);
    const auto v2 = eval_basis(spec2, s_grid[j]);
    for (int k = 0; k < n_basis; ++k) {
      b1(j, k) = v1[k];
      b2(j, k) = v2[k];
    }
  }

  SimulatedDataset out;
  out.true_probs.resize(cfg.n, levels);
  out.weight_grids = {t_grid, s_grid};
  out.weight_values = {w1, w2};

  for (int i = 0; i < cfg.n; ++i) {
    Rng sub = rng.substream(std::uint64_t(i));
    Eigen::VectorXd z1(n_basis), z2(n_basis);
    for (int k = 0; k < n_basis; ++k) {
      z1[k] = 0.1 + sub.normal();
      z2[k] = sub.normal();
    }
    const Eigen::VectorXd c1 = mix1.transpose() * z1, c2 = mix2.transpose() * z2;
    const Eigen::VectorXd x1 = b1 * c1, x2 = b2 * c2;

    Subject subj;
    subj.id = i + 1;
    subj.curves.resize(2);
    subj.curves[0].grid = t_grid;
    subj.curves[1].grid = s_grid;
    subj.curves[0].values.assign(x1.data(), x1.data() + n_points);
    subj.curves[1].values.assign(x2.data(), x2.data() + n_points);

    double u1 = 0.0, u2 = 0.0;
    for (int j = 0; j < n_points; ++j) {
      u1 += w1[j] * x1[j];
      u2 += w2[j] * x2[j];
    }
    const double eta1 = u1 + u2;
    const double eta2 = 0.5 * u1 - 0.25 * u2;

    const auto probs = mixture_probs(eta1, eta2, cfg.model);
    if (cfg.model == ModelKind::normal) {
      out.true_probs(i, 0) = probs[0];
      out.true_probs(i, 1) = probs[1];
      const int g = sub.uniform() < probs[1] ? 1 : 0;
      out.true_class.push_back(g);
      subj.response = cfg.mu1 * g + std::sqrt(cfg.sigma_sq) * sub.normal();
    } else {
      for (int l = 0; l < 3; ++l) out.true_probs(i, l) = probs[l];
      const double u = sub.uniform();
      const int g = u < probs[0] ? 0 : (u < probs[0] + probs[1] ? 1 : 2);
      out.true_class.push_back(g);
      subj.response = g == 0 ? 0.0 : double(sub.poisson(g == 1 ? cfg.lambda1 : cfg.lambda2));
    }
    out.data.subjects.push_back(std::move(subj));
  }
  out.data.num_scalars = 0;
  out.data.num_curves = 2;
  return out;
}

inline SimulatedDataset generate(const ScenarioConfig& cfg) {
  Rng rng(cfg.seed);
  return cfg.scenario == Scenario::study1 ? gen_study1(cfg, rng) : gen_study2(cfg, rng);
}

// Mean over subjects of (1/L) sum_l (p_il - phat_il)^2.
inline double metric_mse(const Eigen::MatrixXd& p_true, const Eigen::MatrixXd& p_hat) {
  if (p_true.rows() != p_hat.rows() || p_true.cols() != p_hat.cols())
    throw std::invalid_argument("metric_mse: shape mismatch");
  return (p_true - p_hat).array().square().rowwise().mean().mean();
}

// Fraction of subjects where I(phat > threshold) disagrees with the label.
inline double metric_mr_normal(const std::vector<int>& true_class, const Eigen::VectorXd& p_hat,
                               double threshold) {
  if (long(true_class.size()) != p_hat.size())
    throw std::invalid_argument("metric_mr_normal: shape mismatch");
  double miss = 0.0;
  for (std::size_t i = 0; i < true_class.size(); ++i) {
    const int predicted = p_hat[long(i)] > threshold ? 1 : 0;
    if (predicted != true_class[i]) miss += 1.0;
  }
  return miss / double(true_class.size());
}

// Mean |L_i - Lhat_i| with labels {0,1,2}; argmax ties break low.
inline double metric_mr_zimp(const std::vector<int>& true_class, const Eigen::MatrixXd& alpha) {
  if (long(true_class.size()) != alpha.rows() || alpha.cols() != 3)
    throw std::invalid_argument("metric_mr_zimp: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < true_class.size(); ++i) {
    int argmax = 0;
    for (int l = 1; l < 3; ++l)
      if (alpha(long(i), l) > alpha(long(i), argmax)) argmax = l;
    acc += std::abs(argmax - true_class[i]);
  }
  return acc / double(true_class.size());
}

}  // namespace funmix
