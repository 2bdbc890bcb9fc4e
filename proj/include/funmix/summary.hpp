#pragma once

// Fit summaries: parameter table with HPD (MCMC) or variational quantile
// bounds (VB), per-subject membership probabilities, decile frequency
// table, and posterior-predictive tail probabilities.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "funmix/dataset.hpp"
#include "funmix/stats.hpp"
#include "funmix/trace.hpp"

namespace funmix {

struct ParamSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, lower = 0.0, upper = 0.0;
};

struct FitSummary {
  std::vector<ParamSummary> params;
  std::vector<long> subject_ids;
  Eigen::MatrixXd membership;                 // n x L mean responsibilities
  std::vector<std::array<long, 10>> deciles;  // per class, counts by decile
  std::vector<std::pair<double, double>> ppc; // threshold -> mean tail freq
  double wallclock_sec = 0.0;
  double interval_level = 0.95;
  bool converged = true;
  int sweeps = 0;
  double elbo = std::numeric_limits<double>::quiet_NaN();
};

// Shortest interval containing ceil(level * m) of m sorted draws.
inline std::pair<double, double> hpd_interval(std::vector<double> draws, double level) {
  if (draws.empty()) throw std::invalid_argument("hpd_interval: empty draws");
  std::sort(draws.begin(), draws.end());
  const long m = long(draws.size());
  long span = long(std::ceil(level * double(m)));
  span = std::clamp(span, 1L, m);
  long best = 0;
  double width = draws[span - 1] - draws[0];
  for (long i = 1; i + span <= m; ++i) {
    const double w = draws[i + span - 1] - draws[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {draws[best], draws[best + span - 1]};
}

namespace detail {

inline ParamSummary summarize_column(const std::string& name, const Eigen::VectorXd& col, double level) {
  ParamSummary s;
  s.name = name;
  s.mean = col.mean();
  s.sd = col.size() > 1 ? std::sqrt((col.array() - s.mean).square().sum() / double(col.size() - 1)) : 0.0;
  std::vector<double> v(col.data(), col.data() + col.size());
  std::tie(s.lower, s.upper) = hpd_interval(std::move(v), level);
  return s;
}

inline std::vector<std::array<long, 10>> decile_table(const Eigen::MatrixXd& membership) {
  std::vector<std::array<long, 10>> out(membership.cols());
  for (auto& a : out) a.fill(0);
  for (Eigen::Index i = 0; i < membership.rows(); ++i)
    for (Eigen::Index l = 0; l < membership.cols(); ++l) {
      int bin = int(std::floor(membership(i, l) * 10.0));
      bin = std::clamp(bin, 0, 9);
      ++out[l][bin];
    }
  return out;
}

}  // namespace detail

// MCMC summary for the two-component normal mixture. PPC tail frequencies
// are conditional means given each stored draw's parameters and labels, so
// the summary is a pure function of the trace.
inline FitSummary summarize_normal_trace(const Trace& trace, double level,
                                         const std::vector<double>& thresholds) {
  if (trace.stored() == 0) throw std::invalid_argument("summarize: empty trace");
  FitSummary fs;
  fs.interval_level = level;
  fs.wallclock_sec = trace.wallclock_sec;
  fs.subject_ids = trace.subject_ids;
  for (std::size_t k = 0; k < trace.names.size(); ++k)
    fs.params.push_back(detail::summarize_column(trace.names[k], trace.draws.col(Eigen::Index(k)), level));

  const long m = trace.stored(), n = long(trace.subject_ids.size());
  fs.membership = Eigen::MatrixXd::Zero(n, 2);
  for (long d = 0; d < m; ++d)
    for (long i = 0; i < n; ++i) fs.membership(i, trace.gamma_draws[d][i]) += 1.0;
  fs.membership /= double(m);
  fs.deciles = detail::decile_table(fs.membership);

  const Eigen::VectorXd mu0 = trace.column("mu0"), mu1 = trace.column("mu1"), s2 = trace.column("sigma2");
  for (double t : thresholds) {
    double acc = 0.0;
    for (long d = 0; d < m; ++d) {
      const double sd = std::sqrt(s2[d]);
      double h = 0.0;
      for (long i = 0; i < n; ++i) {
        const double mu = trace.gamma_draws[d][i] ? mu1[d] : mu0[d];
        h += stats::norm_sf((t - mu) / sd);
      }
      acc += h / double(n);
    }
    fs.ppc.emplace_back(t, acc / double(m));
  }
  return fs;
}

// MCMC summary for the zero-inflated Poisson mixture.
inline FitSummary summarize_zimp_trace(const Trace& trace, double level,
                                       const std::vector<double>& thresholds) {
  if (trace.stored() == 0) throw std::invalid_argument("summarize: empty trace");
  FitSummary fs;
  fs.interval_level = level;
  fs.wallclock_sec = trace.wallclock_sec;
  fs.subject_ids = trace.subject_ids;
  for (std::size_t k = 0; k < trace.names.size(); ++k)
    fs.params.push_back(detail::summarize_column(trace.names[k], trace.draws.col(Eigen::Index(k)), level));

  const long m = trace.stored(), n = long(trace.subject_ids.size());
  fs.membership = Eigen::MatrixXd::Zero(n, 3);
  for (long d = 0; d < m; ++d)
    for (long i = 0; i < n; ++i) fs.membership(i, trace.gamma_draws[d][i]) += 1.0;
  fs.membership /= double(m);
  fs.deciles = detail::decile_table(fs.membership);

  const Eigen::VectorXd l1 = trace.column("lambda1"), l2 = trace.column("lambda2");
  for (double t : thresholds) {
    double acc = 0.0;
    for (long d = 0; d < m; ++d) {
      double h = 0.0;
      for (long i = 0; i < n; ++i) {
        const int g = trace.gamma_draws[d][i];
        if (g == 0) h += (t < 0.0) ? 1.0 : 0.0;
        else h += stats::poisson_sf(t, g == 1 ? l1[d] : l2[d]);
      }
      acc += h / double(n);
    }
    fs.ppc.emplace_back(t, acc / double(m));
  }
  return fs;
}

inline void save_summary(const FitSummary& fs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_summary: cannot open " + path);
  out << "record,name,value1,value2,value3,value4\n";
  for (const auto& p : fs.params)
    out << "param," << p.name << "," << detail::format_value(p.mean) << "," << detail::format_value(p.sd)
        << "," << detail::format_value(p.lower) << "," << detail::format_value(p.upper) << "\n";
  for (Eigen::Index i = 0; i < fs.membership.rows(); ++i) {
    out << "membership," << fs.subject_ids[i];
    for (Eigen::Index l = 0; l < fs.membership.cols(); ++l)
      out << "," << detail::format_value(fs.membership(i, l));
    for (Eigen::Index l = fs.membership.cols(); l < 4; ++l) out << ",";
    out << "\n";
  }
  for (std::size_t l = 0; l < fs.deciles.size(); ++l)
    for (int b = 0; b < 10; ++b)
      out << "decile,class" << l << "," << (b / 10.0) << "," << ((b + 1) / 10.0) << "," << fs.deciles[l][b]
          << ",\n";
  for (const auto& [t, h] : fs.ppc)
    out << "ppc," << detail::format_value(t) << "," << detail::format_value(h) << ",,,\n";
  // wall-clock lives in the manifest; summary files stay seed-deterministic
  out << "meta,interval_level," << detail::format_value(fs.interval_level) << ",,,\n";
  out << "meta,converged," << (fs.converged ? 1 : 0) << ",,,\n";
  if (fs.sweeps > 0) out << "meta,sweeps," << fs.sweeps << ",,,\n";
  if (std::isfinite(fs.elbo)) out << "meta,elbo," << detail::format_value(fs.elbo) << ",,,\n";
}

}  // namespace funmix
