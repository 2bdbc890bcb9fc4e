#pragma once

// Run orchestration: dispatch one fit over the four model/engine
// combinations, persist trace or variational state plus a summary and a
// manifest that makes the run reproducible, and time engine grids.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "funmix/config.hpp"
#include "funmix/dataset.hpp"
#include "funmix/design.hpp"
#include "funmix/gibbs_normal.hpp"
#include "funmix/gibbs_zimp.hpp"
#include "funmix/simulate.hpp"
#include "funmix/summary.hpp"
#include "funmix/trace.hpp"
#include "funmix/vb_normal.hpp"
#include "funmix/vb_zimp.hpp"

namespace funmix {

inline NormalPrior make_normal_prior(const RunConfig& cfg, int dim) {
  NormalPrior prior;
  prior.tau0_sq = cfg.prior.tau0_sq;
  prior.tau1_sq = cfg.prior.tau1_sq;
  prior.a0 = cfg.prior.a0;
  prior.b0 = cfg.prior.b0;
  prior.coef_prior = cfg.prior.make_coef_prior(dim);
  prior.link = cfg.link;
  return prior;
}

inline ZimpPrior make_zimp_prior(const RunConfig& cfg, int dim) {
  ZimpPrior prior;
  prior.a1 = cfg.prior.a1;
  prior.b1 = cfg.prior.b1;
  prior.a2 = cfg.prior.a2;
  prior.b2 = cfg.prior.b2;
  prior.coef_prior1 = cfg.prior.make_coef_prior(dim);
  prior.coef_prior2 = cfg.prior.make_coef_prior(dim);
  return prior;
}

inline FitSummary summarize_vb_normal(const VBNormalState& st, const DesignLayout& layout, double level,
                                      const std::vector<double>& thresholds) {
  FitSummary fs;
  fs.interval_level = level;
  fs.converged = st.converged;
  fs.sweeps = st.sweeps;
  fs.elbo = st.elbo_history.empty() ? std::numeric_limits<double>::quiet_NaN() : st.elbo_history.back();
  fs.wallclock_sec = st.wallclock_sec;
  const double z = stats::norm_quantile(0.5 + level / 2.0);

  const auto gauss_row = [&](const std::string& name, double m, double v) {
    fs.params.push_back({name, m, std::sqrt(v), m - z * std::sqrt(v), m + z * std::sqrt(v)});
  };
  gauss_row("mu0", st.m0, st.s0_sq);
  gauss_row("mu1", st.m1, st.s1_sq);
  ParamSummary s2;
  s2.name = "sigma2";
  s2.mean = st.A0 > 1.0 ? st.B0 / (st.A0 - 1.0) : std::numeric_limits<double>::quiet_NaN();
  s2.sd = st.A0 > 2.0 ? st.B0 / ((st.A0 - 1.0) * std::sqrt(st.A0 - 2.0)) : 0.0;
  s2.lower = 1.0 / stats::gamma_quantile(st.A0, st.B0, 0.5 + level / 2.0);
  s2.upper = 1.0 / stats::gamma_quantile(st.A0, st.B0, 0.5 - level / 2.0);
  fs.params.push_back(s2);
  for (int d = 0; d < layout.dim(); ++d)
    gauss_row("beta:" + layout.coefs[d].name, st.beta_mean[d], st.beta_cov(d, d));

  const Eigen::Index n = st.alpha.size();
  fs.subject_ids.resize(n);
  fs.membership.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    fs.subject_ids[i] = i + 1;
    fs.membership(i, 0) = 1.0 - st.alpha[i];
    fs.membership(i, 1) = st.alpha[i];
  }
  fs.deciles = detail::decile_table(fs.membership);

  const double sigma_hat = std::sqrt(st.B0 / std::max(st.A0 - 1.0, 1e-8));
  for (double t : thresholds) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      h += st.alpha[i] * stats::norm_sf((t - st.m1) / sigma_hat) +
           (1.0 - st.alpha[i]) * stats::norm_sf((t - st.m0) / sigma_hat);
    fs.ppc.emplace_back(t, h / double(n));
  }
  return fs;
}

inline FitSummary summarize_vb_zimp(const VBZimpState& st, const DesignLayout& layout, double level,
                                    const std::vector<double>& thresholds) {
  FitSummary fs;
  fs.interval_level = level;
  fs.converged = st.converged;
  fs.sweeps = st.sweeps;
  fs.elbo = st.elbo_history.empty() ? std::numeric_limits<double>::quiet_NaN() : st.elbo_history.back();
  fs.wallclock_sec = st.wallclock_sec;
  const double lo_p = 0.5 - level / 2.0, hi_p = 0.5 + level / 2.0;
  const double z = stats::norm_quantile(hi_p);

  const auto gamma_row = [&](const std::string& name, double shape, double rate) {
    fs.params.push_back({name, shape / rate, std::sqrt(shape) / rate,
                         stats::gamma_quantile(shape, rate, lo_p), stats::gamma_quantile(shape, rate, hi_p)});
  };
  gamma_row("lambda1", st.psi1, st.zeta1);
  gamma_row("lambda2", st.psi2, st.zeta2);
  for (int d = 0; d < layout.dim(); ++d) {
    const double m = st.beta1_mean[d], sd = std::sqrt(st.beta1_cov(d, d));
    fs.params.push_back({"beta1:" + layout.coefs[d].name, m, sd, m - z * sd, m + z * sd});
  }
  for (int d = 0; d < layout.dim(); ++d) {
    const double m = st.beta2_mean[d], sd = std::sqrt(st.beta2_cov(d, d));
    fs.params.push_back({"beta2:" + layout.coefs[d].name, m, sd, m - z * sd, m + z * sd});
  }

  const Eigen::Index n = st.alpha.rows();
  fs.subject_ids.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) fs.subject_ids[i] = i + 1;
  fs.membership = st.alpha;
  fs.deciles = detail::decile_table(fs.membership);

  const double l1 = st.psi1 / st.zeta1, l2 = st.psi2 / st.zeta2;
  for (double t : thresholds) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      h += st.alpha(i, 0) * (t < 0.0 ? 1.0 : 0.0) + st.alpha(i, 1) * stats::poisson_sf(t, l1) +
           st.alpha(i, 2) * stats::poisson_sf(t, l2);
    fs.ppc.emplace_back(t, h / double(n));
  }
  return fs;
}

inline void save_vb_normal_state(const VBNormalState& st, const DesignLayout& layout,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_vb_normal_state: cannot open " + path);
  out << "record,name,value\n";
  out << "scalar,m0," << detail::format_value(st.m0) << "\n";
  out << "scalar,s0_sq," << detail::format_value(st.s0_sq) << "\n";
  out << "scalar,m1," << detail::format_value(st.m1) << "\n";
  out << "scalar,s1_sq," << detail::format_value(st.s1_sq) << "\n";
  out << "scalar,A0," << detail::format_value(st.A0) << "\n";
  out << "scalar,B0," << detail::format_value(st.B0) << "\n";
  for (int d = 0; d < layout.dim(); ++d)
    out << "beta_mean," << layout.coefs[d].name << "," << detail::format_value(st.beta_mean[d]) << "\n";
  for (int r = 0; r < layout.dim(); ++r)
    for (int c = 0; c < layout.dim(); ++c)
      out << "beta_cov," << layout.coefs[r].name << ":" << layout.coefs[c].name << ","
          << detail::format_value(st.beta_cov(r, c)) << "\n";
  for (Eigen::Index i = 0; i < st.alpha.size(); ++i)
    out << "alpha," << (i + 1) << "," << detail::format_value(st.alpha[i]) << "\n";
  for (std::size_t s = 0; s < st.elbo_history.size(); ++s)
    out << "elbo," << (s + 1) << "," << detail::format_value(st.elbo_history[s]) << "\n";
}

inline void save_vb_zimp_state(const VBZimpState& st, const DesignLayout& layout, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_vb_zimp_state: cannot open " + path);
  out << "record,name,value\n";
  out << "scalar,psi1," << detail::format_value(st.psi1) << "\n";
  out << "scalar,zeta1," << detail::format_value(st.zeta1) << "\n";
  out << "scalar,psi2," << detail::format_value(st.psi2) << "\n";
  out << "scalar,zeta2," << detail::format_value(st.zeta2) << "\n";
  for (int d = 0; d < layout.dim(); ++d)
    out << "beta1_mean," << layout.coefs[d].name << "," << detail::format_value(st.beta1_mean[d]) << "\n";
  for (int d = 0; d < layout.dim(); ++d)
    out << "beta2_mean," << layout.coefs[d].name << "," << detail::format_value(st.beta2_mean[d]) << "\n";
  for (Eigen::Index i = 0; i < st.alpha.rows(); ++i)
    out << "alpha," << (i + 1) << "," << detail::format_value(st.alpha(i, 0)) << ";"
        << detail::format_value(st.alpha(i, 1)) << ";" << detail::format_value(st.alpha(i, 2)) << "\n";
  for (std::size_t s = 0; s < st.elbo_history.size(); ++s)
    out << "elbo," << (s + 1) << "," << detail::format_value(st.elbo_history[s]) << "\n";
}

struct RunResult {
  FitSummary summary;
  Trace trace;             // gibbs only
  VBNormalState vb_normal; // vb normal only
  VBZimpState vb_zimp;     // vb zimp only
  DesignLayout layout;
  double wallclock_sec = 0.0;
};

// One fit over (model, engine); in-memory variant used by tools and tests.
inline RunResult run_fit(const RunConfig& cfg, const Dataset& data) {
  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  Design design = build_design(data, cfg.design);
  result.layout = design.layout;
  const Eigen::VectorXd y = data.responses();

  if (cfg.model == ModelKind::normal) {
    NormalPrior prior = make_normal_prior(cfg, design.layout.dim());
    if (cfg.engine == EngineKind::gibbs) {
      NormalGibbs sampler(y, design.x, design.layout, prior);
      sampler.set_subject_ids(design.subject_ids);
      result.trace = sampler.run(cfg.chain);
      result.summary = summarize_normal_trace(result.trace, cfg.hpd_level, cfg.ppc_thresholds);
    } else {
      NormalCavi cavi(y, design.x, prior, cfg.cavi);
      result.vb_normal = cavi.run();
      result.summary = summarize_vb_normal(result.vb_normal, design.layout, cfg.hpd_level, cfg.ppc_thresholds);
    }
  } else {
    ZimpPrior prior = make_zimp_prior(cfg, design.layout.dim());
    if (cfg.engine == EngineKind::gibbs) {
      ZimpGibbs sampler(y, design.x, design.layout, prior);
      sampler.set_subject_ids(design.subject_ids);
      result.trace = sampler.run(cfg.chain);
      result.summary = summarize_zimp_trace(result.trace, cfg.hpd_level, cfg.ppc_thresholds);
    } else {
      ZimpCavi cavi(y, design.x, prior, cfg.cavi);
      result.vb_zimp = cavi.run();
      result.summary = summarize_vb_zimp(result.vb_zimp, design.layout, cfg.hpd_level, cfg.ppc_thresholds);
    }
  }
  result.wallclock_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.summary.wallclock_sec = result.wallclock_sec;
  return result;
}

inline void write_manifest(const KeyValueFile& kv, const RunConfig& cfg, const std::string& data_path,
                           double wallclock_sec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  out << "# run manifest: re-running with this config and data reproduces the outputs\n";
  out << "data = " << data_path << "\n";
  out << "seed = " << cfg.chain.seed << "\n";
  for (const auto& [key, value] : kv.entries())
    if (key != "seed") out << key << " = " << value << "\n";
  out << "wallclock_sec = " << wallclock_sec << "\n";
}

// File-level entry point behind `fit-gibbs` / `fit-vb`.
inline FitSummary run_to_files(const KeyValueFile& kv, const RunConfig& cfg, const std::string& data_path,
                               const std::string& out_dir) {
  const Dataset data = load_dataset(data_path);
  std::filesystem::create_directories(out_dir);
  RunResult result = run_fit(cfg, data);
  if (cfg.engine == EngineKind::gibbs) {
    save_trace(result.trace, out_dir + "/trace.csv");
  } else if (cfg.model == ModelKind::normal) {
    save_vb_normal_state(result.vb_normal, result.layout, out_dir + "/vb_state.csv");
  } else {
    save_vb_zimp_state(result.vb_zimp, result.layout, out_dir + "/vb_state.csv");
  }
  save_summary(result.summary, out_dir + "/summary.csv");
  write_manifest(kv, cfg, data_path, result.wallclock_sec, out_dir + "/manifest.txt");
  return result.summary;
}

struct BenchCell {
  ModelKind model;
  EngineKind engine;
  int n = 100;
  double mean_minutes = 0.0;
  double sd_minutes = 0.0;
  int replicates = 0;
};

struct BenchConfig {
  std::vector<int> sizes{100, 300, 500};
  std::vector<ModelKind> models{ModelKind::normal, ModelKind::zimp};
  int replicates = 2;
  std::uint64_t seed = 1;
  int threads = 1;
  Scenario scenario = Scenario::study1;
  RunConfig fit;  // engine field ignored; both engines run per cell
  // replaceable cell runner returning (gibbs_sec, vb_sec); tests stub this
  std::function<std::pair<double, double>(ModelKind, int, std::uint64_t)> cell_runner;
};

// Wall-clock grid over scenario sizes, models and engines. Each replicate
// simulates its own dataset, then both engines fit the same data.
inline std::vector<BenchCell> bench(const BenchConfig& cfg,
                                    const std::function<void(const std::string&)>& log = nullptr) {
  struct Job {
    ModelKind model;
    int n;
    int rep;
  };
  std::vector<Job> jobs;
  for (ModelKind model : cfg.models)
    for (int n : cfg.sizes)
      for (int r = 0; r < cfg.replicates; ++r) jobs.push_back({model, n, r});

  const auto default_runner = [&cfg](ModelKind model, int n, std::uint64_t seed) {
    ScenarioConfig sim;
    sim.scenario = cfg.scenario;
    sim.model = model;
    sim.n = n;
    sim.seed = seed;
    if (model == ModelKind::zimp && cfg.scenario == Scenario::study2) sim.lambda2 = 8.5;
    const SimulatedDataset sim_data = generate(sim);

    RunConfig fit = cfg.fit;
    fit.model = model;
    fit.chain.seed = Rng::derive_seed(seed, 1);
    fit.cavi.seed = fit.chain.seed;

    fit.engine = EngineKind::gibbs;
    const double gibbs_sec = run_fit(fit, sim_data.data).wallclock_sec;
    fit.engine = EngineKind::vb;
    const double vb_sec = run_fit(fit, sim_data.data).wallclock_sec;
    return std::make_pair(gibbs_sec, vb_sec);
  };
  const auto run_cell = cfg.cell_runner ? cfg.cell_runner : default_runner;

  // timings[job] = (gibbs_sec, vb_sec)
  std::vector<std::pair<double, double>> timings(jobs.size());
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, cfg.threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs.size()) return;
        timings[j] = run_cell(jobs[j].model, jobs[j].n, Rng::derive_seed(cfg.seed, j));
      }
    });
  for (auto& t : pool) t.join();

  std::vector<BenchCell> cells;
  for (ModelKind model : cfg.models)
    for (int n : cfg.sizes)
      for (EngineKind engine : {EngineKind::gibbs, EngineKind::vb}) {
        BenchCell cell;
        cell.model = model;
        cell.engine = engine;
        cell.n = n;
        std::vector<double> minutes;
        for (std::size_t j = 0; j < jobs.size(); ++j)
          if (jobs[j].model == model && jobs[j].n == n)
            minutes.push_back((engine == EngineKind::gibbs ? timings[j].first : timings[j].second) / 60.0);
        cell.replicates = int(minutes.size());
        double mean = 0.0;
        for (double m : minutes) mean += m;
        mean /= double(minutes.size());
        double var = 0.0;
        for (double m : minutes) var += (m - mean) * (m - mean);
        cell.mean_minutes = mean;
        cell.sd_minutes = minutes.size() > 1 ? std::sqrt(var / double(minutes.size() - 1)) : 0.0;
        cells.push_back(cell);
      }

  if (log) {
    for (std::size_t c = 0; c + 1 < cells.size(); c += 2) {
      const BenchCell& g = cells[c], & v = cells[c + 1];
      if (v.mean_minutes >= g.mean_minutes)
        log("note: vb mean time did not beat gibbs for model " +
            std::string(g.model == ModelKind::normal ? "normal" : "zimp") + ", n = " + std::to_string(g.n));
    }
  }
  return cells;
}

inline void save_bench(const std::vector<BenchCell>& cells, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_bench: cannot open " + path);
  out << "model,n,engine,mean_minutes,sd_minutes,replicates\n";
  for (const auto& c : cells)
    out << (c.model == ModelKind::normal ? "normal" : "zimp") << "," << c.n << ","
        << (c.engine == EngineKind::gibbs ? "gibbs" : "vb") << "," << detail::format_value(c.mean_minutes)
        << "," << detail::format_value(c.sd_minutes) << "," << c.replicates << "\n";
}

}  // namespace funmix
