// Command-line front end: simulate study datasets, fit either engine, time
// engine grids, and summarize persisted traces.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>

#include "funmix/runner.hpp"

namespace {

using namespace funmix;

int cmd_simulate(const std::string& config_path, const std::string& out_dir, long seed_override) {
  KeyValueFile kv = KeyValueFile::parse_file(config_path);
  kv.reject_unknown({"scenario", "model", "n", "seed", "mu1", "sigma_sq", "lambda1", "lambda2"}, "simulate");
  ScenarioConfig cfg;
  const std::string scenario = kv.get_string("scenario", "study1");
  if (scenario == "study1") cfg.scenario = Scenario::study1;
  else if (scenario == "study2") cfg.scenario = Scenario::study2;
  else throw std::runtime_error("simulate: scenario must be study1 or study2");
  const std::string model = kv.get_string("model", "normal");
  if (model == "normal") cfg.model = ModelKind::normal;
  else if (model == "zimp") cfg.model = ModelKind::zimp;
  else throw std::runtime_error("simulate: model must be normal or zimp");
  cfg.n = int(kv.get_long("n", cfg.scenario == Scenario::study1 ? 500 : 150));
  cfg.seed = std::uint64_t(kv.get_long("seed", 1));
  if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
  cfg.mu1 = kv.get_double("mu1", cfg.mu1);
  cfg.sigma_sq = kv.get_double("sigma_sq", cfg.sigma_sq);
  cfg.lambda1 = kv.get_double("lambda1", cfg.lambda1);
  cfg.lambda2 = kv.get_double("lambda2", cfg.scenario == Scenario::study2 ? 8.5 : 10.0);

  const SimulatedDataset sim = generate(cfg);
  std::filesystem::create_directories(out_dir);
  save_dataset(sim.data, out_dir + "/dataset.csv");

  std::ofstream truth(out_dir + "/truth.csv");
  truth << "subject_id,true_class";
  for (Eigen::Index l = 0; l < sim.true_probs.cols(); ++l) truth << ",p" << l;
  truth << "\n";
  for (std::size_t i = 0; i < sim.true_class.size(); ++i) {
    truth << sim.data.subjects[i].id << "," << sim.true_class[i];
    for (Eigen::Index l = 0; l < sim.true_probs.cols(); ++l)
      truth << "," << detail::format_value(sim.true_probs(long(i), l));
    truth << "\n";
  }

  std::ofstream weights(out_dir + "/true_weights.csv");
  weights << "covariate,t,value\n";
  for (std::size_t j = 0; j < sim.weight_grids.size(); ++j)
    for (std::size_t p = 0; p < sim.weight_grids[j].size(); ++p)
      weights << (j + 1) << "," << detail::format_value(sim.weight_grids[j][p]) << ","
              << detail::format_value(sim.weight_values[j][p]) << "\n";

  std::cout << "wrote " << sim.data.subjects.size() << " subjects to " << out_dir << "\n";
  return 0;
}

int cmd_fit(EngineKind engine, const std::string& config_path, const std::string& data_path,
            const std::string& out_dir, long seed_override, int threads) {
  KeyValueFile kv = KeyValueFile::parse_file(config_path);
  if (seed_override >= 0) kv.set("seed", std::to_string(seed_override));
  kv.set("engine", engine == EngineKind::gibbs ? "gibbs" : "vb");
  if (threads > 0) kv.set("threads", std::to_string(threads));
  RunConfig cfg = parse_run_config(kv);
  const FitSummary summary = run_to_files(kv, cfg, data_path, out_dir);
  std::cout << "fit complete in " << summary.wallclock_sec << " s";
  if (engine == EngineKind::vb)
    std::cout << " (" << summary.sweeps << " sweeps, " << (summary.converged ? "converged" : "not converged")
              << ")";
  std::cout << "; outputs in " << out_dir << "\n";
  for (const auto& p : summary.params)
    if (p.name.rfind("beta", 0) != 0)
      std::cout << "  " << p.name << " = " << p.mean << " (" << p.sd << ") [" << p.lower << ", " << p.upper
                << "]\n";
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir, long seed_override, int threads) {
  KeyValueFile kv = KeyValueFile::parse_file(config_path);
  std::set<std::string> keys = fit_config_keys();
  keys.insert({"bench_sizes", "bench_models", "bench_replicates", "scenario"});
  kv.reject_unknown(keys, "bench");

  BenchConfig cfg;
  cfg.fit = parse_run_config([&] {
    KeyValueFile fit_kv = kv;
    return fit_kv;
  }());
  const auto sizes = kv.get_double_list("bench_sizes", {100, 300, 500});
  cfg.sizes.clear();
  for (double s : sizes) cfg.sizes.push_back(int(s));
  const std::string models = kv.get_string("bench_models", "normal,zimp");
  cfg.models.clear();
  if (models.find("normal") != std::string::npos) cfg.models.push_back(ModelKind::normal);
  if (models.find("zimp") != std::string::npos) cfg.models.push_back(ModelKind::zimp);
  cfg.replicates = int(kv.get_long("bench_replicates", 2));
  cfg.scenario = kv.get_string("scenario", "study1") == "study2" ? Scenario::study2 : Scenario::study1;
  cfg.seed = seed_override >= 0 ? std::uint64_t(seed_override) : std::uint64_t(kv.get_long("seed", 1));
  cfg.threads = threads > 0 ? threads : cfg.fit.threads;

  const auto cells = bench(cfg, [](const std::string& msg) { std::cerr << msg << "\n"; });
  std::filesystem::create_directories(out_dir);
  save_bench(cells, out_dir + "/timing.csv");
  std::cout << "model,n,engine,mean_minutes,sd_minutes\n";
  for (const auto& c : cells)
    std::cout << (c.model == ModelKind::normal ? "normal" : "zimp") << "," << c.n << ","
              << (c.engine == EngineKind::gibbs ? "gibbs" : "vb") << "," << c.mean_minutes << ","
              << c.sd_minutes << "\n";
  return 0;
}

int cmd_summarize(const std::string& data_path, const std::string& out_dir, double level) {
  const Trace trace = load_trace(data_path);
  const bool is_normal = !trace.names.empty() && trace.names[0] == "mu0";
  const std::vector<double> thresholds{-5.0, 0.0, 5.0, 10.0};
  const FitSummary summary = is_normal ? summarize_normal_trace(trace, level, thresholds)
                                       : summarize_zimp_trace(trace, level, thresholds);
  std::filesystem::create_directories(out_dir);
  save_summary(summary, out_dir + "/summary.csv");
  std::cout << "summarized " << trace.stored() << " draws -> " << out_dir << "/summary.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian latent-class mixture regression with functional covariates"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_dir = ".";
  long seed = -1;
  int threads = 0;
  double level = 0.95;

  auto* simulate = app.add_subcommand("simulate", "generate a study dataset");
  simulate->add_option("--config", config_path, "key=value scenario file")->required();
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--seed", seed, "seed override");

  auto* fit_gibbs = app.add_subcommand("fit-gibbs", "fit by Gibbs sampling");
  fit_gibbs->add_option("--config", config_path, "key=value run config")->required();
  fit_gibbs->add_option("--data", data_path, "dataset csv")->required();
  fit_gibbs->add_option("--out", out_dir, "output directory");
  fit_gibbs->add_option("--seed", seed, "seed override");
  fit_gibbs->add_option("--threads", threads, "worker threads");

  auto* fit_vb = app.add_subcommand("fit-vb", "fit by coordinate-ascent variational inference");
  fit_vb->add_option("--config", config_path, "key=value run config")->required();
  fit_vb->add_option("--data", data_path, "dataset csv")->required();
  fit_vb->add_option("--out", out_dir, "output directory");
  fit_vb->add_option("--seed", seed, "seed override");
  fit_vb->add_option("--threads", threads, "worker threads");

  auto* bench_cmd = app.add_subcommand("bench", "time both engines over a scenario grid");
  bench_cmd->add_option("--config", config_path, "key=value bench config")->required();
  bench_cmd->add_option("--out", out_dir, "output directory");
  bench_cmd->add_option("--seed", seed, "seed override");
  bench_cmd->add_option("--threads", threads, "worker threads");

  auto* summarize = app.add_subcommand("summarize", "summarize a persisted trace");
  summarize->add_option("--data", data_path, "trace csv")->required();
  summarize->add_option("--out", out_dir, "output directory");
  summarize->add_option("--level", level, "interval level");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(config_path, out_dir, seed);
    if (fit_gibbs->parsed()) return cmd_fit(funmix::EngineKind::gibbs, config_path, data_path, out_dir, seed, threads);
    if (fit_vb->parsed()) return cmd_fit(funmix::EngineKind::vb, config_path, data_path, out_dir, seed, threads);
    if (bench_cmd->parsed()) return cmd_bench(config_path, out_dir, seed, threads);
    if (summarize->parsed()) return cmd_summarize(data_path, out_dir, level);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
