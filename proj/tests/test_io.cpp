#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "funmix/config.hpp"
#include "funmix/runner.hpp"
#include "funmix/simulate.hpp"

using namespace funmix;

namespace {

std::string temp_dir() {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / ("funmix_io_" + std::to_string(++counter));
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_summary(const FitSummary& a, const FitSummary& b) {
  if (a.params.size() != b.params.size()) return false;
  for (std::size_t k = 0; k < a.params.size(); ++k) {
    const auto& pa = a.params[k];
    const auto& pb = b.params[k];
    if (pa.name != pb.name || pa.mean != pb.mean || pa.sd != pb.sd || pa.lower != pb.lower ||
        pa.upper != pb.upper)
      return false;
  }
  if (a.membership != b.membership) return false;
  if (a.ppc != b.ppc) return false;
  if (a.deciles != b.deciles) return false;
  return true;
}

}  // namespace

TEST_CASE("dataset round-trips bitwise and tolerates shuffled rows") {
  ScenarioConfig cfg = ScenarioConfig::study2_defaults(ModelKind::normal, 5, 31);
  const auto sim = generate(cfg);
  const std::string dir = temp_dir();
  save_dataset(sim.data, dir + "/d.csv");
  const Dataset loaded = load_dataset(dir + "/d.csv");
  REQUIRE(loaded.size() == sim.data.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    REQUIRE(loaded.subjects[i].response == sim.data.subjects[i].response);
    REQUIRE(loaded.subjects[i].curves[0].values == sim.data.subjects[i].curves[0].values);
    REQUIRE(loaded.subjects[i].curves[1].grid == sim.data.subjects[i].curves[1].grid);
  }

  // shuffle rows of a small file by hand: curve rows before the response,
  // descending t; the loader sorts them back
  const std::string shuffled = dir + "/shuffled.csv";
  {
    std::ofstream out(shuffled);
    out << "subject_id,kind,covariate_id,t,value\n";
    out << "1,curve,1,0.9,3.5\n";
    out << "1,curve,1,0.1,1.5\n";
    out << "1,scalar,1,,2.25\n";
    out << "1,curve,1,0.5,2.5\n";
    out << "1,response,,,7.125\n";
  }
  const Dataset small = load_dataset(shuffled);
  REQUIRE(small.subjects[0].response == 7.125);
  REQUIRE(small.subjects[0].scalars[0] == 2.25);
  REQUIRE(small.subjects[0].curves[0].grid == std::vector<double>{0.1, 0.5, 0.9});
  REQUIRE(small.subjects[0].curves[0].values == std::vector<double>{1.5, 2.5, 3.5});
}

TEST_CASE("dataset validation errors name the offending row or subject") {
  const std::string dir = temp_dir();
  {
    std::ofstream out(dir + "/no_response.csv");
    out << "subject_id,kind,covariate_id,t,value\n";
    out << "3,curve,1,0.1,1.0\n";
    out << "3,curve,1,0.2,2.0\n";
  }
  REQUIRE_THROWS_WITH(load_dataset(dir + "/no_response.csv"),
                      Catch::Matchers::ContainsSubstring("subject 3"));

  {
    std::ofstream out(dir + "/dup_t.csv");
    out << "subject_id,kind,covariate_id,t,value\n";
    out << "1,response,,,1.0\n";
    out << "1,curve,1,0.5,1.0\n";
    out << "1,curve,1,0.5,2.0\n";
  }
  REQUIRE_THROWS_WITH(load_dataset(dir + "/dup_t.csv"),
                      Catch::Matchers::ContainsSubstring("non-increasing"));

  {
    std::ofstream out(dir + "/bad_kind.csv");
    out << "subject_id,kind,covariate_id,t,value\n";
    out << "1,response,,,1.0\n";
    out << "1,wiggle,1,0.5,1.0\n";
  }
  REQUIRE_THROWS_WITH(load_dataset(dir + "/bad_kind.csv"), Catch::Matchers::ContainsSubstring(":3"));

  {
    std::ofstream out(dir + "/bad_cov.csv");
    out << "subject_id,kind,covariate_id,t,value\n";
    out << "1,response,,,1.0\n";
    out << "1,curve,0,0.5,1.0\n";
  }
  REQUIRE_THROWS_AS(load_dataset(dir + "/bad_cov.csv"), std::runtime_error);
}

TEST_CASE("design dimensions, layout coverage, single-basis reconstruction") {
  // scalar-only dataset: intercept + scalars
  Dataset flat;
  flat.num_scalars = 2;
  flat.num_curves = 0;
  for (int i = 0; i < 4; ++i) {
    Subject s;
    s.id = i + 1;
    s.response = double(i);
    s.scalars = {double(i), 1.0 - i};
    flat.subjects.push_back(s);
  }
  const Design d0 = build_design(flat, DesignConfig{});
  REQUIRE(d0.layout.dim() == 3);
  REQUIRE(d0.x.cols() == 3);
  REQUIRE(d0.x.col(0) == Eigen::VectorXd::Ones(4));

  ScenarioConfig cfg;
  cfg.n = 6;
  cfg.seed = 2;
  const auto sim = generate(cfg);
  DesignConfig dc;
  dc.basis_k = 7;
  dc.basis_k_override[2] = 5;
  const Design design = build_design(sim.data, dc);
  REQUIRE(design.layout.dim() == 1 + 7 + 5);
  REQUIRE(design.x.cols() == design.layout.dim());

  // layout names are unique and every column is owned by exactly one block
  std::set<std::string> names;
  for (const auto& c : design.layout.coefs) names.insert(c.name);
  REQUIRE(names.size() == std::size_t(design.layout.dim()));
  const auto [f1, l1] = design.layout.block(1);
  const auto [f2, l2] = design.layout.block(2);
  REQUIRE(f1 == 1);
  REQUIRE(l1 == 8);
  REQUIRE(f2 == 8);
  REQUIRE(l2 == 13);

  // a one-hot coefficient in block (j, k) reconstructs B_k on the grid
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.layout.dim());
  beta[f1 + 3] = 1.0;
  std::vector<double> grid;
  for (int j = 0; j <= 40; ++j) grid.push_back(16.0 + 44.0 * j / 40.0);
  const auto w = weight_function(design, beta, 1, grid);
  for (std::size_t j = 0; j < grid.size(); ++j)
    REQUIRE(w[j] == Catch::Approx(eval_basis(design.linear_specs[0], grid[j])[3]).margin(1e-14));

  // nonlinear layout: tensor blocks of k_value * k_time entries
  DesignConfig nl;
  nl.nonlinear = true;
  nl.tensor_k_time = 5;
  nl.tensor_k_value = 4;
  const Design tensor_design = build_design(sim.data, nl);
  REQUIRE(tensor_design.layout.dim() == 1 + 2 * 20);
}

TEST_CASE("config: defaults, schema rejection, zimp link restriction") {
  const KeyValueFile kv = KeyValueFile::parse("model = zimp\niterations = 500\n# comment\nseed = 9\n");
  RunConfig cfg = parse_run_config(kv);
  REQUIRE(cfg.model == ModelKind::zimp);
  REQUIRE(cfg.chain.iterations == 500);
  REQUIRE(cfg.chain.seed == 9);
  REQUIRE(cfg.design.basis_k == 8);
  REQUIRE(cfg.hpd_level == 0.95);

  REQUIRE_THROWS_WITH(parse_run_config(KeyValueFile::parse("modle = normal\n")),
                      Catch::Matchers::ContainsSubstring("unknown key"));
  REQUIRE_THROWS_AS(parse_run_config(KeyValueFile::parse("model = zimp\nlink = probit\n")),
                    std::runtime_error);
  REQUIRE_THROWS_AS(KeyValueFile::parse("a = 1\na = 2\n"), std::runtime_error);
  REQUIRE_THROWS_AS(parse_run_config(KeyValueFile::parse("standardize_curves = maybe\n")),
                    std::runtime_error);

  const KeyValueFile perk = KeyValueFile::parse("basis_k = 6\nbasis_k_2 = 9\n");
  RunConfig cfg2 = parse_run_config(perk);
  REQUIRE(cfg2.design.basis_k_override.at(2) == 9);
}

TEST_CASE("persisted traces summarize identically to the in-run object") {
  ScenarioConfig sim;
  sim.n = 30;
  sim.seed = 6;
  const auto data = generate(sim);
  RunConfig cfg;
  cfg.chain.iterations = 200;
  cfg.chain.burnin = 100;
  cfg.chain.thin = 5;
  cfg.chain.seed = 55;
  const auto result = run_fit(cfg, data.data);

  const std::string dir = temp_dir();
  save_trace(result.trace, dir + "/trace.csv");
  const Trace loaded = load_trace(dir + "/trace.csv");
  REQUIRE(loaded.names == result.trace.names);
  REQUIRE(loaded.draws == result.trace.draws);
  REQUIRE(loaded.gamma_draws == result.trace.gamma_draws);

  const auto fs1 = summarize_normal_trace(result.trace, 0.95, {-5, 0, 5, 10});
  const auto fs2 = summarize_normal_trace(loaded, 0.95, {-5, 0, 5, 10});
  REQUIRE(same_summary(fs1, fs2));
}

TEST_CASE("run_to_files writes identical outputs for identical config and seed") {
  ScenarioConfig sim;
  sim.n = 25;
  sim.seed = 12;
  const auto data = generate(sim);
  const std::string dir = temp_dir();
  save_dataset(data.data, dir + "/data.csv");

  KeyValueFile kv = KeyValueFile::parse("model = normal\niterations = 150\nburnin = 50\nthin = 5\nseed = 2\n");
  const RunConfig cfg = parse_run_config(kv);
  run_to_files(kv, cfg, dir + "/data.csv", dir + "/run1");
  run_to_files(kv, cfg, dir + "/data.csv", dir + "/run2");
  REQUIRE(slurp(dir + "/run1/trace.csv") == slurp(dir + "/run2/trace.csv"));
  REQUIRE(slurp(dir + "/run1/summary.csv") == slurp(dir + "/run2/summary.csv"));

  const std::string manifest = slurp(dir + "/run1/manifest.txt");
  REQUIRE(manifest.find("seed = 2") != std::string::npos);
  REQUIRE(manifest.find("iterations = 150") != std::string::npos);
  REQUIRE(manifest.find(dir + "/data.csv") != std::string::npos);

  // vb path writes a state file instead of a trace
  KeyValueFile kvv = KeyValueFile::parse("model = normal\nengine = vb\nseed = 2\nmax_sweeps = 40\n");
  run_to_files(kvv, parse_run_config(kvv), dir + "/data.csv", dir + "/run_vb");
  REQUIRE(std::filesystem::exists(dir + "/run_vb/vb_state.csv"));
  REQUIRE(!std::filesystem::exists(dir + "/run_vb/trace.csv"));
}

TEST_CASE("bench aggregates stubbed cell timings and flags misordered cells") {
  BenchConfig cfg;
  cfg.sizes = {100, 300};
  cfg.models = {ModelKind::normal};
  cfg.replicates = 2;
  cfg.threads = 2;
  // stub: gibbs takes n/100 and n/100 + 2 seconds; vb takes a flat second
  int calls = 0;
  cfg.cell_runner = [&calls](ModelKind, int n, std::uint64_t) {
    const double base = n / 100.0;
    return std::make_pair(base + 2.0 * (calls++ % 2), 1.0);
  };
  const auto cells = bench(cfg);
  REQUIRE(cells.size() == 4);
  // n = 100 gibbs cell: timings 1 and 3 -> mean 2/60 min, sd sqrt(2)/60
  const auto& g100 = cells[0];
  REQUIRE(g100.engine == EngineKind::gibbs);
  REQUIRE(g100.replicates == 2);
  REQUIRE(g100.mean_minutes * 60.0 == Catch::Approx(2.0).margin(1e-9));
  REQUIRE(g100.sd_minutes * 60.0 == Catch::Approx(std::sqrt(2.0)).margin(1e-9));
  const auto& v100 = cells[1];
  REQUIRE(v100.engine == EngineKind::vb);
  REQUIRE(v100.mean_minutes * 60.0 == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(v100.sd_minutes == 0.0);

  // single replicate reports sd = 0
  BenchConfig single = cfg;
  single.replicates = 1;
  single.cell_runner = [](ModelKind, int, std::uint64_t) { return std::make_pair(3.0, 1.0); };
  const auto one = bench(single);
  REQUIRE(one[0].sd_minutes == 0.0);

  // the soft ordering check logs rather than fails
  BenchConfig slow_vb = cfg;
  slow_vb.cell_runner = [](ModelKind, int, std::uint64_t) { return std::make_pair(1.0, 5.0); };
  std::vector<std::string> notes;
  bench(slow_vb, [&](const std::string& msg) { notes.push_back(msg); });
  REQUIRE(notes.size() == 2);
  REQUIRE(notes[0].find("did not beat") != std::string::npos);
}

TEST_CASE("cell_runner stub sees the full grid once per replicate") {
  BenchConfig cfg;
  cfg.sizes = {100, 300, 500};
  cfg.models = {ModelKind::normal, ModelKind::zimp};
  cfg.replicates = 1;
  int calls = 0;
  cfg.cell_runner = [&calls](ModelKind, int, std::uint64_t) {
    ++calls;
    return std::make_pair(1.0, 0.5);
  };
  const auto cells = bench(cfg);
  REQUIRE(calls == 6);
  REQUIRE(cells.size() == 12);  // 3 sizes x 2 models x 2 engines
}
