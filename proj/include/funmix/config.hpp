#pragma once

// Flat key=value run configuration. Keys are validated against the schema of
// the consuming subcommand; unknown keys are rejected so typos fail loudly.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "funmix/design.hpp"
#include "funmix/glm.hpp"

namespace funmix {

class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  static KeyValueFile parse(const std::string& text) {
    KeyValueFile kv;
    std::stringstream ss(text);
    std::string line;
    long line_no = 0;
    while (std::getline(ss, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config: missing '=' on line " + std::to_string(line_no));
      const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (key.empty()) throw std::runtime_error("config: empty key on line " + std::to_string(line_no));
      if (kv.values_.count(key)) throw std::runtime_error("config: duplicate key '" + key + "'");
      kv.values_[key] = value;
    }
    return kv;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "inf") return std::numeric_limits<double>::infinity();
    try {
      return std::stod(it->second);
    } catch (...) {
      throw std::runtime_error("config: key '" + key + "' is not numeric");
    }
  }

  long get_long(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stol(it->second);
    } catch (...) {
      throw std::runtime_error("config: key '" + key + "' is not an integer");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config: key '" + key + "' is not a boolean");
  }

  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
  }

  void reject_unknown(const std::set<std::string>& allowed, const std::string& context) const {
    for (const auto& [key, value] : values_) {
      bool ok = allowed.count(key) > 0;
      if (!ok && key.rfind("basis_k_", 0) == 0) ok = true;  // per-covariate overrides
      if (!ok)
        throw std::runtime_error("config: unknown key '" + key + "' for " + context);
    }
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class ModelKind { normal, zimp };
enum class EngineKind { gibbs, vb };

struct ChainConfig {
  long iterations = 15000;
  long burnin = 10000;
  long thin = 100;
  std::uint64_t seed = 1;

  void validate() const {
    if (iterations <= burnin) throw std::invalid_argument("chain config: iterations must exceed burnin");
    if (thin < 1) throw std::invalid_argument("chain config: thin must be >= 1");
  }
  long stored() const { return (iterations - burnin) / thin; }
};

struct CaviConfig {
  int max_sweeps = 500;
  double tol = 1e-6;
  bool em_refresh = false;
  std::uint64_t seed = 1;
};

struct PriorConfig {
  // normal mixture
  double tau0_sq = 100.0;
  double tau1_sq = 100.0;
  double a0 = 2.0;
  double b0 = 2.0;
  // zimp
  double a1 = 1.0, b1 = 0.5, a2 = 1.0, b2 = 0.1;
  // coefficients; the Gaussian default keeps coefficient modes bounded
  // when the fitted memberships separate sharply (the EM-refreshed t
  // scales have no finite mode under exact separation)
  double coef_df = std::numeric_limits<double>::infinity();
  double coef_scale = 2.5;
  double coef_scale_intercept = 10.0;

  CoefPrior make_coef_prior(int dim) const {
    CoefPrior prior = std::isinf(coef_df) ? CoefPrior::gaussian(dim, coef_scale)
                                          : CoefPrior::student_t(dim, coef_df, coef_scale);
    prior.scale[0] = coef_scale_intercept;
    prior.current_scales[0] = coef_scale_intercept * coef_scale_intercept;
    return prior;
  }
};

struct RunConfig {
  ModelKind model = ModelKind::normal;
  EngineKind engine = EngineKind::gibbs;
  LinkKind link = LinkKind::logit;
  DesignConfig design;
  PriorConfig prior;
  ChainConfig chain;
  CaviConfig cavi;
  double hpd_level = 0.95;
  std::vector<double> ppc_thresholds{-5.0, 0.0, 5.0, 10.0};
  std::string output_dir = ".";
  int threads = 1;
};

inline const std::set<std::string>& fit_config_keys() {
  static const std::set<std::string> keys{
      "model", "engine", "link", "functional_model", "basis_k", "tensor_k_time", "tensor_k_value",
      "knot_placement", "standardize_curves", "clip_tensor_values",
      "tau0_sq", "tau1_sq", "a0", "b0", "a1", "b1", "a2", "b2",
      "coef_df", "coef_scale", "coef_scale_intercept",
      "iterations", "burnin", "thin", "max_sweeps", "tol", "vb_em_refresh",
      "seed", "hpd_level", "ppc_thresholds", "output_dir", "threads"};
  return keys;
}

inline RunConfig parse_run_config(const KeyValueFile& kv) {
  kv.reject_unknown(fit_config_keys(), "fit");
  RunConfig cfg;

  const std::string model = kv.get_string("model", "normal");
  if (model == "normal") cfg.model = ModelKind::normal;
  else if (model == "zimp") cfg.model = ModelKind::zimp;
  else throw std::runtime_error("config: model must be normal or zimp");

  const std::string engine = kv.get_string("engine", "gibbs");
  if (engine == "gibbs") cfg.engine = EngineKind::gibbs;
  else if (engine == "vb") cfg.engine = EngineKind::vb;
  else throw std::runtime_error("config: engine must be gibbs or vb");

  const std::string link = kv.get_string("link", "logit");
  if (link == "logit") cfg.link = LinkKind::logit;
  else if (link == "probit") cfg.link = LinkKind::probit;
  else throw std::runtime_error("config: link must be logit or probit");
  if (cfg.model == ModelKind::zimp && cfg.link != LinkKind::logit)
    throw std::runtime_error("config: the zero-inflated Poisson model uses the logit link");

  const std::string fmodel = kv.get_string("functional_model", "linear");
  if (fmodel == "linear") cfg.design.nonlinear = false;
  else if (fmodel == "nonlinear") cfg.design.nonlinear = true;
  else throw std::runtime_error("config: functional_model must be linear or nonlinear");

  cfg.design.basis_k = int(kv.get_long("basis_k", cfg.design.basis_k));
  cfg.design.tensor_k_time = int(kv.get_long("tensor_k_time", cfg.design.tensor_k_time));
  cfg.design.tensor_k_value = int(kv.get_long("tensor_k_value", cfg.design.tensor_k_value));
  for (const auto& [key, value] : kv.entries())
    if (key.rfind("basis_k_", 0) == 0)
      cfg.design.basis_k_override[std::stoi(key.substr(8))] = std::stoi(value);

  const std::string knots = kv.get_string("knot_placement", "equal");
  if (knots == "equal") cfg.design.quantile_knots = false;
  else if (knots == "quantile") cfg.design.quantile_knots = true;
  else throw std::runtime_error("config: knot_placement must be equal or quantile");

  cfg.design.standardize_curves = kv.get_bool("standardize_curves", false);
  cfg.design.clip_tensor_values = kv.get_bool("clip_tensor_values", true);

  cfg.prior.tau0_sq = kv.get_double("tau0_sq", cfg.prior.tau0_sq);
  cfg.prior.tau1_sq = kv.get_double("tau1_sq", cfg.prior.tau1_sq);
  cfg.prior.a0 = kv.get_double("a0", cfg.prior.a0);
  cfg.prior.b0 = kv.get_double("b0", cfg.prior.b0);
  cfg.prior.a1 = kv.get_double("a1", cfg.prior.a1);
  cfg.prior.b1 = kv.get_double("b1", cfg.prior.b1);
  cfg.prior.a2 = kv.get_double("a2", cfg.prior.a2);
  cfg.prior.b2 = kv.get_double("b2", cfg.prior.b2);
  cfg.prior.coef_df = kv.get_double("coef_df", cfg.prior.coef_df);
  cfg.prior.coef_scale = kv.get_double("coef_scale", cfg.prior.coef_scale);
  cfg.prior.coef_scale_intercept = kv.get_double("coef_scale_intercept", cfg.prior.coef_scale_intercept);

  cfg.chain.iterations = kv.get_long("iterations", cfg.chain.iterations);
  cfg.chain.burnin = kv.get_long("burnin", cfg.chain.burnin);
  cfg.chain.thin = kv.get_long("thin", cfg.chain.thin);
  cfg.chain.seed = std::uint64_t(kv.get_long("seed", 1));
  cfg.cavi.max_sweeps = int(kv.get_long("max_sweeps", cfg.cavi.max_sweeps));
  cfg.cavi.tol = kv.get_double("tol", cfg.cavi.tol);
  cfg.cavi.em_refresh = kv.get_bool("vb_em_refresh", false);
  cfg.cavi.seed = cfg.chain.seed;

  cfg.hpd_level = kv.get_double("hpd_level", cfg.hpd_level);
  cfg.ppc_thresholds = kv.get_double_list("ppc_thresholds", cfg.ppc_thresholds);
  cfg.output_dir = kv.get_string("output_dir", cfg.output_dir);
  cfg.threads = int(kv.get_long("threads", 1));
  return cfg;
}

}  // namespace funmix
