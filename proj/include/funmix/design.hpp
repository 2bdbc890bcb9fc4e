#pragma once

// Design-matrix assembly: row i = (1, z_i, R_i1, ..., R_iJ) with an explicit
// intercept, where each functional block comes from the linear or the
// tensor-product construction. The layout maps every column back to its
// origin so coefficient blocks stay addressable for weight reconstruction.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "funmix/bspline.hpp"
#include "funmix/dataset.hpp"

namespace funmix {

struct CoefRef {
  enum class Kind { intercept, scalar, functional, tensor };
  Kind kind = Kind::intercept;
  int covariate = 0;  // 1-based; 0 for intercept
  int k1 = 0;         // basis index (linear) or value-basis index (tensor)
  int k2 = 0;         // time-basis index (tensor)
  std::string name;
};

struct DesignLayout {
  std::vector<CoefRef> coefs;

  int dim() const { return int(coefs.size()); }

  // [first, last) column range of functional block j (1-based covariate).
  std::pair<int, int> block(int covariate) const {
    int first = -1, last = -1;
    for (int d = 0; d < dim(); ++d) {
      const auto& c = coefs[d];
      const bool in_block = (c.kind == CoefRef::Kind::functional || c.kind == CoefRef::Kind::tensor) &&
                            c.covariate == covariate;
      if (in_block && first < 0) first = d;
      if (in_block) last = d + 1;
    }
    if (first < 0) throw std::invalid_argument("DesignLayout::block: no such covariate block");
    return {first, last};
  }
};

struct DesignConfig {
  bool nonlinear = false;
  int basis_k = 8;                       // K per covariate, linear model
  std::map<int, int> basis_k_override;   // per 1-based covariate
  int tensor_k_time = 6;
  int tensor_k_value = 6;
  bool quantile_knots = false;
  bool standardize_curves = false;
  bool clip_tensor_values = true;
  double value_domain_expand = 0.01;
};

struct Design {
  Eigen::MatrixXd x;
  DesignLayout layout;
  std::vector<BasisSpec> linear_specs;        // per covariate when linear
  std::vector<TensorBasisSpec> tensor_specs;  // per covariate when nonlinear
  std::vector<long> subject_ids;
};

namespace detail {

inline Curve standardized(const Curve& c) {
  double mean = 0.0;
  for (double v : c.values) mean += v;
  mean /= double(c.values.size());
  double var = 0.0;
  for (double v : c.values) var += (v - mean) * (v - mean);
  var /= double(c.values.size());
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  Curve out = c;
  for (double& v : out.values) v = (v - mean) / sd;
  return out;
}

}  // namespace detail

inline Design build_design(const Dataset& data, const DesignConfig& cfg) {
  if (data.subjects.empty()) throw std::invalid_argument("build_design: empty dataset");
  const int n = int(data.size()), p = data.num_scalars, big_j = data.num_curves;

  // curves as used for fitting (optionally standardized per subject)
  std::vector<std::vector<Curve>> curves(n);
  for (int i = 0; i < n; ++i) {
    curves[i].reserve(big_j);
    for (int j = 0; j < big_j; ++j)
      curves[i].push_back(cfg.standardize_curves ? detail::standardized(data.subjects[i].curves[j])
                                                 : data.subjects[i].curves[j]);
  }

  Design design;
  design.subject_ids.reserve(n);
  for (const auto& s : data.subjects) design.subject_ids.push_back(s.id);

  // per-covariate time domains (pooled range) and value domains (pooled,
  // expanded) from the data actually fed to the bases
  std::vector<int> block_size(big_j, 0);
  for (int j = 0; j < big_j; ++j) {
    double t_lo = curves[0][j].grid.front(), t_hi = curves[0][j].grid.back();
    double v_lo = curves[0][j].values[0], v_hi = v_lo;
    std::vector<double> pooled_t;
    for (int i = 0; i < n; ++i) {
      const Curve& c = curves[i][j];
      t_lo = std::min(t_lo, c.grid.front());
      t_hi = std::max(t_hi, c.grid.back());
      for (double v : c.values) {
        v_lo = std::min(v_lo, v);
        v_hi = std::max(v_hi, v);
      }
      if (cfg.quantile_knots) pooled_t.insert(pooled_t.end(), c.grid.begin(), c.grid.end());
    }
    const Domain time_domain(t_lo, t_hi);
    if (!cfg.nonlinear) {
      const auto it = cfg.basis_k_override.find(j + 1);
      const int k = it != cfg.basis_k_override.end() ? it->second : cfg.basis_k;
      design.linear_specs.push_back(cfg.quantile_knots ? make_knots_quantile(time_domain, k, pooled_t)
                                                       : make_knots(time_domain, k));
      block_size[j] = k;
    } else {
      const double pad = cfg.value_domain_expand * std::max(v_hi - v_lo, 1e-12);
      const Domain value_domain(v_lo - pad, v_hi + pad);
      design.tensor_specs.push_back(TensorBasisSpec{make_knots(time_domain, cfg.tensor_k_time),
                                                    make_knots(value_domain, cfg.tensor_k_value)});
      block_size[j] = cfg.tensor_k_time * cfg.tensor_k_value;
    }
  }

  int dim = 1 + p;
  for (int j = 0; j < big_j; ++j) dim += block_size[j];

  design.layout.coefs.push_back({CoefRef::Kind::intercept, 0, 0, 0, "intercept"});
  for (int k = 1; k <= p; ++k)
    design.layout.coefs.push_back({CoefRef::Kind::scalar, k, 0, 0, "z" + std::to_string(k)});
  for (int j = 0; j < big_j; ++j) {
    if (!cfg.nonlinear) {
      for (int k = 0; k < block_size[j]; ++k)
        design.layout.coefs.push_back({CoefRef::Kind::functional, j + 1, k, 0,
                                       "f" + std::to_string(j + 1) + ".b" + std::to_string(k + 1)});
    } else {
      const int kt = design.tensor_specs[j].time_spec.num_basis;
      const int kv = design.tensor_specs[j].value_spec.num_basis;
      for (int k1 = 0; k1 < kv; ++k1)
        for (int k2 = 0; k2 < kt; ++k2)
          design.layout.coefs.push_back({CoefRef::Kind::tensor, j + 1, k1, k2,
                                         "f" + std::to_string(j + 1) + ".b" + std::to_string(k1 + 1) + "x" +
                                             std::to_string(k2 + 1)});
    }
  }

  design.x.resize(n, dim);
  const ValueClip policy = cfg.clip_tensor_values ? ValueClip::clip : ValueClip::error;
  for (int i = 0; i < n; ++i) {
    design.x(i, 0) = 1.0;
    for (int k = 0; k < p; ++k) design.x(i, 1 + k) = data.subjects[i].scalars[k];
    int col = 1 + p;
    for (int j = 0; j < big_j; ++j) {
      const std::vector<double> row = cfg.nonlinear
                                          ? tensor_design_row(curves[i][j], design.tensor_specs[j], policy)
                                          : functional_design_row(curves[i][j], design.linear_specs[j]);
      for (double v : row) design.x(i, col++) = v;
    }
  }
  return design;
}

// Reconstruct the fitted weight function w_j(t) = sum_k phi_jk B_k(t) of a
// linear functional block on a grid.
inline std::vector<double> weight_function(const Design& design, const Eigen::VectorXd& beta, int covariate,
                                           const std::vector<double>& grid) {
  if (design.linear_specs.empty()) throw std::invalid_argument("weight_function: linear model only");
  const auto [first, last] = design.layout.block(covariate);
  std::vector<double> coef(beta.data() + first, beta.data() + last);
  return basis_expansion(design.linear_specs[covariate - 1], coef, grid);
}

}  // namespace funmix
