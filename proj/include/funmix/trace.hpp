#pragma once

// Stored posterior draws. Parameter columns carry layout names; latent class
// labels are stored per subject under gamma:<subject_id> so a persisted
// trace summarizes identically to the in-run object.

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "funmix/dataset.hpp"

namespace funmix {

struct Trace {
  std::vector<std::string> names;  // parameter columns
  Eigen::MatrixXd draws;           // stored x parameters
  std::vector<long> subject_ids;
  std::vector<std::vector<int>> gamma_draws;  // stored x subjects, class labels

  std::uint64_t seed = 0;
  long iterations = 0, burnin = 0, thin = 1;
  double wallclock_sec = 0.0;

  long stored() const { return draws.rows(); }

  Eigen::VectorXd column(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return draws.col(Eigen::Index(k));
    throw std::invalid_argument("Trace: no column named " + name);
  }
};

inline void save_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trace: cannot open " + path);
  for (std::size_t k = 0; k < trace.names.size(); ++k) out << (k ? "," : "") << trace.names[k];
  for (long sid : trace.subject_ids) out << ",gamma:" << sid;
  out << "\n";
  for (long m = 0; m < trace.stored(); ++m) {
    for (Eigen::Index k = 0; k < trace.draws.cols(); ++k)
      out << (k ? "," : "") << detail::format_value(trace.draws(m, k));
    for (int g : trace.gamma_draws[m]) out << "," << g;
    out << "\n";
  }
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trace: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_trace: empty file " + path);
  Trace trace;
  for (const std::string& field : detail::split_csv_line(line)) {
    if (field.rfind("gamma:", 0) == 0)
      trace.subject_ids.push_back(std::stol(field.substr(6)));
    else if (trace.subject_ids.empty())
      trace.names.push_back(field);
    else
      throw std::runtime_error("load_trace: parameter column after gamma columns in " + path);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != trace.names.size() + trace.subject_ids.size())
      throw std::runtime_error("load_trace: ragged row in " + path);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(std::stod(f));
    rows.push_back(std::move(row));
  }
  trace.draws.resize(long(rows.size()), long(trace.names.size()));
  trace.gamma_draws.resize(rows.size());
  for (std::size_t m = 0; m < rows.size(); ++m) {
    for (std::size_t k = 0; k < trace.names.size(); ++k) trace.draws(long(m), long(k)) = rows[m][k];
    for (std::size_t i = 0; i < trace.subject_ids.size(); ++i)
      trace.gamma_draws[m].push_back(int(rows[m][trace.names.size() + i]));
  }
  return trace;
}

}  // namespace funmix
