#pragma once

// Long-format dataset: per subject one response, optional scalar covariates,
// and one curve per functional covariate. CSV schema
// `subject_id,kind,covariate_id,t,value` with kind in {response, scalar,
// curve}; rows may arrive in any order, curve rows are sorted by t on load.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "funmix/bspline.hpp"

namespace funmix {

struct Subject {
  long id = 0;
  double response = 0.0;
  std::vector<double> scalars;
  std::vector<Curve> curves;  // indexed by covariate, 0-based
};

struct Dataset {
  std::vector<Subject> subjects;
  int num_scalars = 0;
  int num_curves = 0;

  std::size_t size() const { return subjects.size(); }

  Eigen::VectorXd responses() const {
    Eigen::VectorXd y(subjects.size());
    for (std::size_t i = 0; i < subjects.size(); ++i) y[i] = subjects[i].response;
    return y;
  }
};

namespace detail {

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out << "subject_id,kind,covariate_id,t,value\n";
  for (const auto& s : data.subjects) {
    out << s.id << ",response,,," << detail::format_value(s.response) << "\n";
    for (std::size_t k = 0; k < s.scalars.size(); ++k)
      out << s.id << ",scalar," << (k + 1) << ",," << detail::format_value(s.scalars[k]) << "\n";
    for (std::size_t j = 0; j < s.curves.size(); ++j)
      for (std::size_t p = 0; p < s.curves[j].grid.size(); ++p)
        out << s.id << ",curve," << (j + 1) << "," << detail::format_value(s.curves[j].grid[p]) << ","
            << detail::format_value(s.curves[j].values[p]) << "\n";
  }
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);

  struct Raw {
    bool has_response = false;
    double response = 0.0;
    std::map<int, double> scalars;
    std::map<int, std::vector<std::pair<double, double>>> curves;
  };
  std::map<long, Raw> raws;

  std::string line;
  long line_no = 0;
  std::getline(in, line);
  ++line_no;
  if (line != "subject_id,kind,covariate_id,t,value")
    throw std::runtime_error("load_dataset: unexpected header in " + path);
  int max_scalar = 0, max_curve = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != 5) throw std::runtime_error("load_dataset: malformed row at " + where);
    long sid;
    try {
      sid = std::stol(fields[0]);
    } catch (...) {
      throw std::runtime_error("load_dataset: bad subject_id at " + where);
    }
    Raw& raw = raws[sid];
    const std::string& kind = fields[1];
    if (kind == "response") {
      if (raw.has_response) throw std::runtime_error("load_dataset: duplicate response at " + where);
      raw.has_response = true;
      raw.response = std::stod(fields[4]);
    } else if (kind == "scalar") {
      const int cid = std::stoi(fields[2]);
      if (cid < 1) throw std::runtime_error("load_dataset: bad scalar covariate_id at " + where);
      if (raw.scalars.count(cid)) throw std::runtime_error("load_dataset: duplicate scalar at " + where);
      raw.scalars[cid] = std::stod(fields[4]);
      max_scalar = std::max(max_scalar, cid);
    } else if (kind == "curve") {
      const int cid = std::stoi(fields[2]);
      if (cid < 1) throw std::runtime_error("load_dataset: unknown covariate id at " + where);
      raw.curves[cid].emplace_back(std::stod(fields[3]), std::stod(fields[4]));
      max_curve = std::max(max_curve, cid);
    } else {
      throw std::runtime_error("load_dataset: unknown kind '" + kind + "' at " + where);
    }
  }

  Dataset data;
  data.num_scalars = max_scalar;
  data.num_curves = max_curve;
  for (auto& [sid, raw] : raws) {
    if (!raw.has_response)
      throw std::runtime_error("load_dataset: subject " + std::to_string(sid) + " has no response");
    Subject s;
    s.id = sid;
    s.response = raw.response;
    s.scalars.resize(max_scalar, 0.0);
    for (auto& [cid, v] : raw.scalars) s.scalars[cid - 1] = v;
    s.curves.resize(max_curve);
    for (auto& [cid, pts] : raw.curves) {
      std::sort(pts.begin(), pts.end());
      Curve& c = s.curves[cid - 1];
      for (auto& [t, v] : pts) {
        if (!c.grid.empty() && !(t > c.grid.back()))
          throw std::runtime_error("load_dataset: non-increasing grid for subject " + std::to_string(sid) +
                                   " covariate " + std::to_string(cid));
        c.grid.push_back(t);
        c.values.push_back(v);
      }
    }
    for (int j = 0; j < max_curve; ++j)
      if (s.curves[j].grid.size() < 2)
        throw std::runtime_error("load_dataset: subject " + std::to_string(sid) + " covariate " +
                                 std::to_string(j + 1) + " has fewer than two curve points");
    data.subjects.push_back(std::move(s));
  }
  return data;
}

}  // namespace funmix
