#pragma once

// Text formats: sample files (delimited text) and JSON forms of the model,
// ground-truth specification, estimator configuration and trace.
//
// Sample file layout:
//   # free-form comment lines start with '#'
//   y1,y2,...,yd[,label]
//   <one sample per row, comma separated, full double precision>
// The optional trailing `label` column holds the generating component
// (0-based) and is ignored when fitting.

#include <dgmm/estimator.hpp>
#include <dgmm/model.hpp>

#include <json.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dgmm {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- samples

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_samples_csv(const std::string& path, const Matrix& data,
                              const std::vector<int>* labels = nullptr,
                              const std::string& comment = "") {
  require(labels == nullptr || static_cast<Index>(labels->size()) == data.rows(),
          Errc::shape_mismatch, "label count differs from sample count");
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::io, "cannot open '" + path + "' for writing");
  if (!comment.empty()) {
    std::istringstream lines(comment);
    for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
  }
  for (Index i = 0; i < data.cols(); ++i) out << (i ? "," : "") << 'y' << i + 1;
  if (labels) out << ",label";
  out << '\n';
  for (Index n = 0; n < data.rows(); ++n) {
    for (Index i = 0; i < data.cols(); ++i) out << (i ? "," : "") << format_double(data(n, i));
    if (labels) out << ',' << (*labels)[static_cast<std::size_t>(n)];
    out << '\n';
  }
  require(static_cast<bool>(out), Errc::io, "write to '" + path + "' failed");
}

struct LoadedSamples {
  Matrix data;
  std::vector<int> labels;  // empty when the file has no label column
};

inline LoadedSamples read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path + "'");
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    return cells;
  };
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    header = split(line);
    break;
  }
  require(!header.empty(), Errc::io, "'" + path + "' has no header row");
  const bool has_label = header.back() == "label";
  const std::size_t d = header.size() - (has_label ? 1 : 0);
  require(d >= 1, Errc::io, "'" + path + "' has no coordinate columns");
  for (std::size_t i = 0; i < d; ++i) {
    require(header[i] == "y" + std::to_string(i + 1), Errc::io,
            "'" + path + "': expected column 'y" + std::to_string(i + 1) + "', got '" + header[i] + "'");
  }
  std::vector<double> values;
  LoadedSamples out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    require(cells.size() == header.size(), Errc::io,
            "'" + path + "' line " + std::to_string(line_no) + ": expected " +
                std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    for (std::size_t i = 0; i < d; ++i) {
      const char* s = cells[i].c_str();
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(s, &end);
      require(end != s && *end == '\0' && errno != ERANGE && std::isfinite(v), Errc::io,
              "'" + path + "' line " + std::to_string(line_no) + ": bad number '" + cells[i] + "'");
      values.push_back(v);
    }
    if (has_label) out.labels.push_back(std::stoi(cells.back()));
  }
  const Index N = static_cast<Index>(values.size() / d);
  require(N >= 1, Errc::empty_sample, "'" + path + "' contains no samples");
  out.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), N, static_cast<Index>(d));
  return out;
}

// ------------------------------------------------------------------- JSON

inline Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from_json(const Json& j) {
  require(j.is_array(), Errc::invalid_argument, "expected a numeric array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = j[i].get<double>();
  return v;
}

/// Row-major nested arrays.
inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

inline Matrix matrix_from_json(const Json& j, Index cols_if_empty = 0) {
  require(j.is_array(), Errc::invalid_argument, "expected an array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : cols_if_empty;
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    require(static_cast<Index>(j[static_cast<std::size_t>(r)].size()) == cols, Errc::shape_mismatch,
            "ragged matrix rows");
    m.row(r) = vector_from_json(j[static_cast<std::size_t>(r)]).transpose();
  }
  return m;
}

/// Rejects keys outside `allowed` so that typos in configuration files fail loudly.
inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), Errc::invalid_argument, where + " must be an object");
  for (const auto& item : j.items()) {
    require(allowed.count(item.key()) > 0, Errc::invalid_argument,
            "unknown key '" + item.key() + "' in " + where);
  }
}

inline Json params_to_json(const MixtureParams& p) {
  Json j;
  j["K"] = p.components();
  j["d"] = p.dim();
  j["R_max"] = p.max_rank();
  j["weights"] = vector_to_json(p.weights);
  Json centers = Json::array(), factors = Json::array();
  for (int c = 0; c < p.components(); ++c) {
    centers.push_back(vector_to_json(p.centers[static_cast<std::size_t>(c)]));
    factors.push_back(matrix_to_json(p.factors[static_cast<std::size_t>(c)]));
  }
  j["centers"] = std::move(centers);
  j["factors"] = std::move(factors);
  return j;
}

inline MixtureParams params_from_json(const Json& j) {
  check_keys(j, {"K", "d", "R_max", "weights", "centers", "factors"}, "mixture parameters");
  const int K = j.at("K").get<int>(), d = j.at("d").get<int>(), R = j.at("R_max").get<int>();
  require(K >= 1 && d >= 1 && R >= 1, Errc::invalid_argument, "K, d, R_max must be positive");
  MixtureParams p(K, d, R);
  p.weights = vector_from_json(j.at("weights"));
  require(j.at("centers").size() == static_cast<std::size_t>(K) &&
              j.at("factors").size() == static_cast<std::size_t>(K),
          Errc::shape_mismatch, "need K centers and K factors");
  for (int c = 0; c < K; ++c) {
    p.centers[static_cast<std::size_t>(c)] = vector_from_json(j.at("centers")[static_cast<std::size_t>(c)]);
    p.factors[static_cast<std::size_t>(c)] = matrix_from_json(j.at("factors")[static_cast<std::size_t>(c)], R);
  }
  p.validate();
  return p;
}

inline const char* rank_mode_name(RankMode m) {
  return m == RankMode::identical ? "identical" : "uniform-random";
}

inline RankMode parse_rank_mode(const std::string& s) {
  if (s == "identical") return RankMode::identical;
  if (s == "uniform-random") return RankMode::uniform_random;
  throw Error(Errc::invalid_argument, "unknown rank_mode '" + s + "'");
}

/// Ground truth specification without its seed (seeds come from the experiment).
inline Json truth_spec_to_json(const GroundTruthSpec& s) {
  Json j;
  j["K"] = s.K;
  j["d"] = s.d;
  j["R_max"] = s.R_max;
  j["rank_mode"] = rank_mode_name(s.rank_mode);
  if (s.ranks) j["ranks"] = *s.ranks;
  if (s.weights) j["weights"] = *s.weights;
  j["lambda_min"] = s.lambda_min;
  j["lambda_max"] = s.lambda_max;
  return j;
}

inline GroundTruthSpec truth_spec_from_json(const Json& j) {
  check_keys(j, {"K", "d", "R_max", "rank_mode", "ranks", "weights", "lambda_min", "lambda_max"},
             "truth");
  GroundTruthSpec s;
  s.K = j.value("K", s.K);
  s.d = j.value("d", s.d);
  s.R_max = j.value("R_max", s.R_max);
  if (j.contains("rank_mode")) s.rank_mode = parse_rank_mode(j["rank_mode"].get<std::string>());
  if (j.contains("ranks")) s.ranks = j["ranks"].get<std::vector<int>>();
  if (j.contains("weights")) s.weights = j["weights"].get<std::vector<double>>();
  s.lambda_min = j.value("lambda_min", s.lambda_min);
  s.lambda_max = j.value("lambda_max", s.lambda_max);
  s.validate();
  return s;
}

inline Json estimator_config_to_json(const EstimatorConfig& c) {
  Json j;
  j["method"] = method_name(c.method);
  j["L"] = c.L;
  j["T"] = c.T;
  j["eps_theta"] = c.eps_theta;
  j["max_iterations"] = c.max_iterations;
  j["tau"] = c.tau;
  j["kernel"] = kernel_choice_name(c.kernel);
  j["landmarks"] = c.landmarks;
  j["jitter"] = c.jitter;
  j["cholesky_tol"] = c.cholesky_tol;
  j["kernel_seed"] = c.kernel_seed;
  j["exact_guard"] = c.exact_guard;
  j["lbfgs_memory"] = c.lbfgs_memory;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["gmm_regularization"] = c.gmm_regularization;
  j["threads"] = c.threads;
  if (c.fixed_weights) j["fixed_weights"] = vector_to_json(*c.fixed_weights);
  return j;
}

/// Overlays the keys present in `j` onto `base`.
inline EstimatorConfig estimator_config_from_json(const Json& j, EstimatorConfig c = {}) {
  check_keys(j,
             {"method", "L", "T", "eps_theta", "max_iterations", "tau", "kernel", "landmarks", "jitter",
              "cholesky_tol", "kernel_seed", "exact_guard", "lbfgs_memory", "c1", "c2",
              "gmm_regularization", "threads", "fixed_weights"},
             "estimator");
  if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
  c.L = j.value("L", c.L);
  c.T = j.value("T", c.T);
  c.eps_theta = j.value("eps_theta", c.eps_theta);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.tau = j.value("tau", c.tau);
  if (j.contains("kernel")) c.kernel = parse_kernel_choice(j["kernel"].get<std::string>());
  c.landmarks = j.value("landmarks", c.landmarks);
  c.jitter = j.value("jitter", c.jitter);
  c.cholesky_tol = j.value("cholesky_tol", c.cholesky_tol);
  c.kernel_seed = j.value("kernel_seed", c.kernel_seed);
  c.exact_guard = j.value("exact_guard", c.exact_guard);
  c.lbfgs_memory = j.value("lbfgs_memory", c.lbfgs_memory);
  c.c1 = j.value("c1", c.c1);
  c.c2 = j.value("c2", c.c2);
  c.gmm_regularization = j.value("gmm_regularization", c.gmm_regularization);
  c.threads = j.value("threads", c.threads);
  if (j.contains("fixed_weights")) c.fixed_weights = vector_from_json(j["fixed_weights"]);
  c.validate();
  return c;
}

inline Json trace_to_json(const EstimationTrace& t) {
  Json j;
  j["method"] = t.method;
  j["kernel_mode"] = t.kernel_mode;
  j["landmarks"] = t.landmarks;
  j["setup_seconds"] = t.setup_seconds;
  j["total_seconds"] = t.total_seconds;
  j["termination"] = t.termination;
  j["total_iterations"] = t.total_iterations();
  Json steps = Json::array();
  for (const auto& s : t.steps) {
    Json js;
    js["step"] = s.step;
    js["weights"] = vector_to_json(s.weights);
    if (std::isfinite(s.condition)) js["condition"] = s.condition;
    js["weighting_degenerate"] = s.weighting_degenerate;
    js["objective"] = s.objective;
    js["iterations"] = s.iterations;
    js["evaluations"] = s.evaluations;
    js["solver_status"] = s.solver_status;
    js["seconds"] = s.seconds;
    js["theta_change"] = s.theta_change;
    js["objective_history"] = s.objective_history;
    js["theta"] = vector_to_json(s.theta);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  return j;
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::io, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), Errc::io, "write to '" + path + "' failed");
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::io, "'" + path + "': " + e.what());
  }
}

}  // namespace dgmm
