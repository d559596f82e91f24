#pragma once

// Experiment driver: for every seed, draw a ground truth, a sample and one
// shared initialization, run each configured method from that start, align
// and score the estimates, and write a JSON result file plus one trace file
// per (method, seed) cell.
//
// Seeds: experiment seed s gives the ground truth seed s, the sample seed
// s + 1000 and the initialization seed s + 2000.

#include <dgmm/io.hpp>
#include <dgmm/metrics.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

namespace dgmm {

struct SeedPlan {
  std::uint64_t truth = 0;
  std::uint64_t sample = 0;
  std::uint64_t init = 0;
};

inline SeedPlan seed_plan(std::uint64_t s) { return {s, s + 1000, s + 2000}; }

struct ExperimentConfig {
  std::string name = "experiment";
  GroundTruthSpec truth;
  Index N = 100000;
  std::vector<Method> methods{Method::dgmm};
  EstimatorConfig estimator;  // shared settings; `method` is overridden per cell
  /// Per-method overlays on `estimator`, keyed by method name.
  std::map<std::string, Json> overrides;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "results";
  int repetitions = 3;  // timed repetitions per cell
  int workers = 1;      // cells of one seed run concurrently up to this cap
  CovarianceNorm norm = CovarianceNorm::spectral;
  bool write_files = true;

  EstimatorConfig config_for(Method m) const {
    EstimatorConfig c = estimator;
    c.method = m;
    const auto it = overrides.find(method_name(m));
    if (it != overrides.end()) c = estimator_config_from_json(it->second, c);
    c.method = m;
    return c;
  }

  void validate() const {
    require(!methods.empty(), Errc::invalid_argument, "experiment needs at least one method");
    require(!seeds.empty(), Errc::invalid_argument, "experiment needs at least one seed");
    require(N >= 1, Errc::invalid_argument, "N must be positive");
    require(repetitions >= 1, Errc::invalid_argument, "repetitions must be positive");
    require(workers >= 1, Errc::invalid_argument, "workers must be positive");
    truth.validate();
    for (const auto& kv : overrides) parse_method(kv.first);
    for (Method m : methods) config_for(m).validate();
  }
};

inline const char* norm_name(CovarianceNorm n) {
  return n == CovarianceNorm::spectral ? "spectral" : "frobenius";
}

inline CovarianceNorm parse_norm(const std::string& s) {
  if (s == "spectral") return CovarianceNorm::spectral;
  if (s == "frobenius") return CovarianceNorm::frobenius;
  throw Error(Errc::invalid_argument, "unknown covariance norm '" + s + "'");
}

inline Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  j["truth"] = truth_spec_to_json(c.truth);
  j["N"] = c.N;
  Json methods = Json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  j["methods"] = std::move(methods);
  Json est = estimator_config_to_json(c.estimator);
  est.erase("method");
  j["estimator"] = std::move(est);
  Json ov = Json::object();
  for (const auto& kv : c.overrides) ov[kv.first] = kv.second;
  j["overrides"] = std::move(ov);
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["repetitions"] = c.repetitions;
  j["workers"] = c.workers;
  j["covariance_norm"] = norm_name(c.norm);
  return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  try {
    check_keys(j,
               {"name", "truth", "N", "methods", "estimator", "overrides", "seeds", "output_dir",
                "repetitions", "workers", "covariance_norm"},
               "experiment config");
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    if (j.contains("truth")) c.truth = truth_spec_from_json(j["truth"]);
    c.N = j.value("N", c.N);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("estimator")) {
      require(!j["estimator"].contains("method"), Errc::invalid_argument,
              "set methods in 'methods', not in 'estimator'");
      c.estimator = estimator_config_from_json(j["estimator"]);
    }
    if (j.contains("overrides")) {
      require(j["overrides"].is_object(), Errc::invalid_argument, "'overrides' must be an object");
      for (const auto& item : j["overrides"].items()) {
        const Method m = parse_method(item.key());
        require(!item.value().contains("method"), Errc::invalid_argument,
                "an override may not change the method");
        c.overrides[method_name(m)] = item.value();
      }
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.output_dir = j.value("output_dir", c.output_dir);
    c.repetitions = j.value("repetitions", c.repetitions);
    c.workers = j.value("workers", c.workers);
    if (j.contains("covariance_norm")) c.norm = parse_norm(j["covariance_norm"].get<std::string>());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("experiment config: ") + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json(read_json(path));
}

struct CellResult {
  std::string method;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when !ok
  double err_pi = 0.0;
  double err_mu = 0.0;
  double err_sigma = 0.0;
  std::vector<int> permutation;
  int iterations = 0;
  int steps = 0;
  std::string termination;
  std::vector<double> wall_seconds;  // one entry per repetition
  double wall_mean = 0.0;
  double wall_std = 0.0;
  std::string trace_file;  // relative to the output directory
  std::optional<MixtureParams> estimate;
};

struct Spread {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline Spread spread_of(std::vector<double> v) {
  Spread s;
  if (v.empty()) {
    s.median = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  s.min = v.front();
  s.max = v.back();
  return s;
}

struct MethodSummary {
  std::string method;
  int ok = 0;
  int failed = 0;
  Spread err_pi, err_mu, err_sigma, iterations, wall_mean;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<CellResult> cells;
  std::vector<MethodSummary> summaries;

  const CellResult* find(const std::string& method, std::uint64_t seed) const {
    for (const auto& c : cells)
      if (c.method == method && c.seed == seed) return &c;
    return nullptr;
  }
};

inline std::vector<MethodSummary> summarize(const ExperimentConfig& cfg, const std::vector<CellResult>& cells) {
  std::vector<MethodSummary> out;
  for (Method m : cfg.methods) {
    MethodSummary s;
    s.method = method_name(m);
    std::vector<double> p, mu, sg, it, wt;
    for (const auto& c : cells) {
      if (c.method != s.method) continue;
      if (!c.ok) {
        ++s.failed;
        continue;
      }
      ++s.ok;
      p.push_back(c.err_pi);
      mu.push_back(c.err_mu);
      sg.push_back(c.err_sigma);
      it.push_back(c.iterations);
      wt.push_back(c.wall_mean);
    }
    s.err_pi = spread_of(p);
    s.err_mu = spread_of(mu);
    s.err_sigma = spread_of(sg);
    s.iterations = spread_of(it);
    s.wall_mean = spread_of(wt);
    out.push_back(std::move(s));
  }
  return out;
}

inline Json spread_to_json(const Spread& s) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json j;
  j["median"] = num(s.median);
  j["min"] = num(s.min);
  j["max"] = num(s.max);
  return j;
}

inline Spread spread_from_json(const Json& j) {
  auto get = [&](const char* k) {
    return j.at(k).is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at(k).get<double>();
  };
  return {get("median"), get("min"), get("max")};
}

inline Json result_to_json(const ExperimentResult& r) {
  Json j;
  j["config"] = experiment_config_to_json(r.config);
  Json summaries = Json::array();
  for (const auto& s : r.summaries) {
    Json js;
    js["method"] = s.method;
    js["ok"] = s.ok;
    js["failed"] = s.failed;
    js["err_pi"] = spread_to_json(s.err_pi);
    js["err_mu"] = spread_to_json(s.err_mu);
    js["err_sigma"] = spread_to_json(s.err_sigma);
    js["iterations"] = spread_to_json(s.iterations);
    js["wall_mean"] = spread_to_json(s.wall_mean);
    summaries.push_back(std::move(js));
  }
  j["summaries"] = std::move(summaries);
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json jc;
    jc["method"] = c.method;
    jc["seed"] = c.seed;
    jc["ok"] = c.ok;
    if (!c.ok) jc["error"] = c.error;
    if (c.ok) {
      jc["err_pi"] = c.err_pi;
      jc["err_mu"] = c.err_mu;
      jc["err_sigma"] = c.err_sigma;
      jc["permutation"] = c.permutation;
      jc["iterations"] = c.iterations;
      jc["steps"] = c.steps;
      jc["termination"] = c.termination;
    }
    jc["wall_seconds"] = c.wall_seconds;
    jc["wall_mean"] = c.wall_mean;
    jc["wall_std"] = c.wall_std;
    if (!c.trace_file.empty()) jc["trace_file"] = c.trace_file;
    if (c.estimate) jc["estimate"] = params_to_json(*c.estimate);
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  return j;
}

inline ExperimentResult result_from_json(const Json& j) {
  try {
    ExperimentResult r;
    r.config = experiment_config_from_json(j.at("config"));
    for (const auto& js : j.at("summaries")) {
      MethodSummary s;
      s.method = js.at("method").get<std::string>();
      s.ok = js.at("ok").get<int>();
      s.failed = js.at("failed").get<int>();
      s.err_pi = spread_from_json(js.at("err_pi"));
      s.err_mu = spread_from_json(js.at("err_mu"));
      s.err_sigma = spread_from_json(js.at("err_sigma"));
      s.iterations = spread_from_json(js.at("iterations"));
      s.wall_mean = spread_from_json(js.at("wall_mean"));
      r.summaries.push_back(std::move(s));
    }
    for (const auto& jc : j.at("cells")) {
      CellResult c;
      c.method = jc.at("method").get<std::string>();
      c.seed = jc.at("seed").get<std::uint64_t>();
      c.ok = jc.at("ok").get<bool>();
      if (!c.ok) c.error = jc.at("error").get<std::string>();
      if (c.ok) {
        c.err_pi = jc.at("err_pi").get<double>();
        c.err_mu = jc.at("err_mu").get<double>();
        c.err_sigma = jc.at("err_sigma").get<double>();
        c.permutation = jc.at("permutation").get<std::vector<int>>();
        c.iterations = jc.at("iterations").get<int>();
        c.steps = jc.at("steps").get<int>();
        c.termination = jc.at("termination").get<std::string>();
      }
      c.wall_seconds = jc.at("wall_seconds").get<std::vector<double>>();
      c.wall_mean = jc.at("wall_mean").get<double>();
      c.wall_std = jc.at("wall_std").get<double>();
      c.trace_file = jc.value("trace_file", std::string());
      if (jc.contains("estimate")) c.estimate = params_from_json(jc["estimate"]);
      r.cells.push_back(std::move(c));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("result file: ") + e.what());
  }
}

/// Ground truth, sample and shared initialization for one experiment seed.
struct SeedInstance {
  MixtureParams truth;
  SampleSet sample;
  MixtureParams init;
};

inline SeedInstance make_seed_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SeedPlan plan = seed_plan(seed);
  GroundTruthSpec spec = cfg.truth;
  spec.seed = plan.truth;
  SeedInstance inst;
  inst.truth = generate_ground_truth(spec);
  inst.sample = sample_mixture(inst.truth, cfg.N, plan.sample);
  inst.init = default_initialization(spec.K, spec.d, spec.R_max, plan.init);
  return inst;
}

inline CellResult run_cell(const ExperimentConfig& cfg, Method m, std::uint64_t seed,
                           const SeedInstance& inst, EstimationTrace* trace_out) {
  CellResult c;
  c.method = method_name(m);
  c.seed = seed;
  try {
    const EstimatorConfig ec = cfg.config_for(m);
    std::optional<EstimationResult> first;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      EstimationResult r = run_estimation(inst.sample.data, ec, inst.init);
      c.wall_seconds.push_back(r.trace.total_seconds);
      if (!first) first = std::move(r);
    }
    const auto e = error_metrics(first->params, inst.truth, cfg.norm);
    c.ok = true;
    c.err_pi = e.err_pi;
    c.err_mu = e.err_mu;
    c.err_sigma = e.err_sigma;
    c.permutation = e.permutation;
    c.iterations = first->trace.total_iterations();
    c.steps = static_cast<int>(first->trace.steps.size());
    c.termination = first->trace.termination;
    c.estimate = first->params;
    if (trace_out) *trace_out = std::move(first->trace);
  } catch (const std::exception& ex) {
    c.ok = false;
    c.error = ex.what();
  }
  if (!c.wall_seconds.empty()) {
    const double n = static_cast<double>(c.wall_seconds.size());
    double s = 0.0, ss = 0.0;
    for (double t : c.wall_seconds) s += t;
    c.wall_mean = s / n;
    for (double t : c.wall_seconds) ss += (t - c.wall_mean) * (t - c.wall_mean);
    c.wall_std = c.wall_seconds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return c;
}

/// Runs every (seed, method) cell. Failed cells are recorded and the run
/// continues. With `write_files`, writes <output_dir>/result.json and
/// <output_dir>/traces/<method>_seed<s>.json.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.output_dir);
  if (cfg.write_files) {
    std::error_code ec;
    fs::create_directories(out_dir / "traces", ec);
    require(!ec, Errc::io, "cannot create '" + (out_dir / "traces").string() + "': " + ec.message());
  }
  ExperimentResult result;
  result.config = cfg;
  std::mutex io_mutex;
  for (std::uint64_t seed : cfg.seeds) {
    const SeedInstance inst = make_seed_instance(cfg, seed);
    const std::size_t n_methods = cfg.methods.size();
    std::vector<CellResult> cells(n_methods);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n_methods; i = next++) {
        EstimationTrace trace;
        cells[i] = run_cell(cfg, cfg.methods[i], seed, inst, &trace);
        if (cfg.write_files && cells[i].ok) {
          const std::string rel = "traces/" + cells[i].method + "_seed" + std::to_string(seed) + ".json";
          std::lock_guard<std::mutex> lock(io_mutex);
          write_json((out_dir / rel).string(), trace_to_json(trace));
          cells[i].trace_file = rel;
        }
      }
    };
    const int n_workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), n_methods));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& c : cells) result.cells.push_back(std::move(c));
  }
  result.summaries = summarize(cfg, result.cells);
  if (cfg.write_files) write_json((out_dir / "result.json").string(), result_to_json(result));
  return result;
}

}  // namespace dgmm
