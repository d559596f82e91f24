// Command-line driver: sample generation, single fits, full experiments,
// scaling benchmarks and scatter export.

#include <dgmm/bench.hpp>
#include <dgmm/experiment.hpp>
#include <dgmm/scatter.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace dgmm;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::io, "cannot create '" + dir + "': " + ec.message());
}

ExperimentConfig load_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_experiment_config(path);
}

void print_summary(const ExperimentResult& r) {
  std::printf("%-13s %4s %4s %12s %12s %12s %10s %12s\n", "method", "ok", "fail", "err_pi", "err_mu",
              "err_sigma", "iters", "wall_s");
  for (const auto& s : r.summaries) {
    std::printf("%-13s %4d %4d %12.6g %12.6g %12.6g %10.0f %12.4g\n", s.method.c_str(), s.ok, s.failed,
                s.err_pi.median, s.err_mu.median, s.err_sigma.median, s.iterations.median,
                s.wall_mean.median);
  }
  for (const auto& c : r.cells) {
    if (!c.ok) std::printf("failed: %s seed %llu: %s\n", c.method.c_str(),
                           static_cast<unsigned long long>(c.seed), c.error.c_str());
  }
}

struct GenerateArgs {
  std::string config, out = ".";
  std::uint64_t seed = 1;
};

int cmd_generate(const GenerateArgs& a) {
  const ExperimentConfig cfg = load_or_default(a.config);
  const SeedInstance inst = make_seed_instance(cfg, a.seed);
  ensure_dir(a.out);
  const std::string tag = "seed" + std::to_string(a.seed);
  const fs::path dir(a.out);
  write_samples_csv((dir / ("samples_" + tag + ".csv")).string(), inst.sample.data, &inst.sample.labels,
                    "samples from experiment '" + cfg.name + "', seed " + std::to_string(a.seed) +
                        "\nN = " + std::to_string(cfg.N) + ", d = " + std::to_string(cfg.truth.d));
  write_json((dir / ("truth_" + tag + ".json")).string(), params_to_json(inst.truth));
  write_json((dir / ("init_" + tag + ".json")).string(), params_to_json(inst.init));
  std::printf("wrote %lld samples (d = %d) to %s\n", static_cast<long long>(cfg.N), cfg.truth.d,
              (dir / ("samples_" + tag + ".csv")).string().c_str());
  return 0;
}

struct FitArgs {
  std::string config, data, init, truth, out = ".", method = "dgmm", norm = "spectral";
  std::uint64_t seed = 1;
  int threads = 0;
};

int cmd_fit(const FitArgs& a) {
  const ExperimentConfig cfg = load_or_default(a.config);
  const Method m = parse_method(a.method);
  EstimatorConfig ec = cfg.config_for(m);
  if (a.threads > 0) ec.threads = a.threads;
  const LoadedSamples s = read_samples_csv(a.data);
  MixtureParams init;
  if (!a.init.empty()) {
    init = params_from_json(read_json(a.init));
  } else {
    init = default_initialization(cfg.truth.K, static_cast<int>(s.data.cols()), cfg.truth.R_max,
                                  seed_plan(a.seed).init);
  }
  const EstimationResult r = run_estimation(s.data, ec, init);
  Json j;
  j["method"] = method_name(m);
  j["estimator"] = estimator_config_to_json(ec);
  j["estimate"] = params_to_json(r.params);
  if (!a.truth.empty()) {
    const auto e = error_metrics(r.params, params_from_json(read_json(a.truth)), parse_norm(a.norm));
    j["err_pi"] = e.err_pi;
    j["err_mu"] = e.err_mu;
    j["err_sigma"] = e.err_sigma;
    j["permutation"] = e.permutation;
    std::printf("err_pi %.6g  err_mu %.6g  err_sigma %.6g\n", e.err_pi, e.err_mu, e.err_sigma);
  }
  j["trace"] = trace_to_json(r.trace);
  ensure_dir(a.out);
  const std::string path = (fs::path(a.out) / ("fit_" + std::string(method_name(m)) + ".json")).string();
  write_json(path, j);
  std::printf("%s: %d L-BFGS iterations over %zu steps (%s), %.3f s; wrote %s\n", method_name(m),
              r.trace.total_iterations(), r.trace.steps.size(), r.trace.termination.c_str(),
              r.trace.total_seconds, path.c_str());
  return 0;
}

struct ExperimentArgs {
  std::string config, out, method;
  std::vector<std::uint64_t> seeds;
  int threads = 0, workers = 0, repetitions = 0;
};

int cmd_experiment(const ExperimentArgs& a) {
  ExperimentConfig cfg = load_experiment_config(a.config);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (!a.method.empty()) cfg.methods = {parse_method(a.method)};
  if (!a.seeds.empty()) cfg.seeds = a.seeds;
  if (a.threads > 0) {
    cfg.estimator.threads = a.threads;
    for (auto& kv : cfg.overrides) kv.second.erase("threads");
  }
  if (a.workers > 0) cfg.workers = a.workers;
  if (a.repetitions > 0) cfg.repetitions = a.repetitions;
  const ExperimentResult r = run_experiment(cfg);
  print_summary(r);
  std::printf("wrote %s\n", (fs::path(cfg.output_dir) / "result.json").string().c_str());
  return 0;
}

struct BenchArgs {
  std::vector<int> dims{4, 8, 16, 32};
  std::vector<long long> sizes{5000};
  int K = 2, R = 2, L = 3, threads = 1;
  std::uint64_t seed = 1;
  double min_seconds = 0.2;
  bool no_explicit = false;
  std::string out = ".";
};

int cmd_bench(const BenchArgs& a) {
  BenchConfig cfg;
  cfg.dims = a.dims;
  cfg.sample_sizes.assign(a.sizes.begin(), a.sizes.end());
  cfg.K = a.K;
  cfg.R_max = a.R;
  cfg.L = a.L;
  cfg.seed = a.seed;
  cfg.min_seconds = a.min_seconds;
  cfg.run_explicit = !a.no_explicit;
  cfg.threads = a.threads;
  const auto rows = benchmark_scaling(cfg);
  ensure_dir(a.out);
  const std::string path = (fs::path(a.out) / "bench.csv").string();
  write_bench_table(path, rows);
  std::printf("%6s %8s %14s %14s %10s\n", "d", "N", "implicit_s", "explicit_s", "ratio");
  for (const auto& r : rows) {
    if (r.explicit_available) {
      std::printf("%6d %8lld %14.6g %14.6g %10.4g\n", r.d, static_cast<long long>(r.N), r.implicit_seconds,
                  r.explicit_seconds, r.explicit_seconds / r.implicit_seconds);
    } else {
      std::printf("%6d %8lld %14.6g %14s %10s\n", r.d, static_cast<long long>(r.N), r.implicit_seconds, "-",
                  "-");
    }
  }
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

struct ScatterArgs {
  std::string result, out = "scatter";
  std::uint64_t seed = 1;
  bool svg = false;
};

int cmd_export_scatter(const ScatterArgs& a) {
  const ExperimentResult r = result_from_json(read_json(a.result));
  const SeedInstance inst = make_seed_instance(r.config, a.seed);
  std::vector<NamedParams> sets{{"truth", inst.truth}, {"init", inst.init}};
  for (const auto& c : r.cells) {
    if (c.seed == a.seed && c.estimate) sets.push_back({c.method, *c.estimate});
  }
  require(sets.size() > 2, Errc::invalid_argument,
          "result file has no estimates for seed " + std::to_string(a.seed));
  const fs::path prefix(a.out);
  if (prefix.has_parent_path()) ensure_dir(prefix.parent_path().string());
  ScatterOptions opt;
  opt.svg = a.svg;
  export_scatter(inst.sample.data, inst.sample.labels, sets, a.out, opt);
  std::printf("wrote %s.csv%s\n", a.out.c_str(), a.svg ? (" and " + a.out + ".svg").c_str() : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diagonally weighted moment estimation for low-rank Gaussian mixtures"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Draw a ground truth, samples and an initialization");
  g->add_option("--config", gen.config, "Experiment config (JSON); defaults when omitted")->check(CLI::ExistingFile);
  g->add_option("--seed", gen.seed, "Experiment seed");
  g->add_option("--out", gen.out, "Output directory");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit one method to a sample file");
  f->add_option("--data", fit.data, "Sample file (CSV)")->required()->check(CLI::ExistingFile);
  f->add_option("--config", fit.config, "Experiment config supplying K, R_max and estimator settings")
      ->check(CLI::ExistingFile);
  f->add_option("--method", fit.method, "mm-explicit | mm-implicit | gmm-explicit | dgmm");
  f->add_option("--init", fit.init, "Initial parameters (JSON); random start when omitted")
      ->check(CLI::ExistingFile);
  f->add_option("--truth", fit.truth, "Ground truth (JSON) for error reporting")->check(CLI::ExistingFile);
  f->add_option("--seed", fit.seed, "Seed of the random start");
  f->add_option("--out", fit.out, "Output directory");
  f->add_option("--threads", fit.threads, "Worker threads per objective evaluation");
  f->add_option("--norm", fit.norm, "Covariance error norm: spectral | frobenius");

  ExperimentArgs exp;
  auto* e = app.add_subcommand("experiment", "Run every (method, seed) cell of a config");
  e->add_option("--config", exp.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  e->add_option("--out", exp.out, "Output directory (overrides the config)");
  e->add_option("--method", exp.method, "Run only this method");
  e->add_option("--seed", exp.seeds, "Run only these seeds");
  e->add_option("--threads", exp.threads, "Worker threads per objective evaluation");
  e->add_option("--workers", exp.workers, "Concurrent cells");
  e->add_option("--repetitions", exp.repetitions, "Timed repetitions per cell");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Per-evaluation timing, tensor-free vs explicit");
  b->add_option("--dims", bench.dims, "Dimensions")->delimiter(',');
  b->add_option("--N", bench.sizes, "Sample sizes")->delimiter(',');
  b->add_option("--K", bench.K, "Components");
  b->add_option("--R", bench.R, "Maximum rank");
  b->add_option("--L", bench.L, "Highest moment order");
  b->add_option("--seed", bench.seed, "Seed");
  b->add_option("--min-seconds", bench.min_seconds, "Timing budget per measurement");
  b->add_flag("--no-explicit", bench.no_explicit, "Skip the explicit path");
  b->add_option("--threads", bench.threads, "Worker threads per evaluation");
  b->add_option("--out", bench.out, "Output directory");

  ScatterArgs sc;
  auto* s = app.add_subcommand("export-scatter", "Project samples and fits onto the first two coordinates");
  s->add_option("--result", sc.result, "result.json of an experiment")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", sc.seed, "Seed whose sample and fits are exported");
  s->add_option("--out", sc.out, "Output path prefix (.csv / .svg appended)");
  s->add_flag("--svg", sc.svg, "Also write an SVG rendering");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*g) return cmd_generate(gen);
    if (*f) return cmd_fit(fit);
    if (*e) return cmd_experiment(exp);
    if (*b) return cmd_bench(bench);
    if (*s) return cmd_export_scatter(sc);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "dgmm: %s\n", ex.what());
    return 1;
  }
  return 1;
}
