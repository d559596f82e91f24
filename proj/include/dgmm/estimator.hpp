#pragma once

// Multi-step moment estimators. Every method runs the same loop:
//   for t = 1..T: weights at theta^[t-1]; minimise the weighted objective
//   from theta^[t-1]; stop once ||theta^[t] - theta^[t-1]||_2 < eps.
// The methods differ only in the weighting and in how moments are formed:
//   mm-explicit   unit weights, dense moment tensors
//   mm-implicit   unit weights, tensor-free objective
//   gmm-explicit  full inverse of S, dense moment tensors
//   dgmm          order-pooled diagonal weights, tensor-free objective

#include <dgmm/kernel_sums.hpp>
#include <dgmm/lbfgs.hpp>
#include <dgmm/objective.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace dgmm {

enum class Method { mm_explicit, mm_implicit, gmm_explicit, dgmm };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::mm_explicit: return "mm-explicit";
    case Method::mm_implicit: return "mm-implicit";
    case Method::gmm_explicit: return "gmm-explicit";
    case Method::dgmm: return "dgmm";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  if (s == "mm-explicit" || s == "mm") return Method::mm_explicit;
  if (s == "mm-implicit") return Method::mm_implicit;
  if (s == "gmm-explicit" || s == "gmm") return Method::gmm_explicit;
  if (s == "dgmm") return Method::dgmm;
  throw Error(Errc::invalid_argument, "unknown method '" + s + "'");
}

inline bool is_explicit(Method m) { return m == Method::mm_explicit || m == Method::gmm_explicit; }

enum class KernelChoice { automatic, exact, nystrom };

inline const char* kernel_choice_name(KernelChoice k) {
  switch (k) {
    case KernelChoice::automatic: return "auto";
    case KernelChoice::exact: return "exact";
    case KernelChoice::nystrom: return "nystrom";
  }
  return "unknown";
}

inline KernelChoice parse_kernel_choice(const std::string& s) {
  if (s == "auto") return KernelChoice::automatic;
  if (s == "exact") return KernelChoice::exact;
  if (s == "nystrom") return KernelChoice::nystrom;
  throw Error(Errc::invalid_argument, "unknown kernel mode '" + s + "'");
}

struct EstimatorConfig {
  Method method = Method::dgmm;
  int L = 3;
  int T = 10;
  double eps_theta = 1e-4;
  int max_iterations = 200;  // I, per inner solve
  double tau = 1.0;
  // Kernel sums (implicit methods).
  KernelChoice kernel = KernelChoice::automatic;
  Index landmarks = 0;  // 0: default_landmarks()
  double jitter = 0.0;  // relative diagonal shift of the landmark Gram matrix (times trace/m)
  double cholesky_tol = 1e-10;
  std::uint64_t kernel_seed = 0;
  Index exact_guard = kDefaultExactGuard;
  // Inner solver.
  int lbfgs_memory = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  // gmm-explicit.
  double gmm_regularization = 1e-10;
  int threads = 1;
  /// When set, used in place of the DGMM weights at every step.
  std::optional<Vector> fixed_weights;

  void validate() const {
    require(L >= 1, Errc::invalid_argument, "L must be at least 1");
    require(T >= 1, Errc::invalid_argument, "T must be at least 1");
    require(eps_theta > 0.0, Errc::invalid_argument, "eps_theta must be positive");
    require(max_iterations >= 0, Errc::invalid_argument, "max_iterations must be non-negative");
    require(tau > 0.0, Errc::invalid_argument, "tau must be positive");
    require(lbfgs_memory >= 1, Errc::invalid_argument, "L-BFGS memory must be positive");
    require(0.0 < c1 && c1 < c2 && c2 < 1.0, Errc::invalid_argument, "need 0 < c1 < c2 < 1");
    require(gmm_regularization >= 0.0, Errc::invalid_argument, "regularization must be >= 0");
    if (fixed_weights) {
      require(fixed_weights->size() == L, Errc::shape_mismatch, "fixed weights need L entries");
      require((fixed_weights->array() > 0.0).all(), Errc::invalid_argument,
              "fixed weights must be positive");
    }
  }
};

struct StepRecord {
  int step = 0;
  Vector weights;  // per-order weights; empty for gmm-explicit
  double condition = std::numeric_limits<double>::quiet_NaN();  // gmm-explicit only
  bool weighting_degenerate = false;
  Vector theta;  // packed iterate after the step
  double objective = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string solver_status;
  double seconds = 0.0;
  double theta_change = 0.0;
  std::vector<double> objective_history;  // accepted inner steps
};

struct EstimationTrace {
  std::string method;
  std::string kernel_mode;  // "exact", "nystrom" or "none"
  Index landmarks = 0;
  double setup_seconds = 0.0;  // kernel sums / explicit moments
  double total_seconds = 0.0;
  std::string termination;  // "converged" or "max-steps"
  std::vector<StepRecord> steps;

  int total_iterations() const {
    int s = 0;
    for (const auto& st : steps) s += st.iterations;
    return s;
  }
};

struct EstimationResult {
  MixtureParams params;
  EstimationTrace trace;
};

/// Kernel sums up to `max_order` as the configuration asks; `automatic` is
/// exact up to the guard and Nystrom beyond it.
inline KernelSumCache build_kernel_cache(const Matrix& data, int max_order, const EstimatorConfig& cfg,
                                         int K, int R_max) {
  const bool exact = cfg.kernel == KernelChoice::exact ||
                     (cfg.kernel == KernelChoice::automatic && data.rows() <= cfg.exact_guard);
  if (exact) return exact_kernel_sums(data, max_order, cfg.exact_guard);
  NystromOptions opt;
  opt.landmarks = cfg.landmarks > 0 ? std::min(cfg.landmarks, data.rows())
                                    : default_landmarks(data.rows(), K, R_max, cfg.L);
  opt.jitter = cfg.jitter;
  opt.cholesky_tol = cfg.cholesky_tol;
  opt.seed = cfg.kernel_seed;
  return nystrom_kernel_sums(data, max_order, opt);
}

inline EstimationResult run_estimation(const Matrix& data, const EstimatorConfig& cfg,
                                       const MixtureParams& init) {
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  const auto t_start = Clock::now();
  cfg.validate();
  init.validate();
  require(data.rows() >= 1, Errc::empty_sample, "no data");
  require(data.cols() == init.dim(), Errc::shape_mismatch,
          "data has " + std::to_string(data.cols()) + " columns but the model has d = " +
              std::to_string(init.dim()));
  const int K = init.components(), R = init.max_rank(), L = cfg.L;

  EstimationResult res;
  res.trace.method = method_name(cfg.method);

  // One-time data summaries.
  std::optional<KernelSumCache> cache;
  std::optional<ExplicitMoments> em;
  if (is_explicit(cfg.method)) {
    em = explicit_moments(data, L, cfg.method == Method::gmm_explicit);
    res.trace.kernel_mode = "none";
  } else {
    const int order = cfg.method == Method::dgmm && !cfg.fixed_weights ? 2 * L : L;
    cache = build_kernel_cache(data, order, cfg, K, R);
    res.trace.kernel_mode = kernel_mode_name(cache->mode);
    res.trace.landmarks = cache->landmarks;
  }
  res.trace.setup_seconds = seconds_since(t_start);

  LbfgsOptions lopt;
  lopt.max_iterations = cfg.max_iterations;
  lopt.memory = cfg.lbfgs_memory;
  lopt.c1 = cfg.c1;
  lopt.c2 = cfg.c2;

  PackedTheta theta = pack(init, cfg.tau);
  res.trace.termination = "max-steps";
  for (int t = 1; t <= cfg.T; ++t) {
    const auto t_step = Clock::now();
    const MixtureParams prev = unpack(theta);
    StepRecord rec;
    rec.step = t;
    LbfgsResult out;
    switch (cfg.method) {
      case Method::mm_implicit:
      case Method::dgmm: {
        Vector w = Vector::Ones(L);
        if (cfg.method == Method::dgmm) {
          w = cfg.fixed_weights ? *cfg.fixed_weights : dgmm_weights(prev, data, *cache, L);
        }
        rec.weights = w;
        ImplicitObjective obj(data, *cache, L, w, theta, cfg.threads);
        out = lbfgs_minimize(obj, theta.values, lopt);
        break;
      }
      case Method::mm_explicit: {
        rec.weights = Vector::Ones(L);
        const auto obj = ExplicitObjective::diagonal(*em, rec.weights, theta);
        out = lbfgs_minimize(obj, theta.values, lopt);
        break;
      }
      case Method::gmm_explicit: {
        auto W = gmm_full_weights(prev, *em, cfg.gmm_regularization);
        rec.condition = W.condition;
        rec.weighting_degenerate = W.degenerate;
        const auto obj = ExplicitObjective::full(*em, std::move(W.W), theta);
        out = lbfgs_minimize(obj, theta.values, lopt);
        break;
      }
    }
    rec.theta_change = (out.x - theta.values).norm();
    rec.theta = out.x;
    rec.objective = out.f;
    rec.iterations = out.iterations;
    rec.evaluations = out.evaluations;
    rec.solver_status = lbfgs_status_name(out.status);
    rec.objective_history = std::move(out.history);
    theta.values = out.x;
    rec.seconds = seconds_since(t_step);
    require(std::isfinite(rec.objective), Errc::non_finite, "objective became non-finite");
    const bool converged = rec.theta_change < cfg.eps_theta;
    res.trace.steps.push_back(std::move(rec));
    if (converged) {
      res.trace.termination = "converged";
      break;
    }
  }
  res.params = unpack(theta);
  res.trace.total_seconds = seconds_since(t_start);
  return res;
}

}  // namespace dgmm
