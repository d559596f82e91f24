#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom with
// safeguarded cubic interpolation).

#include <dgmm/common.hpp>

#include <deque>
#include <functional>
#include <limits>

namespace dgmm {

struct LbfgsOptions {
  int max_iterations = 200;
  int memory = 10;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  double gradient_tol = 1e-8;  // ||g|| <= gradient_tol * max(1, ||x||)
  double ftol = 2.220446049250313e-09;  // relative objective stall
  /// Floor of the stall denominator max(|f_old|, |f|, floor); 0 makes the
  /// test invariant to the objective's scale.
  double ftol_floor = 0.0;
  int max_line_search = 30;
};

enum class LbfgsStatus {
  converged_gradient,
  converged_stall,
  max_iterations,
  line_search_failed,
};

inline const char* lbfgs_status_name(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::converged_gradient: return "gradient";
    case LbfgsStatus::converged_stall: return "stall";
    case LbfgsStatus::max_iterations: return "max-iterations";
    case LbfgsStatus::line_search_failed: return "line-search-failed";
  }
  return "unknown";
}

struct LbfgsResult {
  Vector x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::max_iterations;
  /// Objective after each accepted step (entry 0 is f(x0)).
  std::vector<double> history;
};

namespace detail {

/// Minimiser of the cubic through (a, fa, ga) and (b, fb, gb), clamped to
/// the interior of [lo, hi]; bisection when the cubic is unusable.
inline double cubic_step(double a, double fa, double ga, double b, double fb, double gb, double lo,
                         double hi) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0 && a != b) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = gb - ga + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (gb + d2 - d1) / denom;
  }
  const double width = hi - lo;
  if (!std::isfinite(t) || t <= lo + 0.1 * width || t >= hi - 0.1 * width) t = 0.5 * (lo + hi);
  return t;
}

}  // namespace detail

/// `fg(x, grad)` returns f(x) and writes the gradient into grad.
template <class Fn>
LbfgsResult lbfgs_minimize(Fn&& fg, const Vector& x0, const LbfgsOptions& opt = {}) {
  LbfgsResult res;
  const Index n = x0.size();
  Vector x = x0;
  Vector g(n);
  double f = fg(x, g);
  ++res.evaluations;
  require(std::isfinite(f) && g.allFinite(), Errc::non_finite, "objective is not finite at x0");
  res.history.push_back(f);

  std::deque<Vector> S, Y;
  std::deque<double> rho;
  Vector d(n), x_new(n), g_new(n);

  auto phi = [&](double step, Vector& xt, Vector& gt, double& dphi) {
    xt = x + step * d;
    const double ft = fg(xt, gt);
    ++res.evaluations;
    dphi = gt.dot(d);
    return ft;
  };

  res.status = LbfgsStatus::max_iterations;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    if (g.norm() <= opt.gradient_tol * std::max(1.0, x.norm())) {
      res.status = LbfgsStatus::converged_gradient;
      break;
    }
    // Two-loop recursion.
    Vector q = g;
    std::vector<double> a(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      a[i] = rho[i] * S[i].dot(q);
      q -= a[i] * Y[i];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double b = rho[i] * Y[i].dot(q);
      q += (a[i] - b) * S[i];
    }
    d = -q;
    double dphi0 = g.dot(d);
    if (!(dphi0 < 0.0)) {
      // Lost descent (poor curvature pairs): restart from steepest descent.
      S.clear();
      Y.clear();
      rho.clear();
      d = -g;
      dphi0 = g.dot(d);
    }
    double step = S.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;

    // Strong-Wolfe line search.
    double f_new = 0.0, dphi = 0.0;
    bool found = false;
    double prev_step = 0.0, prev_f = f, prev_dphi = dphi0;
    double best_step = 0.0, best_f = f;
    Vector best_x = x, best_g = g;
    int evals = 0;
    auto zoom = [&](double lo, double f_lo, double dphi_lo, double hi, double f_hi,
                    double dphi_hi) {
      while (evals < opt.max_line_search) {
        const double a_lo = std::min(lo, hi), a_hi = std::max(lo, hi);
        const double t = detail::cubic_step(lo, f_lo, dphi_lo, hi, f_hi, dphi_hi, a_lo, a_hi);
        const double ft = phi(t, x_new, g_new, dphi);
        ++evals;
        if (std::isfinite(ft) && ft < best_f) {
          best_f = ft;
          best_step = t;
          best_x = x_new;
          best_g = g_new;
        }
        if (!std::isfinite(ft) || ft > f + opt.c1 * t * dphi0 || ft >= f_lo) {
          hi = t;
          f_hi = ft;
          dphi_hi = dphi;
          if (!std::isfinite(ft)) {
            f_hi = std::numeric_limits<double>::max();
            dphi_hi = 0.0;
          }
        } else {
          if (std::abs(dphi) <= -opt.c2 * dphi0) {
            f_new = ft;
            return true;
          }
          if (dphi * (hi - lo) >= 0.0) {
            hi = lo;
            f_hi = f_lo;
            dphi_hi = dphi_lo;
          }
          lo = t;
          f_lo = ft;
          dphi_lo = dphi;
        }
        if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) break;
      }
      return false;
    };

    while (evals < opt.max_line_search) {
      f_new = phi(step, x_new, g_new, dphi);
      ++evals;
      if (std::isfinite(f_new) && f_new < best_f) {
        best_f = f_new;
        best_step = step;
        best_x = x_new;
        best_g = g_new;
      }
      if (!std::isfinite(f_new)) {
        step = 0.5 * (prev_step + step);
        continue;
      }
      if (f_new > f + opt.c1 * step * dphi0 || (evals > 1 && f_new >= prev_f)) {
        found = zoom(prev_step, prev_f, prev_dphi, step, f_new, dphi);
        break;
      }
      if (std::abs(dphi) <= -opt.c2 * dphi0) {
        found = true;
        break;
      }
      if (dphi >= 0.0) {
        found = zoom(step, f_new, dphi, prev_step, prev_f, prev_dphi);
        break;
      }
      prev_step = step;
      prev_f = f_new;
      prev_dphi = dphi;
      step *= 2.0;
    }

    if (!found) {
      // Accept the best sufficient-decrease point if there is one.
      if (best_step > 0.0 && best_f < f) {
        x_new = best_x;
        g_new = best_g;
        f_new = best_f;
      } else {
        res.status = LbfgsStatus::line_search_failed;
        break;
      }
    } else if (best_f < f_new) {
      x_new = best_x;
      g_new = best_g;
      f_new = best_f;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(S.size()) == opt.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
    }
    const double f_old = f;
    x = x_new;
    g = g_new;
    f = f_new;
    ++res.iterations;
    res.history.push_back(f);
    if ((f_old - f) <= opt.ftol * std::max({std::abs(f_old), std::abs(f), opt.ftol_floor})) {
      res.status = LbfgsStatus::converged_stall;
      break;
    }
  }
  if (res.status == LbfgsStatus::max_iterations &&
      g.norm() <= opt.gradient_tol * std::max(1.0, x.norm())) {
    res.status = LbfgsStatus::converged_gradient;
  }
  res.x = x;
  res.f = f;
  return res;
}

}  // namespace dgmm
