#pragma once

// Shared fixtures for the test suites: random parameter generators and a
// central finite-difference oracle.

#include <dgmm/model.hpp>
#include <dgmm/rng.hpp>

#include <functional>
#include <random>

namespace dgmm::testing {

/// Random mixture with entries uniform in [-scale, scale] and random weights.
inline MixtureParams random_params(int K, int d, int R, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed, 99);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  MixtureParams p(K, d, R);
  for (int j = 0; j < K; ++j) p.weights[j] = w(rng);
  p.weights /= p.weights.sum();
  for (int j = 0; j < K; ++j) {
    for (int i = 0; i < d; ++i) p.centers[j][i] = u(rng);
    for (int c = 0; c < R; ++c)
      for (int i = 0; i < d; ++i) p.factors[j](i, c) = u(rng);
  }
  return p;
}

inline Vector random_vector(int d, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed, 77);
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

inline Matrix random_matrix(int r, int c, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed, 55);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

/// Central differences of f at x with step h.
inline Vector finite_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                double h = 1e-5) {
  Vector g(x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||b||, floor).
inline double rel_err(const Vector& a, const Vector& b, double floor = 1e-12) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Packs (pi, mu, V) gradient blocks into one vector with the center/factor
/// layout of PackedTheta, keeping the raw weight block.
template <class G>
Vector flatten_gradient(const G& g) {
  const Index K = g.pi.size();
  const Index d = g.mu.empty() ? 0 : g.mu[0].size();
  const Index R = g.V.empty() ? 0 : g.V[0].cols();
  Vector out(K + K * d + K * d * R);
  out.head(K) = g.pi;
  for (Index j = 0; j < K; ++j) out.segment(K + j * d, d) = g.mu[j];
  for (Index j = 0; j < K; ++j)
    out.segment(K + K * d + j * d * R, d * R) = Eigen::Map<const Vector>(g.V[j].data(), d * R);
  return out;
}

/// Inverse of flatten for parameters (weights taken verbatim, not softmaxed).
inline MixtureParams params_from_raw(const Vector& x, int K, int d, int R) {
  MixtureParams p(K, d, R);
  p.weights = x.head(K);
  for (int j = 0; j < K; ++j) p.centers[j] = x.segment(K + j * d, d);
  for (int j = 0; j < K; ++j)
    p.factors[j] = Eigen::Map<const Matrix>(x.data() + K + K * d + j * d * R, d, R);
  return p;
}

inline Vector raw_from_params(const MixtureParams& p) {
  const int K = p.components(), d = p.dim(), R = p.max_rank();
  Vector x(K + K * d + K * d * R);
  x.head(K) = p.weights;
  for (int j = 0; j < K; ++j) x.segment(K + j * d, d) = p.centers[j];
  for (int j = 0; j < K; ++j)
    x.segment(K + K * d + j * d * R, d * R) = Eigen::Map<const Vector>(p.factors[j].data(), d * R);
  return x;
}

}  // namespace dgmm::testing
