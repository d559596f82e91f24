#pragma once

// Row sums of the polynomial kernel Gram matrices
//   s_k[n] = sum_{n'} <y_n, y_{n'}>^k,   k = 0..max_order,
// computed exactly (O(N^2)) or by a Nystrom approximation with kernel
// k-means++ landmarks and a randomly pivoted Cholesky factor of the
// landmark Gram matrix.

#include <dgmm/common.hpp>
#include <dgmm/rng.hpp>

#include <random>
#include <string>
#include <vector>

namespace dgmm {

enum class KernelMode { exact, nystrom };

inline const char* kernel_mode_name(KernelMode m) {
  return m == KernelMode::exact ? "exact" : "nystrom";
}

struct KernelSumCache {
  int max_order = 0;
  Index N = 0;
  KernelMode mode = KernelMode::exact;
  Matrix sums;      // (max_order + 1) x N, sums(k, n) = s_k[n]
  Vector totals;    // totals[k] = sum_n s_k[n]
  Matrix diagonal;  // diagonal(k, n) = <y_n, y_n>^k, always exact
  int landmarks = 0;

  double total(int k) const {
    require(k <= max_order, Errc::invalid_argument,
            "kernel cache covers orders up to " + std::to_string(max_order));
    return totals[k];
  }
};

namespace detail {

inline Matrix diagonal_powers(const Matrix& data, int max_order) {
  const Vector sq = data.rowwise().squaredNorm();
  Matrix diag(max_order + 1, data.rows());
  diag.row(0).setOnes();
  for (int k = 1; k <= max_order; ++k) diag.row(k) = diag.row(k - 1).cwiseProduct(sq.transpose());
  return diag;
}

inline void finish_totals(KernelSumCache& c) {
  c.totals.resize(c.max_order + 1);
  for (int k = 0; k <= c.max_order; ++k) c.totals[k] = c.sums.row(k).sum();
}

}  // namespace detail

inline constexpr Index kDefaultExactGuard = 20000;

/// Exact sums by blocked Gram products; O(N^2 (d + max_order)).
inline KernelSumCache exact_kernel_sums(const Matrix& data, int max_order,
                                        Index guard = kDefaultExactGuard) {
  const Index N = data.rows();
  require(N >= 1, Errc::empty_sample, "kernel sums of an empty sample");
  require(max_order >= 0, Errc::invalid_argument, "negative kernel order");
  require(N <= guard, Errc::guard_exceeded,
          "exact kernel sums need N^2 pair evaluations; N=" + std::to_string(N) +
              " exceeds the guard of " + std::to_string(guard));
  KernelSumCache c;
  c.max_order = max_order;
  c.N = N;
  c.mode = KernelMode::exact;
  c.sums = Matrix::Zero(max_order + 1, N);
  c.sums.row(0).setConstant(static_cast<double>(N));
  c.diagonal = detail::diagonal_powers(data, max_order);

  // Tiles of the Gram matrix small enough to stay cache resident.
  const Index row_block = 128, col_block = 2048;
  const Matrix data_t = data.transpose();
  Matrix G, acc;
  Vector pw;
  for (Index r0 = 0; r0 < N; r0 += row_block) {
    const Index rb = std::min(row_block, N - r0);
    acc.setZero(rb, max_order + 1);
    for (Index c0 = 0; c0 < N; c0 += col_block) {
      const Index cb = std::min(col_block, N - c0);
      G.noalias() = data.middleRows(r0, rb) * data_t.middleCols(c0, cb);
      for (Index col = 0; col < cb; ++col) {
        pw = G.col(col);
        for (int k = 1; k <= max_order; ++k) {
          acc.col(k) += pw;
          if (k < max_order) pw.array() *= G.col(col).array();
        }
      }
    }
    for (int k = 1; k <= max_order; ++k) c.sums.row(k).segment(r0, rb) = acc.col(k).transpose();
  }
  detail::finish_totals(c);
  return c;
}

/// Kernel k-means++ seeding for h(x, y) = <x, y>^order: first landmark
/// uniform, then each draw proportional to the squared feature-space
/// distance to the nearest landmark already chosen. Falls back to a uniform
/// draw among unchosen points when every remaining distance is zero.
inline std::vector<Index> kmeanspp_landmarks(const Matrix& data, int order, Index m,
                                             std::uint64_t seed) {
  const Index N = data.rows();
  require(m >= 1 && m <= N, Errc::invalid_argument, "need 1 <= m <= N landmarks");
  CounterRng rng(seed, static_cast<std::uint64_t>(order));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const Vector self = data.rowwise().squaredNorm().array().pow(order).matrix();
  Vector dist = Vector::Constant(N, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(N), 0);
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(m));

  auto uniform_unchosen = [&]() {
    const Index remaining = N - static_cast<Index>(out.size());
    Index target = std::min<Index>(static_cast<Index>(unif(rng) * remaining), remaining - 1);
    for (Index n = 0; n < N; ++n) {
      if (chosen[n]) continue;
      if (target-- == 0) return n;
    }
    return N - 1;
  };

  Index next = uniform_unchosen();
  while (true) {
    out.push_back(next);
    chosen[next] = 1;
    if (static_cast<Index>(out.size()) == m) break;
    const Vector h = (data * data.row(next).transpose()).array().pow(order).matrix();
    double total = 0.0;
    for (Index n = 0; n < N; ++n) {
      if (chosen[n]) {
        dist[n] = 0.0;
        continue;
      }
      double d2 = self[n] - 2.0 * h[n] + self[next];
      // Round-off floor: duplicates (in feature space) get exactly zero weight.
      if (d2 <= 1e-12 * (self[n] + self[next])) d2 = 0.0;
      dist[n] = std::min(dist[n], d2);
      total += dist[n];
    }
    if (!(total > 0.0)) {
      next = uniform_unchosen();
      continue;
    }
    double u = unif(rng) * total;
    next = -1;
    for (Index n = 0; n < N; ++n) {
      if (dist[n] <= 0.0) continue;
      next = n;
      u -= dist[n];
      if (u < 0.0) break;
    }
  }
  return out;
}

struct PivotedCholesky {
  Matrix factor;              // m x rank, W ~= factor * factor^T
  std::vector<Index> pivots;  // pivot order; factor.row(pivots) is lower triangular
  double residual_trace = 0.0;
  double trace = 0.0;

  Index rank() const { return factor.cols(); }
};

/// Randomly pivoted Cholesky: pivots sampled proportional to the diagonal of
/// the current residual. Stops once the residual trace is at most
/// tol * trace(W) or the rank reaches max_rank.
inline PivotedCholesky rp_cholesky(const Matrix& W, double tol, Index max_rank, std::uint64_t seed) {
  const Index m = W.rows();
  require(W.cols() == m, Errc::shape_mismatch, "rp_cholesky needs a square matrix");
  require((W - W.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, W.cwiseAbs().maxCoeff()),
          Errc::invalid_argument, "rp_cholesky needs a symmetric matrix");
  CounterRng rng(seed, 0x5eed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PivotedCholesky out;
  out.trace = W.trace();
  max_rank = std::min(max_rank, m);
  Matrix F = Matrix::Zero(m, max_rank);
  Vector diag = W.diagonal().cwiseMax(0.0);
  Index rank = 0;
  while (rank < max_rank) {
    const double residual = diag.sum();
    if (residual <= tol * out.trace || residual <= 0.0) break;
    double u = unif(rng) * residual;
    Index s = -1;
    for (Index i = 0; i < m; ++i) {
      if (diag[i] <= 0.0) continue;
      s = i;
      u -= diag[i];
      if (u < 0.0) break;
    }
    Vector g = W.col(s);
    if (rank > 0) g.noalias() -= F.leftCols(rank) * F.row(s).head(rank).transpose();
    if (!(g[s] > 0.0)) {
      diag[s] = 0.0;  // round-off; this pivot carries no residual mass
      continue;
    }
    F.col(rank) = g / std::sqrt(g[s]);
    // Earlier pivots are eliminated exactly; clear their round-off residue.
    for (Index q : out.pivots) F(q, rank) = 0.0;
    diag = (diag.array() - F.col(rank).array().square()).cwiseMax(0.0).matrix();
    diag[s] = 0.0;
    out.pivots.push_back(s);
    ++rank;
  }
  out.factor = F.leftCols(rank);
  out.residual_trace = diag.sum();
  return out;
}

struct NystromOptions {
  Index landmarks = 0;  // 0: caller-chosen default
  double jitter = 0.0;  // relative diagonal shift of the landmark Gram matrix (times trace/m)
  double cholesky_tol = 1e-10;
  std::uint64_t seed = 0;
};

/// Landmark count used when none is configured: a small multiple of the
/// feature rank bound K * C(R_max + L - 1, L) at the highest matched order.
inline Index default_landmarks(Index N, int K, int R_max, int L) {
  const double bound = K * binomial(R_max + L - 1, L);
  return std::min<Index>(N, static_cast<Index>(4.0 * bound));
}

/// Approximate sums s_k ~= C^(k) W^(k)^{-1} C^(k)^T 1 per order k, with the
/// solve restricted to the Cholesky pivots.
inline KernelSumCache nystrom_kernel_sums(const Matrix& data, int max_order,
                                          const NystromOptions& opt) {
  const Index N = data.rows();
  require(N >= 1, Errc::empty_sample, "kernel sums of an empty sample");
  const Index m = opt.landmarks;
  require(m >= 1 && m <= N, Errc::invalid_argument, "need 1 <= m <= N landmarks");
  KernelSumCache c;
  c.max_order = max_order;
  c.N = N;
  c.mode = KernelMode::nystrom;
  c.landmarks = static_cast<int>(m);
  c.sums = Matrix::Zero(max_order + 1, N);
  c.sums.row(0).setConstant(static_cast<double>(N));
  c.diagonal = detail::diagonal_powers(data, max_order);

  for (int k = 1; k <= max_order; ++k) {
    const std::uint64_t sub = derive_seed(opt.seed, static_cast<std::uint64_t>(k));
    const auto idx = kmeanspp_landmarks(data, k, m, sub);
    Matrix Y_l(m, data.cols());
    for (Index i = 0; i < m; ++i) Y_l.row(i) = data.row(idx[i]);
    const Matrix C = (data * Y_l.transpose()).array().pow(k).matrix();  // N x m
    Matrix W = (Y_l * Y_l.transpose()).array().pow(k).matrix();
    W = 0.5 * (W + W.transpose());
    if (opt.jitter > 0.0) W.diagonal().array() += opt.jitter * W.trace() / static_cast<double>(m);

    const auto chol = rp_cholesky(W, opt.cholesky_tol, m, derive_seed(sub, 1));
    const Index r = chol.rank();
    require(r >= 1, Errc::degenerate_kernel,
            "landmark Gram matrix of order " + std::to_string(k) + " has rank 0");
    Matrix Lp(r, r);
    Matrix Cp(N, r);
    for (Index a = 0; a < r; ++a) {
      Lp.row(a) = chol.factor.row(chol.pivots[a]);
      Cp.col(a) = C.col(chol.pivots[a]);
    }
    const Vector v = Cp.colwise().sum().transpose();
    const Vector z = Lp.triangularView<Eigen::Lower>().solve(v);
    const Vector w = Lp.transpose().triangularView<Eigen::Upper>().solve(z);
    require(w.allFinite(), Errc::degenerate_kernel, "triangular solve produced non-finite values");
    c.sums.row(k) = (Cp * w).transpose();
  }
  detail::finish_totals(c);
  return c;
}

inline constexpr Index kGramRankGuard = 5000;

/// Numerical rank of H^(k) (entries <y_n, y_n'>^k): eigenvalue magnitudes
/// above threshold * largest.
inline Index gram_rank(const Matrix& data, int k, double threshold) {
  require(data.rows() <= kGramRankGuard, Errc::guard_exceeded,
          "gram_rank builds the full N x N Gram matrix; N too large");
  const Matrix H = (data * data.transpose()).array().pow(k).matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  const Vector s = es.eigenvalues().cwiseAbs();
  const double top = s.maxCoeff();
  if (top <= 0.0) return 0;
  return (s.array() > threshold * top).count();
}

}  // namespace dgmm
