#pragma once

// Weighted moment-matching objectives and their weighting schemes.
//
// Implicit path (tensor free):
//   Q(theta) = sum_k w_k (alpha_k - (2/N) sum_n beta_{k,n} + t_k / N^2)
// with t_k = sum_{n,n'} <y_n, y_n'>^k taken from a KernelSumCache.
//
// Explicit path: the same quantity from dense moment tensors, either with
// per-order weights (w = 1 is plain MM) or with a full q x q weighting
// matrix (GMM).

#include <dgmm/implicit.hpp>
#include <dgmm/kernel_sums.hpp>
#include <dgmm/model.hpp>
#include <dgmm/parallel.hpp>
#include <dgmm/tensor.hpp>

#include <string>
#include <vector>

namespace dgmm {

/// Per-order weights w_1..w_L, stored at index k - 1.
using WeightVector = Vector;

namespace detail {

/// Column block [mu_1..mu_K, V_1..V_K] of width K (1 + R).
inline Matrix stacked_parameters(const MixtureParams& p) {
  const int K = p.components(), d = p.dim(), R = p.max_rank();
  Matrix M(d, K * (1 + R));
  for (int j = 0; j < K; ++j) M.col(j) = p.centers[j];
  for (int j = 0; j < K; ++j) M.middleCols(K + j * R, R) = p.factors[j];
  return M;
}

inline constexpr Index kRowBlock = 4096;

/// Accumulators of the per-sample pass.
struct SamplePass {
  Matrix bell_sums;  // (L+1) x K: sum_n B_k(a_jn, b_jn)
  std::vector<Vector> grad_mu;
  std::vector<Matrix> grad_V;

  SamplePass(int L, int K, int d, int R)
      : bell_sums(Matrix::Zero(L + 1, K)), grad_mu(K, Vector::Zero(d)), grad_V(K, Matrix::Zero(d, R)) {}
};

/// One sweep over rows [begin, end): Bell sums per component and, when
/// `w` is given, the unscaled sample gradients
///   sum_n sum_k w_k d beta_{k,n} / d mu_j  and  ... / d V_j.
inline void sample_pass(const MixtureParams& p, const Matrix& data, int L, const Vector* w,
                        Index begin, Index end, SamplePass& acc) {
  const int K = p.components(), R = p.max_rank();
  const Matrix M = stacked_parameters(p);
  std::vector<double> B(static_cast<std::size_t>(L) + 1);
  Matrix P, cmu, cV, weighted;
  for (Index start = begin; start < end; start += kRowBlock) {
    const Index rows = std::min(kRowBlock, end - start);
    const auto Y = data.middleRows(start, rows);
    P.noalias() = Y * M;
    if (w) {
      cmu.setZero(rows, K);
      cV.setZero(rows, K);
    }
    for (Index n = 0; n < rows; ++n) {
      for (int j = 0; j < K; ++j) {
        const double a = P(n, j);
        const double b = R > 0 ? P.row(n).segment(K + j * R, R).squaredNorm() : 0.0;
        bell_two_arg_all(a, b, L, B.data());
        for (int k = 0; k <= L; ++k) acc.bell_sums(k, j) += B[k];
        if (!w) continue;
        double sm = 0.0, sv = 0.0;
        for (int k = 1; k <= L; ++k) {
          sm += (*w)[k - 1] * k * B[k - 1];
          if (k >= 2) sv += (*w)[k - 1] * k * (k - 1) * B[k - 2];
        }
        cmu(n, j) = p.weights[j] * sm;
        cV(n, j) = p.weights[j] * sv;
      }
    }
    if (!w) continue;
    for (int j = 0; j < K; ++j) {
      acc.grad_mu[j].noalias() += Y.transpose() * cmu.col(j);
      if (R > 0) {
        weighted = cV.col(j).asDiagonal() * P.middleCols(K + j * R, R);
        acc.grad_V[j].noalias() += Y.transpose() * weighted;
      }
    }
  }
}

}  // namespace detail

/// beta_{k,n} for k = 0..L and every sample: an (L+1) x N matrix.
inline Matrix beta_values(const MixtureParams& p, const Matrix& data, int L) {
  const int K = p.components(), R = p.max_rank();
  const Matrix M = detail::stacked_parameters(p);
  Matrix out = Matrix::Zero(L + 1, data.rows());
  std::vector<double> B(static_cast<std::size_t>(L) + 1);
  Matrix P;
  for (Index start = 0; start < data.rows(); start += detail::kRowBlock) {
    const Index rows = std::min(detail::kRowBlock, data.rows() - start);
    P.noalias() = data.middleRows(start, rows) * M;
    for (Index n = 0; n < rows; ++n) {
      for (int j = 0; j < K; ++j) {
        const double b = R > 0 ? P.row(n).segment(K + j * R, R).squaredNorm() : 0.0;
        bell_two_arg_all(P(n, j), b, L, B.data());
        for (int k = 0; k <= L; ++k) out(k, start + n) += p.weights[j] * B[k];
      }
    }
  }
  return out;
}

/// Tensor-free weighted objective on the packed parameter vector.
class ImplicitObjective {
 public:
  ImplicitObjective(const Matrix& data, const KernelSumCache& cache, int L, WeightVector weights,
                    PackedTheta layout, int threads = 1)
      : data_(data), cache_(cache), L_(L), w_(std::move(weights)), layout_(std::move(layout)),
        threads_(threads) {
    require(L >= 1, Errc::invalid_argument, "L must be at least 1");
    require(w_.size() == L, Errc::shape_mismatch, "need one weight per moment order");
    require(cache.max_order >= L, Errc::invalid_argument, "kernel cache must cover orders 1..L");
    require(cache.N == data.rows(), Errc::shape_mismatch, "kernel cache built on other data");
    require(data.cols() == layout_.d, Errc::shape_mismatch, "data dimension does not match theta");
  }

  const WeightVector& weights() const { return w_; }
  void set_weights(WeightVector w) {
    require(w.size() == L_, Errc::shape_mismatch, "need one weight per moment order");
    w_ = std::move(w);
  }

  /// Q at `x` (packed layout); writes dQ/dx into grad.
  double operator()(const Vector& x, Vector& grad) const {
    const MixtureParams p = unpack(x, layout_);
    const int K = p.components(), d = p.dim(), R = p.max_rank();
    const double N = static_cast<double>(data_.rows());

    CumulantGradients cg;
    const CumulantTable table = pairwise_cumulants(p, L_, &cg);
    std::vector<double> alphas;
    std::vector<ParamGradient> agrads;
    alpha_with_gradients(p, L_, table, &cg, alphas, &agrads);

    const int workers = effective_workers(data_.rows(), threads_);
    std::vector<detail::SamplePass> parts(static_cast<std::size_t>(workers),
                                          detail::SamplePass(L_, K, d, R));
    parallel_slices(data_.rows(), workers, [&](int w, Index b, Index e) {
      detail::sample_pass(p, data_, L_, &w_, b, e, parts[static_cast<std::size_t>(w)]);
    });
    for (int w = 1; w < workers; ++w) {
      parts[0].bell_sums += parts[w].bell_sums;
      for (int j = 0; j < K; ++j) {
        parts[0].grad_mu[j] += parts[w].grad_mu[j];
        parts[0].grad_V[j] += parts[w].grad_V[j];
      }
    }
    const auto& sp = parts[0];

    double Q = 0.0;
    ParamGradient g(K, d, R);
    for (int k = 1; k <= L_; ++k) {
      const double wk = w_[k - 1];
      const double beta_sum = sp.bell_sums.row(k).dot(p.weights);
      Q += wk * (alphas[k] - 2.0 * beta_sum / N + cache_.total(k) / (N * N));
      g.add_scaled(agrads[k], wk);
      g.pi -= (2.0 * wk / N) * sp.bell_sums.row(k).transpose();
    }
    for (int j = 0; j < K; ++j) {
      g.mu[j] -= (2.0 / N) * sp.grad_mu[j];
      g.V[j] -= (2.0 / N) * sp.grad_V[j];
    }
    grad = pack_gradient(g, p);
    return Q;
  }

  /// Maps structured gradient blocks to the packed layout (weights through
  /// the softmax chain rule).
  Vector pack_gradient(const ParamGradient& g, const MixtureParams& p) const {
    return pack_gradient_blocks(g.pi, g.mu, g.V, p, layout_);
  }

  static Vector pack_gradient_blocks(const Vector& gpi, const std::vector<Vector>& gmu,
                                     const std::vector<Matrix>& gV, const MixtureParams& p,
                                     const PackedTheta& layout) {
    Vector out(layout.values.size() ? layout.values.size()
                                     : PackedTheta::length(layout.K, layout.d, layout.R_max));
    const Index dR = static_cast<Index>(layout.d) * layout.R_max;
    out.head(layout.K) = chain_simplex_gradient(gpi, p.weights, layout.tau);
    for (int j = 0; j < layout.K; ++j) {
      out.segment(layout.center_offset(j), layout.d) = gmu[j];
      out.segment(layout.factor_offset(j), dR) = Eigen::Map<const Vector>(gV[j].data(), dR);
    }
    return out;
  }

 private:
  const Matrix& data_;
  const KernelSumCache& cache_;
  int L_;
  WeightVector w_;
  PackedTheta layout_;
  int threads_;
};

/// Order-pooled diagonal weights
///   w_k = N sum_n (alpha_k - 2 beta_{k,n} + gamma_{k,n,n})
///         / sum_{k'} sum_{n,n'} A_k(n,n') A_{k'}(n,n'),
///   A_k(n,n') = alpha_k - beta_{k,n} - beta_{k,n'} + gamma_{k,n,n'},
/// evaluated from kernel row sums only. The double sum expands into
///   a a' N^2                       (alpha alpha' term)
///   - 2 N a sum c - 2 N a' sum b   (alpha times a single beta, both slots)
///   + a t_{k'} + a' t_k            (alpha times gamma)
///   + 2 N sum_n b_n c_n            (beta_n beta'_n and beta_n' beta'_n')
///   + 2 (sum b)(sum c)             (beta_n beta'_n' and beta_n' beta'_n)
///   - 2 sum_n b_n s_{k'}[n]        (beta times gamma', both slots)
///   - 2 sum_n c_n s_k[n]           (gamma times beta', both slots)
///   + t_{k+k'}                     (gamma gamma' = <y_n, y_n'>^{k+k'})
/// with a = alpha_k, a' = alpha_{k'}, b = beta_{k,.}, c = beta_{k',.}.
inline WeightVector dgmm_weights(const MixtureParams& prev, const Matrix& data,
                                 const KernelSumCache& cache, int L) {
  require(cache.max_order >= 2 * L, Errc::invalid_argument,
          "weights need kernel sums up to order 2L");
  require(cache.N == data.rows(), Errc::shape_mismatch, "kernel cache built on other data");
  const double N = static_cast<double>(data.rows());
  const Matrix beta = beta_values(prev, data, L);
  const auto table = pairwise_cumulants(prev, L);
  std::vector<double> alpha(L + 1, 0.0);
  for (int k = 1; k <= L; ++k) alpha[k] = dgmm::alpha(prev, k, table);

  Vector beta_sum(L + 1);
  for (int k = 0; k <= L; ++k) beta_sum[k] = beta.row(k).sum();

  WeightVector w(L);
  for (int k = 1; k <= L; ++k) {
    const double num =
        N * (N * alpha[k] - 2.0 * beta_sum[k] + cache.diagonal.row(k).sum());
    double den = 0.0;
    for (int kp = 1; kp <= L; ++kp) {
      const double a = alpha[k], ap = alpha[kp];
      den += a * ap * N * N;
      den -= 2.0 * N * a * beta_sum[kp] + 2.0 * N * ap * beta_sum[k];
      den += a * cache.total(kp) + ap * cache.total(k);
      den += 2.0 * N * beta.row(k).dot(beta.row(kp));
      den += 2.0 * beta_sum[k] * beta_sum[kp];
      den -= 2.0 * beta.row(k).dot(cache.sums.row(kp));
      den -= 2.0 * beta.row(kp).dot(cache.sums.row(k));
      den += cache.total(k + kp);
    }
    require(std::isfinite(den) && den > 0.0, Errc::degenerate_data,
            "weight denominator for order " + std::to_string(k) + " is not positive");
    w[k - 1] = num / den;
    require(std::isfinite(w[k - 1]) && w[k - 1] > 0.0, Errc::degenerate_data,
            "weight for order " + std::to_string(k) + " is not positive");
  }
  return w;
}

/// w_k = sum_{i in I_k} S_ii / sum_{i in I_k} sum_j S_ij^2, I_k the rows of
/// the order-k block of the stacked moment vector.
inline WeightVector direct_diag_weights_from_S(const Matrix& S, int d, int L) {
  require(S.rows() == moment_vector_length(d, L) && S.cols() == S.rows(), Errc::shape_mismatch,
          "S must be q x q with q = d + ... + d^L");
  WeightVector w(L);
  Index off = 0, block = 1;
  for (int k = 1; k <= L; ++k) {
    block *= d;
    const double num = S.diagonal().segment(off, block).sum();
    const double den = S.middleRows(off, block).squaredNorm();
    require(den > 0.0, Errc::degenerate_data, "zero row mass in S");
    w[k - 1] = num / den;
    off += block;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Explicit path.

inline constexpr Index kMaxGmmDimension = 1500;

/// Stacked y^{⊗k}, k = 1..L (row-major vectorization per block).
inline void stacked_outer_powers(const Vector& y, int L, double* out) {
  const Index d = y.size();
  Index off = 0, block = 1;
  const double* prev = nullptr;
  for (int k = 1; k <= L; ++k) {
    double* cur = out + off;
    if (k == 1) {
      for (Index i = 0; i < d; ++i) cur[i] = y[i];
    } else {
      for (Index a = 0; a < block; ++a)
        for (Index i = 0; i < d; ++i) cur[a * d + i] = prev[a] * y[i];
    }
    prev = cur;
    block *= d;
    off += block;
  }
}

/// Data summaries consumed by the explicit objectives. Sample moments are
/// computed once, so an explicit evaluation costs no O(N) work.
struct ExplicitMoments {
  int L = 0;
  int d = 0;
  Index N = 0;
  std::vector<DenseTensor> sample;  // sample[k-1] = (1/N) sum y^{⊗k}
  Vector phi_bar;                   // stacked sample moments (length q)
  Matrix Phi;                       // (1/N) sum phi phi^T, only when requested

  Index q() const { return phi_bar.size(); }
};

inline ExplicitMoments explicit_moments(const Matrix& data, int L, bool second_moment = false) {
  require(data.rows() >= 1, Errc::empty_sample, "moments of an empty sample");
  require(L >= 1 && L <= 4, Errc::guard_exceeded, "explicit moments support L <= 4");
  ExplicitMoments m;
  m.L = L;
  m.d = static_cast<int>(data.cols());
  m.N = data.rows();
  const Index q = moment_vector_length(m.d, L);
  for (int k = 1; k <= L; ++k) tensor_size(m.d, k);
  if (second_moment) {
    require(q <= kMaxGmmDimension, Errc::guard_exceeded,
            "full weighting matrix needs q <= " + std::to_string(kMaxGmmDimension) +
                ", got q = " + std::to_string(q));
    m.Phi = Matrix::Zero(q, q);
  }
  m.phi_bar = Vector::Zero(q);
  const Index block = 512;
  for (Index start = 0; start < m.N; start += block) {
    const Index rows = std::min(block, m.N - start);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Fr(rows, q);
    for (Index n = 0; n < rows; ++n)
      stacked_outer_powers(data.row(start + n).transpose(), L, Fr.row(n).data());
    m.phi_bar += Fr.colwise().sum().transpose();
    if (second_moment) m.Phi.selfadjointView<Eigen::Lower>().rankUpdate(Fr.transpose());
  }
  const double inv = 1.0 / static_cast<double>(m.N);
  m.phi_bar *= inv;
  if (second_moment) {
    m.Phi = m.Phi.selfadjointView<Eigen::Lower>();
    m.Phi *= inv;
  }
  Index off = 0;
  for (int k = 1; k <= L; ++k) {
    DenseTensor t(k, m.d);
    t.vec() = m.phi_bar.segment(off, static_cast<Index>(t.size()));
    off += static_cast<Index>(t.size());
    m.sample.push_back(std::move(t));
  }
  return m;
}

/// Stacked vec(M^(k)(theta)), k = 1..L.
inline Vector stacked_population_moments(const MixtureParams& p, int L) {
  Vector m(moment_vector_length(p.dim(), L));
  Index off = 0;
  for (int k = 1; k <= L; ++k) {
    const DenseTensor M = population_moment_tensor(p, k);
    m.segment(off, static_cast<Index>(M.size())) = M.vec();
    off += static_cast<Index>(M.size());
  }
  return m;
}

/// S = (1/N) sum_n g_n g_n^T with g_n = m - phi_n, from the precomputed
/// second moment: S = m m^T - m phibar^T - phibar m^T + Phi.
inline Matrix assemble_S(const MixtureParams& p, const ExplicitMoments& em) {
  require(em.Phi.rows() == em.q(), Errc::invalid_argument,
          "explicit moments were built without the second-moment matrix");
  const Vector m = stacked_population_moments(p, em.L);
  Matrix S = em.Phi;
  S.noalias() += m * m.transpose();
  S.noalias() -= m * em.phi_bar.transpose();
  S.noalias() -= em.phi_bar * m.transpose();
  return 0.5 * (S + S.transpose());
}

struct GmmWeighting {
  Matrix W;
  double condition = 0.0;  // of the regularized S
  bool degenerate = false;  // S had zero trace
};

/// Regularized inverse of S: (S + reg * trace(S)/q * I)^{-1} through an LDL^T
/// solve against the identity.
inline GmmWeighting gmm_full_weights(const MixtureParams& prev, const ExplicitMoments& em,
                                     double regularization) {
  const Matrix S0 = assemble_S(prev, em);
  const Index q = S0.rows();
  GmmWeighting out;
  double shift = regularization * S0.trace() / static_cast<double>(q);
  if (!(S0.trace() > 0.0)) {
    out.degenerate = true;
    shift = regularization > 0.0 ? regularization : 1.0;
  }
  Matrix S = S0;
  S.diagonal().array() += shift;
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues();
  out.condition = ev.minCoeff() > 0.0 ? ev.maxCoeff() / ev.minCoeff()
                                      : std::numeric_limits<double>::infinity();
  Eigen::LDLT<Matrix> ldlt(S);
  require(ldlt.info() == Eigen::Success, Errc::factorization_failed,
          "LDL^T factorization of the regularized S failed");
  out.W = ldlt.solve(Matrix::Identity(q, q));
  require(out.W.allFinite(), Errc::factorization_failed, "inverse of S is not finite");
  out.W = 0.5 * (out.W + out.W.transpose());
  return out;
}

/// Explicit objective. With `full_weight` null:
///   Q = sum_k w_k ||M^(k)(theta) - mhat_k||^2;
/// otherwise Q = gbar^T W gbar with gbar the stacked differences.
class ExplicitObjective {
 public:
  /// Per-order weights (all ones: plain moment matching).
  static ExplicitObjective diagonal(const ExplicitMoments& em, WeightVector weights,
                                    PackedTheta layout) {
    require(weights.size() == em.L, Errc::shape_mismatch, "need one weight per moment order");
    return ExplicitObjective(em, std::move(weights), Matrix(), std::move(layout));
  }
  /// Full q x q weighting matrix.
  static ExplicitObjective full(const ExplicitMoments& em, Matrix W, PackedTheta layout) {
    require(W.rows() == em.q() && W.cols() == em.q(), Errc::shape_mismatch,
            "weighting matrix must be q x q");
    return ExplicitObjective(em, Vector::Ones(em.L), std::move(W), std::move(layout));
  }

  double operator()(const Vector& x, Vector& grad) const {
    const MixtureParams p = unpack(x, layout_);
    const int K = p.components(), d = p.dim(), R = p.max_rank();
    std::vector<DenseTensor> diff;
    Vector gbar(em_.q());
    Index off = 0;
    for (int k = 1; k <= em_.L; ++k) {
      DenseTensor t = population_moment_tensor(p, k) - em_.sample[k - 1];
      gbar.segment(off, static_cast<Index>(t.size())) = t.vec();
      off += static_cast<Index>(t.size());
      diff.push_back(std::move(t));
    }
    Vector gpi = Vector::Zero(K);
    std::vector<Vector> gmu(K, Vector::Zero(d));
    std::vector<Matrix> gV(K, Matrix::Zero(d, R));
    double Q = 0.0;
    if (W_.size() == 0) {
      for (int k = 1; k <= em_.L; ++k) {
        Q += w_[k - 1] * tensor_inner(diff[k - 1], diff[k - 1]);
        accumulate_moment_contraction_gradient(p, k, diff[k - 1], 2.0 * w_[k - 1], gpi, gmu, gV);
      }
    } else {
      const Vector Wg = W_ * gbar;
      Q = gbar.dot(Wg);
      off = 0;
      for (int k = 1; k <= em_.L; ++k) {
        DenseTensor r(k, d);
        r.vec() = Wg.segment(off, static_cast<Index>(r.size()));
        off += static_cast<Index>(r.size());
        accumulate_moment_contraction_gradient(p, k, sym(r), 2.0, gpi, gmu, gV);
      }
    }
    grad = ImplicitObjective::pack_gradient_blocks(gpi, gmu, gV, p, layout_);
    return Q;
  }

 private:
  ExplicitObjective(const ExplicitMoments& em, WeightVector w, Matrix W, PackedTheta layout)
      : em_(em), w_(std::move(w)), W_(std::move(W)), layout_(std::move(layout)) {}

  const ExplicitMoments& em_;
  WeightVector w_;
  Matrix W_;
  PackedTheta layout_;
};

}  // namespace dgmm
