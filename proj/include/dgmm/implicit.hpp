#pragma once

// Tensor-free moment quantities:
//   alpha_k     = ||M^(k)(theta)||^2
//   beta_{k}(y) = <M^(k)(theta), y^{⊗k}>
// through complete Bell polynomials of the pairwise cumulants of <X_i, X_j>,
// together with their analytic gradients. No d x d matrix is ever formed;
// covariance products go through R_max x R_max intermediates.

#include <dgmm/common.hpp>
#include <dgmm/model.hpp>

#include <span>
#include <vector>

namespace dgmm {

/// Complete Bell polynomials B_0..B_k of x_1..x_k via
/// B_k = sum_{l=0}^{k-1} C(k-1, l) B_{k-l-1} x_{l+1}.
inline std::vector<double> bell_complete_all(std::span<const double> x) {
  const int k = static_cast<int>(x.size());
  std::vector<double> B(k + 1, 0.0);
  B[0] = 1.0;
  for (int n = 1; n <= k; ++n) {
    double acc = 0.0;
    for (int l = 0; l < n; ++l) acc += binomial(n - 1, l) * B[n - l - 1] * x[l];
    B[n] = acc;
  }
  return B;
}

inline double bell_complete(std::span<const double> x) { return bell_complete_all(x).back(); }

/// B_0..B_k(a, b, 0, ..., 0): B_n = a B_{n-1} + (n-1) b B_{n-2}.
inline void bell_two_arg_all(double a, double b, int k, double* out) {
  out[0] = 1.0;
  if (k >= 1) out[1] = a;
  for (int n = 2; n <= k; ++n) out[n] = a * out[n - 1] + (n - 1) * b * out[n - 2];
}

inline std::vector<double> bell_two_arg_all(double a, double b, int k) {
  std::vector<double> out(k + 1);
  bell_two_arg_all(a, b, k, out.data());
  return out;
}

inline double bell_two_arg(double a, double b, int k) { return bell_two_arg_all(a, b, k).back(); }

/// kappa^(l)_{ij}, l = 1..max_order: cumulants of <X_i, X_j> for independent
/// X_i ~ N(mu_i, V_i V_i^T), X_j ~ N(mu_j, V_j V_j^T).
struct CumulantTable {
  int max_order = 0;
  int K = 0;
  std::vector<double> values;

  double operator()(int l, int i, int j) const {
    return values[(static_cast<std::size_t>(l - 1) * K + i) * K + j];
  }
  double& operator()(int l, int i, int j) {
    return values[(static_cast<std::size_t>(l - 1) * K + i) * K + j];
  }
  /// kappa^(1..max_order)_{ij} as a contiguous list.
  std::vector<double> pair(int i, int j) const {
    std::vector<double> out(max_order);
    for (int l = 1; l <= max_order; ++l) out[l - 1] = (*this)(l, i, j);
    return out;
  }
};

/// Gradients of kappa^(l)(theta_i, theta_j) with respect to the second
/// component's center and factor.
struct CumulantGradients {
  int max_order = 0;
  int K = 0;
  std::vector<Vector> d_mu;  // indexed like CumulantTable
  std::vector<Matrix> d_V;

  std::size_t at(int l, int i, int j) const {
    return (static_cast<std::size_t>(l - 1) * K + i) * K + j;
  }
};

namespace detail {

/// Operators A = V_i V_i^T and B = V_j V_j^T applied to d-vectors through
/// their thin factors.
struct PairOps {
  const Matrix& Vi;
  const Matrix& Vj;
  Vector apply(bool is_b, const Vector& x) const {
    const Matrix& V = is_b ? Vj : Vi;
    return V * (V.transpose() * x);
  }
};

/// value = u^T X_1 ... X_r v for X in {A, B}; when `grad_V` is given, adds
/// coef * d value / d V_j (all B positions) into it.
inline double chain(const PairOps& ops, const std::vector<bool>& seq, const Vector& u,
                    const Vector& v, double coef, Matrix* grad_V, Vector* right_full) {
  const int r = static_cast<int>(seq.size());
  // rights[p] = X_{p+1} ... X_r v  (rights[r] = v)
  std::vector<Vector> rights(r + 1);
  rights[r] = v;
  for (int p = r - 1; p >= 0; --p) rights[p] = ops.apply(seq[p], rights[p + 1]);
  if (right_full) *right_full = rights[0];
  const double value = u.dot(rights[0]);
  if (grad_V) {
    Vector left = u;  // X_{p-1} ... X_1 u
    for (int p = 0; p < r; ++p) {
      if (seq[p]) {
        const Vector& right = rights[p + 1];
        const Eigen::RowVectorXd vr = (ops.Vj.transpose() * right).transpose();
        const Eigen::RowVectorXd vl = (ops.Vj.transpose() * left).transpose();
        grad_V->noalias() += coef * (left * vr + right * vl);
      }
      left = ops.apply(seq[p], left);
    }
  }
  return value;
}

/// Alternating sequence starting with `first_b`, of length len.
inline std::vector<bool> alternating(bool first_b, int len) {
  std::vector<bool> s(len);
  for (int p = 0; p < len; ++p) s[p] = (p % 2 == 0) ? first_b : !first_b;
  return s;
}

/// kappa^(l) for one (i, j) pair and optionally its gradients wrt (mu_j, V_j).
inline double pair_cumulant(const Vector& mu_i, const Matrix& Vi, const Vector& mu_j,
                            const Matrix& Vj, const Matrix& P, int l, Vector* d_mu, Matrix* d_V) {
  const PairOps ops{Vi, Vj};
  if (d_mu) d_mu->setZero(mu_j.size());
  if (d_V) d_V->setZero(Vj.rows(), Vj.cols());
  if (l == 1) {
    if (d_mu) *d_mu = mu_i;
    return mu_i.dot(mu_j);
  }
  const double lf = factorial(l);
  if (l % 2 == 1) {
    // l! mu_j^T (AB)^m mu_i
    const int m = (l - 1) / 2;
    Vector right;
    const double v = chain(ops, alternating(false, 2 * m), mu_j, mu_i, lf, d_V, &right);
    if (d_mu) *d_mu = lf * right;
    return lf * v;
  }
  const int m = l / 2;
  // (l-1)! Tr((AB)^m) = (l-1)! Tr((P P^T)^m), P = V_i^T V_j.
  const Matrix PPt = P * P.transpose();
  Matrix pow = Matrix::Identity(P.rows(), P.rows());
  for (int s = 0; s + 1 < m; ++s) pow = pow * PPt;
  const double trace_term = factorial(l - 1) * (pow * PPt).trace();
  if (d_V) d_V->noalias() += lf * (Vi * (pow * P));
  // (l!/2) mu_i^T B (AB)^{m-1} mu_i
  const double t2 = chain(ops, alternating(true, 2 * m - 1), mu_i, mu_i, 0.5 * lf, d_V, nullptr);
  // (l!/2) mu_j^T (AB)^{m-1} A mu_j
  Vector right;
  const double t3 = chain(ops, alternating(false, 2 * m - 1), mu_j, mu_j, 0.5 * lf, d_V, &right);
  if (d_mu) *d_mu = lf * right;
  return trace_term + 0.5 * lf * (t2 + t3);
}

}  // namespace detail

inline CumulantTable pairwise_cumulants(const MixtureParams& p, int max_order,
                                        CumulantGradients* grads = nullptr) {
  require(max_order >= 1, Errc::invalid_argument, "cumulant order must be >= 1");
  const int K = p.components();
  CumulantTable table;
  table.max_order = max_order;
  table.K = K;
  table.values.assign(static_cast<std::size_t>(max_order) * K * K, 0.0);
  if (grads) {
    grads->max_order = max_order;
    grads->K = K;
    grads->d_mu.assign(table.values.size(), Vector());
    grads->d_V.assign(table.values.size(), Matrix());
  }
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      // kappa is symmetric in (i, j); gradients (wrt the second slot) are not.
      const bool need_value = j >= i;
      if (!need_value && !grads) {
        for (int l = 1; l <= max_order; ++l) table(l, i, j) = table(l, j, i);
        continue;
      }
      const Matrix P = p.factors[i].transpose() * p.factors[j];
      for (int l = 1; l <= max_order; ++l) {
        Vector* dm = grads ? &grads->d_mu[grads->at(l, i, j)] : nullptr;
        Matrix* dv = grads ? &grads->d_V[grads->at(l, i, j)] : nullptr;
        table(l, i, j) =
            detail::pair_cumulant(p.centers[i], p.factors[i], p.centers[j], p.factors[j], P, l, dm, dv);
      }
    }
  }
  return table;
}

/// ||M^(k)(theta)||^2 = sum_{i,j} pi_i pi_j B_k(kappa^(1)_{ij}, ..., kappa^(k)_{ij}).
inline double alpha(const MixtureParams& p, int k, const CumulantTable& table) {
  require(table.max_order >= k, Errc::invalid_argument, "cumulant table does not cover order k");
  if (k == 0) return std::pow(p.weights.sum(), 2);
  const int K = p.components();
  double acc = 0.0;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      const auto kap = table.pair(i, j);
      acc += p.weights[i] * p.weights[j] * bell_complete(std::span<const double>(kap.data(), k));
    }
  }
  return acc;
}

/// Gradient blocks with respect to (pi, mu_j, V_j).
struct ParamGradient {
  Vector pi;
  std::vector<Vector> mu;
  std::vector<Matrix> V;

  ParamGradient() = default;
  ParamGradient(int K, int d, int R)
      : pi(Vector::Zero(K)), mu(K, Vector::Zero(d)), V(K, Matrix::Zero(d, R)) {}

  ParamGradient& add_scaled(const ParamGradient& o, double s) {
    pi += s * o.pi;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      mu[j] += s * o.mu[j];
      V[j] += s * o.V[j];
    }
    return *this;
  }
};

/// All alpha_k for k = 1..L and, when requested, their gradients.
/// Needs a table and cumulant gradients covering order L.
inline void alpha_with_gradients(const MixtureParams& p, int L, const CumulantTable& table,
                                 const CumulantGradients* cg, std::vector<double>& alphas,
                                 std::vector<ParamGradient>* grads) {
  require(table.max_order >= L, Errc::invalid_argument, "cumulant table does not cover order L");
  const int K = p.components();
  const int d = p.dim();
  const int R = p.max_rank();
  alphas.assign(L + 1, 0.0);
  if (grads) grads->assign(L + 1, ParamGradient(K, d, R));
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      const auto kap = table.pair(i, j);
      const auto B = bell_complete_all(std::span<const double>(kap.data(), L));
      const double wij = p.weights[i] * p.weights[j];
      for (int k = 1; k <= L; ++k) {
        alphas[k] += wij * B[k];
        if (!grads) continue;
        ParamGradient& g = (*grads)[k];
        // d alpha / d pi_j = 2 sum_i pi_i B_k(kappa_ij)  (kappa symmetric).
        g.pi[j] += 2.0 * p.weights[i] * B[k];
        // d/d(theta_j): both slots of the (i,j) and (j,i) terms, equal by symmetry.
        for (int l = 1; l <= k; ++l) {
          const double c = 2.0 * wij * binomial(k, l) * B[k - l];
          if (c == 0.0) continue;
          const std::size_t at = cg->at(l, i, j);
          g.mu[j] += c * cg->d_mu[at];
          g.V[j] += c * cg->d_V[at];
        }
      }
    }
  }
}

inline ParamGradient alpha_gradients(const MixtureParams& p, int k) {
  CumulantGradients cg;
  const CumulantTable table = pairwise_cumulants(p, k, &cg);
  std::vector<double> alphas;
  std::vector<ParamGradient> grads;
  alpha_with_gradients(p, k, table, &cg, alphas, &grads);
  return grads[k];
}

/// <M^(k)(theta), y^{⊗k}> = sum_j pi_j B_k(y^T mu_j, ||V_j^T y||^2, 0, ..., 0).
inline double beta(const MixtureParams& p, const Vector& y, int k) {
  double acc = 0.0;
  for (int j = 0; j < p.components(); ++j) {
    const double a = y.dot(p.centers[j]);
    const double b = (p.factors[j].transpose() * y).squaredNorm();
    acc += p.weights[j] * bell_two_arg(a, b, k);
  }
  return acc;
}

inline ParamGradient beta_gradients(const MixtureParams& p, const Vector& y, int k) {
  const int K = p.components();
  ParamGradient g(K, p.dim(), p.max_rank());
  for (int j = 0; j < K; ++j) {
    const Vector vty = p.factors[j].transpose() * y;
    const auto B = bell_two_arg_all(y.dot(p.centers[j]), vty.squaredNorm(), k);
    g.pi[j] = B[k];
    if (k >= 1) g.mu[j] = (k * p.weights[j] * B[k - 1]) * y;
    if (k >= 2) g.V[j] = (2.0 * binomial(k, 2) * p.weights[j] * B[k - 2]) * (y * vty.transpose());
  }
  return g;
}

}  // namespace dgmm
