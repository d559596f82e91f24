#pragma once

// Relative estimation errors after matching estimated components to the
// ground truth.

#include <dgmm/model.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

namespace dgmm {

enum class CovarianceNorm { spectral, frobenius };

inline double matrix_norm(const Matrix& A, CovarianceNorm norm) {
  if (norm == CovarianceNorm::frobenius) return A.norm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline constexpr int kMaxAlignComponents = 10;

/// perm[j] is the estimated component matched to true component j. Minimises
/// sum_j ||mu_hat_perm[j] - mu*_j|| / ||mu*_j||; ties are broken by the
/// covariance error sum, then by the lexicographically smallest permutation.
inline std::vector<int> align_components(const MixtureParams& est, const MixtureParams& truth,
                                         CovarianceNorm norm = CovarianceNorm::spectral) {
  const int K = truth.components();
  require(est.components() == K && est.dim() == truth.dim(), Errc::shape_mismatch,
          "estimate and truth differ in K or d");
  require(K <= kMaxAlignComponents, Errc::guard_exceeded, "alignment search limited to K <= 10");
  Matrix center_cost(K, K), cov_cost(K, K);
  for (int j = 0; j < K; ++j) {
    const Matrix sigma = truth.covariance(j);
    const double cn = std::max(truth.centers[j].norm(), 1e-300);
    const double sn = std::max(matrix_norm(sigma, norm), 1e-300);
    for (int e = 0; e < K; ++e) {
      center_cost(j, e) = (est.centers[e] - truth.centers[j]).norm() / cn;
      cov_cost(j, e) = matrix_norm(est.covariance(e) - sigma, norm) / sn;
    }
  }
  std::vector<int> perm(K), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_c = std::numeric_limits<double>::infinity(), best_s = best_c;
  // Tolerance for calling two center costs equal.
  const double tie = 1e-12;
  do {
    double c = 0.0, s = 0.0;
    for (int j = 0; j < K; ++j) {
      c += center_cost(j, perm[j]);
      s += cov_cost(j, perm[j]);
    }
    // next_permutation visits in lexicographic order, so strict improvement
    // keeps the lexicographically first among exact ties.
    if (c < best_c - tie || (std::abs(c - best_c) <= tie && s < best_s - tie)) {
      best_c = c;
      best_s = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct ErrorMetrics {
  double err_pi = 0.0;
  double err_mu = 0.0;
  double err_sigma = 0.0;
  std::vector<int> permutation;
};

/// Averaged relative errors of weights, centers and covariances (covariances
/// compared as V V^T, so right rotations of a factor do not matter).
inline ErrorMetrics error_metrics(const MixtureParams& est, const MixtureParams& truth,
                                  CovarianceNorm norm = CovarianceNorm::spectral) {
  ErrorMetrics m;
  m.permutation = align_components(est, truth, norm);
  const int K = truth.components();
  for (int j = 0; j < K; ++j) {
    const int e = m.permutation[j];
    const Matrix sigma = truth.covariance(j);
    const double cn = truth.centers[j].norm();
    const double sn = matrix_norm(sigma, norm);
    require(truth.weights[j] > 0.0 && cn > 0.0 && sn > 0.0, Errc::domain,
            "ground truth has a zero-norm denominator");
    m.err_pi += std::abs(est.weights[e] - truth.weights[j]) / truth.weights[j];
    m.err_mu += (est.centers[e] - truth.centers[j]).norm() / cn;
    m.err_sigma += matrix_norm(est.covariance(e) - sigma, norm) / sn;
  }
  m.err_pi /= K;
  m.err_mu /= K;
  m.err_sigma /= K;
  return m;
}

}  // namespace dgmm
