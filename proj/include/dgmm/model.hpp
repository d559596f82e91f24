#pragma once

// Mixture parameters, packing with softmax weights, and the synthetic
// data/ground-truth/initialisation generators.

#include <dgmm/common.hpp>
#include <dgmm/rng.hpp>

#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace dgmm {

/// Heteroscedastic low-rank Gaussian mixture: component j is N(mu_j, V_j V_j^T)
/// with V_j of fixed width R_max (unused columns are zero).
struct MixtureParams {
  Vector weights;
  std::vector<Vector> centers;
  std::vector<Matrix> factors;

  MixtureParams() = default;
  MixtureParams(int K, int d, int R_max)
      : weights(Vector::Constant(K, 1.0 / K)),
        centers(K, Vector::Zero(d)),
        factors(K, Matrix::Zero(d, R_max)) {}

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return centers.empty() ? 0 : static_cast<int>(centers[0].size()); }
  int max_rank() const { return factors.empty() ? 0 : static_cast<int>(factors[0].cols()); }

  Matrix covariance(int j) const { return factors[j] * factors[j].transpose(); }

  /// Throws unless shapes are consistent and the weights lie in the open simplex.
  void validate() const {
    const int K = components();
    require(K >= 1, Errc::invalid_argument, "mixture needs at least one component");
    require(static_cast<int>(centers.size()) == K && static_cast<int>(factors.size()) == K,
            Errc::shape_mismatch, "centers/factors count differs from weight count");
    const int d = dim();
    const int R = max_rank();
    require(d >= 1, Errc::invalid_argument, "dimension must be positive");
    for (int j = 0; j < K; ++j) {
      require(centers[j].size() == d, Errc::shape_mismatch, "center length differs from d");
      require(factors[j].rows() == d && factors[j].cols() == R, Errc::shape_mismatch,
              "factor shape differs from d x R_max");
      require(centers[j].allFinite() && factors[j].allFinite(), Errc::non_finite,
              "non-finite mixture parameter");
    }
    for (int j = 0; j < K; ++j) {
      require(weights[j] > 0.0 && weights[j] < 1.0 + 1e-15, Errc::domain,
              "mixing weights must lie in the open simplex");
    }
    require(std::abs(weights.sum() - 1.0) <= 1e-12, Errc::domain, "mixing weights must sum to one");
  }
};

/// Observations as an N x d matrix (one sample per row).
struct SampleSet {
  Matrix data;
  /// Component that generated each row, when known (synthetic data only).
  std::vector<int> labels;
  std::optional<std::uint64_t> seed;

  Index size() const { return data.rows(); }
  Index dim() const { return data.cols(); }

  void validate() const {
    require(data.rows() >= 1, Errc::empty_sample, "sample set has no rows");
    require(data.allFinite(), Errc::non_finite, "sample set has non-finite entries");
  }
};

enum class RankMode { identical, uniform_random };

struct GroundTruthSpec {
  int K = 2;
  int d = 10;
  int R_max = 2;
  RankMode rank_mode = RankMode::identical;
  double lambda_min = 25.0;
  double lambda_max = 100.0;
  std::uint64_t seed = 0;
  /// Fixed mixing weights; drawn Unif(0,1) and normalised when absent.
  std::optional<std::vector<double>> weights;
  /// Fixed per-component ranks; overrides rank_mode when present.
  std::optional<std::vector<int>> ranks;

  void validate() const {
    require(K >= 1, Errc::invalid_argument, "K must be positive");
    require(d >= 1, Errc::invalid_argument, "d must be positive");
    require(R_max >= 1 && R_max <= d, Errc::invalid_argument, "need 1 <= R_max <= d");
    require(lambda_min > 0.0 && lambda_min <= lambda_max, Errc::invalid_argument,
            "need 0 < lambda_min <= lambda_max");
    if (weights) {
      require(static_cast<int>(weights->size()) == K, Errc::shape_mismatch, "weights length != K");
      double s = 0.0;
      for (double w : *weights) {
        require(w > 0.0 && w < 1.0, Errc::domain, "fixed weights must lie in (0,1)");
        s += w;
      }
      require(std::abs(s - 1.0) <= 1e-12, Errc::domain, "fixed weights must sum to one");
    }
    if (ranks) {
      require(static_cast<int>(ranks->size()) == K, Errc::shape_mismatch, "ranks length != K");
      for (int r : *ranks) require(r >= 1 && r <= R_max, Errc::invalid_argument, "rank outside [1, R_max]");
    }
  }
};

/// Flat unconstrained parameter vector:
/// [logits (K); mu_1..mu_K (K*d); vec(V_1)..vec(V_K) (K*d*R_max, column-major)].
struct PackedTheta {
  Vector values;
  int K = 0;
  int d = 0;
  int R_max = 0;
  double tau = 1.0;

  static Index length(int K, int d, int R_max) {
    return static_cast<Index>(K) + static_cast<Index>(K) * d + static_cast<Index>(K) * d * R_max;
  }
  Index center_offset(int j) const { return K + static_cast<Index>(j) * d; }
  Index factor_offset(int j) const {
    return K + static_cast<Index>(K) * d + static_cast<Index>(j) * d * R_max;
  }
};

/// Max-shifted softmax with temperature tau.
inline Vector softmax(const Vector& logits, double tau) {
  require(tau > 0.0, Errc::domain, "softmax temperature must be positive");
  const double mx = logits.maxCoeff();
  Vector e = ((logits.array() - mx) / tau).exp().matrix();
  return e / e.sum();
}

inline PackedTheta pack(const MixtureParams& params, double tau = 1.0) {
  require(tau > 0.0, Errc::domain, "softmax temperature must be positive");
  const int K = params.components();
  const int d = params.dim();
  const int R = params.max_rank();
  for (int j = 0; j < K; ++j) {
    require(params.weights[j] > 0.0, Errc::domain, "cannot pack a non-positive mixing weight");
  }
  PackedTheta theta;
  theta.K = K;
  theta.d = d;
  theta.R_max = R;
  theta.tau = tau;
  theta.values.resize(PackedTheta::length(K, d, R));
  for (int j = 0; j < K; ++j) theta.values[j] = tau * std::log(params.weights[j]);
  for (int j = 0; j < K; ++j) theta.values.segment(theta.center_offset(j), d) = params.centers[j];
  for (int j = 0; j < K; ++j) {
    theta.values.segment(theta.factor_offset(j), static_cast<Index>(d) * R) =
        Eigen::Map<const Vector>(params.factors[j].data(), static_cast<Index>(d) * R);
  }
  return theta;
}

inline MixtureParams unpack(const PackedTheta& theta) {
  require(theta.values.size() == PackedTheta::length(theta.K, theta.d, theta.R_max),
          Errc::shape_mismatch, "packed vector length does not match (K, d, R_max)");
  MixtureParams p(theta.K, theta.d, theta.R_max);
  p.weights = softmax(theta.values.head(theta.K), theta.tau);
  for (int j = 0; j < theta.K; ++j) {
    p.centers[j] = theta.values.segment(theta.center_offset(j), theta.d);
    p.factors[j] = Eigen::Map<const Matrix>(theta.values.data() + theta.factor_offset(j), theta.d,
                                            theta.R_max);
  }
  return p;
}

/// Rewrites `theta.values` in place from `values` (same layout) and unpacks.
inline MixtureParams unpack(const Vector& values, const PackedTheta& layout) {
  PackedTheta t = layout;
  t.values = values;
  return unpack(t);
}

/// J^T grad_pi for J_ab = d pi_a / d logit_b = pi_a (delta_ab - pi_b) / tau.
inline Vector chain_simplex_gradient(const Vector& grad_pi, const Vector& pi, double tau) {
  require(grad_pi.size() == pi.size(), Errc::shape_mismatch, "gradient/weight length mismatch");
  const double mean = pi.dot(grad_pi);
  return (pi.array() * (grad_pi.array() - mean) / tau).matrix();
}

/// Haar-distributed d x r matrix with orthonormal columns (QR of a Gaussian
/// matrix with the sign of R's diagonal fixed positive).
template <class Rng>
Matrix random_orthonormal(int d, int r, Rng& rng) {
  require(r >= 0 && r <= d, Errc::invalid_argument, "orthonormal frame needs r <= d");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix G(d, r);
  for (Index c = 0; c < r; ++c)
    for (Index i = 0; i < d; ++i) G(i, c) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(d, r);
  const Matrix& R = qr.matrixQR();
  for (Index c = 0; c < r; ++c) {
    if (R(c, c) < 0.0) Q.col(c) *= -1.0;
  }
  return Q;
}

template <class Rng>
Vector random_unit_vector(int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  do {
    for (Index i = 0; i < d; ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

/// Draws N rows y = mu_h + V_h z with h ~ pi and z ~ N(0, I_{R_max}). Row n
/// uses its own counter stream derived from (seed, n), so output does not
/// depend on how rows are partitioned.
inline SampleSet sample_mixture(const MixtureParams& params, Index N, std::uint64_t seed) {
  params.validate();
  require(N >= 1, Errc::empty_sample, "requested zero samples");
  const int K = params.components();
  const int d = params.dim();
  const int R = params.max_rank();
  Vector cumulative(K);
  double acc = 0.0;
  for (int j = 0; j < K; ++j) cumulative[j] = (acc += params.weights[j]);

  SampleSet out;
  out.seed = seed;
  out.data.resize(N, d);
  out.labels.resize(static_cast<std::size_t>(N));
  Vector z(R);
  for (Index n = 0; n < N; ++n) {
    CounterRng rng(seed, static_cast<std::uint64_t>(n));
    std::uniform_real_distribution<double> unif(0.0, acc);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double u = unif(rng);
    int h = 0;
    while (h < K - 1 && u >= cumulative[h]) ++h;
    for (Index r = 0; r < R; ++r) z[r] = normal(rng);
    out.data.row(n) = (params.centers[h] + params.factors[h] * z).transpose();
    out.labels[static_cast<std::size_t>(n)] = h;
  }
  return out;
}

inline MixtureParams generate_ground_truth(const GroundTruthSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, 0);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::uniform_real_distribution<double> eig(spec.lambda_min, spec.lambda_max);
  std::uniform_int_distribution<int> rank_draw(1, spec.R_max);

  MixtureParams p(spec.K, spec.d, spec.R_max);
  if (spec.weights) {
    for (int j = 0; j < spec.K; ++j) p.weights[j] = (*spec.weights)[j];
  } else {
    for (int j = 0; j < spec.K; ++j) {
      double u = 0.0;
      while (u == 0.0) u = unif01(rng);
      p.weights[j] = u;
    }
    p.weights /= p.weights.sum();
  }
  for (int j = 0; j < spec.K; ++j) p.centers[j] = random_unit_vector(spec.d, rng);
  for (int j = 0; j < spec.K; ++j) {
    int rank = spec.R_max;
    if (spec.ranks) {
      rank = (*spec.ranks)[j];
    } else if (spec.rank_mode == RankMode::uniform_random) {
      rank = rank_draw(rng);
    }
    const Matrix U = random_orthonormal(spec.d, rank, rng);
    for (int r = 0; r < rank; ++r) p.factors[j].col(r) = U.col(r) * std::sqrt(eig(rng));
  }
  return p;
}

/// Uniform weights, centers on the unit sphere, orthonormal d x R_max factors.
inline MixtureParams default_initialization(int K, int d, int R_max, std::uint64_t seed) {
  require(K >= 1, Errc::invalid_argument, "K must be positive");
  require(R_max >= 1 && R_max <= d, Errc::invalid_argument, "need 1 <= R_max <= d");
  CounterRng rng(seed, 0);
  MixtureParams p(K, d, R_max);
  for (int j = 0; j < K; ++j) p.centers[j] = random_unit_vector(d, rng);
  for (int j = 0; j < K; ++j) p.factors[j] = random_orthonormal(d, R_max, rng);
  return p;
}

/// Rank of each factor's column space (count of nonzero columns).
inline std::vector<int> factor_ranks(const MixtureParams& p) {
  std::vector<int> ranks;
  for (const auto& V : p.factors) {
    int r = 0;
    for (Index c = 0; c < V.cols(); ++c) r += V.col(c).squaredNorm() > 0.0 ? 1 : 0;
    ranks.push_back(r);
  }
  return ranks;
}

}  // namespace dgmm
