#include <dgmm/metrics.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace dgmm {
namespace {

MixtureParams truth_fixture(int K, int d, int R, std::uint64_t seed) {
  GroundTruthSpec spec;
  spec.K = K;
  spec.d = d;
  spec.R_max = R;
  spec.seed = seed;
  return generate_ground_truth(spec);
}

MixtureParams permuted(const MixtureParams& p, const std::vector<int>& order) {
  MixtureParams out = p;
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.weights[static_cast<Index>(j)] = p.weights[order[j]];
    out.centers[j] = p.centers[static_cast<std::size_t>(order[j])];
    out.factors[j] = p.factors[static_cast<std::size_t>(order[j])];
  }
  return out;
}

TEST(Metrics, IdenticalParametersGiveZeroError) {
  const auto truth = truth_fixture(3, 5, 2, 1);
  const auto m = error_metrics(truth, truth);
  EXPECT_EQ(m.err_pi, 0.0);
  EXPECT_EQ(m.err_mu, 0.0);
  EXPECT_EQ(m.err_sigma, 0.0);
  EXPECT_EQ(m.permutation, (std::vector<int>{0, 1, 2}));
}

TEST(Metrics, SwappedComponentsAreAligned) {
  const auto truth = truth_fixture(2, 4, 2, 2);
  const auto est = permuted(truth, {1, 0});
  EXPECT_EQ(align_components(est, truth), (std::vector<int>{1, 0}));
  const auto m = error_metrics(est, truth);
  EXPECT_EQ(m.err_pi, 0.0);
  EXPECT_EQ(m.err_mu, 0.0);
  EXPECT_EQ(m.err_sigma, 0.0);
}

TEST(Metrics, FactorRotationDoesNotChangeCovarianceError) {
  const auto truth = truth_fixture(2, 6, 3, 3);
  MixtureParams est = truth;
  CounterRng rng(4, 0);
  for (auto& V : est.factors) V = V * random_orthonormal(3, 3, rng);
  for (auto norm : {CovarianceNorm::spectral, CovarianceNorm::frobenius}) {
    const auto m = error_metrics(est, truth, norm);
    EXPECT_LE(m.err_sigma, 1e-13);
    EXPECT_EQ(m.err_mu, 0.0);
  }
}

TEST(Metrics, RecoversThreeCyclePermutationUnderNoise) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const auto truth = truth_fixture(3, 5, 2, seed);
    // est component e holds truth component order[e]; truth j lives at the
    // estimate whose order entry equals j.
    const std::vector<int> order = {1, 2, 0};
    MixtureParams est = permuted(truth, order);
    for (int e = 0; e < 3; ++e) {
      est.centers[static_cast<std::size_t>(e)] += 0.01 * testing::random_vector(5, seed * 10 + e);
    }
    const auto perm = align_components(est, truth);
    EXPECT_EQ(perm, (std::vector<int>{2, 0, 1})) << "seed " << seed;
    EXPECT_LE(error_metrics(est, truth).err_mu, 0.05);
  }
}

TEST(Metrics, KnownErrorValues) {
  MixtureParams truth(2, 2, 1), est(2, 2, 1);
  truth.weights << 0.4, 0.6;
  est.weights << 0.5, 0.5;
  truth.centers[0] << 1.0, 0.0;
  truth.centers[1] << 0.0, 2.0;
  est.centers[0] << 1.0, 0.5;
  est.centers[1] << 0.0, 2.0;
  truth.factors[0] << 2.0, 0.0;
  truth.factors[1] << 0.0, 1.0;
  est.factors[0] << 2.0, 0.0;
  est.factors[1] << 0.0, std::sqrt(2.0);
  const auto m = error_metrics(est, truth);
  EXPECT_NEAR(m.err_pi, 0.5 * (0.1 / 0.4 + 0.1 / 0.6), 1e-15);
  EXPECT_NEAR(m.err_mu, 0.5 * 0.5, 1e-15);
  EXPECT_NEAR(m.err_sigma, 0.5 * 1.0, 1e-15);
}

TEST(Metrics, SpectralAndFrobeniusDiffer) {
  const Matrix A = Vector::Ones(3).asDiagonal();
  EXPECT_NEAR(matrix_norm(A, CovarianceNorm::spectral), 1.0, 1e-15);
  EXPECT_NEAR(matrix_norm(A, CovarianceNorm::frobenius), std::sqrt(3.0), 1e-15);
  Matrix B(2, 2);
  B << 0.0, -3.0, -3.0, 0.0;
  EXPECT_NEAR(matrix_norm(B, CovarianceNorm::spectral), 3.0, 1e-14);
}

TEST(Metrics, TieOnCentersBrokenByCovariance) {
  MixtureParams truth(2, 2, 1);
  truth.weights << 0.5, 0.5;
  truth.centers[0] << 1.0, 0.0;
  truth.centers[1] << 1.0, 0.0;
  truth.factors[0] << 3.0, 0.0;
  truth.factors[1] << 0.0, 3.0;
  const auto est = permuted(truth, {1, 0});
  EXPECT_EQ(align_components(est, truth), (std::vector<int>{1, 0}));
  EXPECT_EQ(error_metrics(est, truth).err_sigma, 0.0);
}

TEST(Metrics, FullTieKeepsIdentity) {
  const auto truth = truth_fixture(1, 3, 1, 5);
  MixtureParams two(2, 3, 1);
  two.weights << 0.5, 0.5;
  two.centers = {truth.centers[0], truth.centers[0]};
  two.factors = {truth.factors[0], truth.factors[0]};
  EXPECT_EQ(align_components(two, two), (std::vector<int>{0, 1}));
}

TEST(Metrics, RejectsMismatchedShapesAndLargeK) {
  EXPECT_THROW(error_metrics(truth_fixture(2, 3, 1, 6), truth_fixture(3, 3, 1, 6)), Error);
  EXPECT_THROW(error_metrics(truth_fixture(2, 3, 1, 6), truth_fixture(2, 4, 1, 6)), Error);
  const auto big = truth_fixture(11, 3, 1, 7);
  EXPECT_THROW(align_components(big, big), Error);
}

}  // namespace
}  // namespace dgmm
