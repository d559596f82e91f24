#include <dgmm/implicit.hpp>
#include <dgmm/tensor.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace dgmm {
namespace {

using testing::finite_difference;
using testing::params_from_raw;
using testing::random_params;
using testing::random_vector;
using testing::raw_from_params;
using testing::rel_err;

TEST(Bell, BaseCases) {
  EXPECT_EQ(bell_complete(std::vector<double>{}), 1.0);
  EXPECT_DOUBLE_EQ(bell_complete(std::vector<double>{3.0, 5.0}), 9.0 + 5.0);
  EXPECT_DOUBLE_EQ(bell_complete(std::vector<double>{1, 1, 1, 1}), 15.0);
}

TEST(Bell, TwoArgumentRecurrence) {
  EXPECT_DOUBLE_EQ(bell_two_arg(2.0, 3.0, 2), 4.0 + 3.0);
  EXPECT_DOUBLE_EQ(bell_two_arg(2.0, 3.0, 3), 8.0 + 3 * 2.0 * 3.0);
  EXPECT_EQ(bell_two_arg(0.7, -0.4, 0), 1.0);
}

TEST(Bell, TwoArgumentMatchesCompleteWithTrailingZeros) {
  for (int trial = 0; trial < 20; ++trial) {
    const Vector ab = random_vector(2, 1000 + trial, 3.0);
    for (int k = 0; k <= 10; ++k) {
      std::vector<double> x(k, 0.0);
      if (k >= 1) x[0] = ab[0];
      if (k >= 2) x[1] = ab[1];
      const double full = bell_complete(x);
      EXPECT_LE(relative_error(bell_two_arg(ab[0], ab[1], k), full, 1e-300), 1e-14)
          << "k=" << k;
    }
  }
}

// Partition count oracle: enumerate set partitions of {1..n} by restricted
// growth strings and weight each block of size s by x_s.
double bell_by_partitions(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  if (n == 0) return 1.0;
  std::vector<int> a(n, 0);
  double total = 0.0;
  while (true) {
    int blocks = *std::max_element(a.begin(), a.end()) + 1;
    std::vector<int> sizes(blocks, 0);
    for (int v : a) ++sizes[v];
    double prod = 1.0;
    for (int s : sizes) prod *= x[s - 1];
    total += prod;
    int i = n - 1;
    while (i > 0) {
      int mx = *std::max_element(a.begin(), a.begin() + i);
      if (a[i] <= mx) break;
      --i;
    }
    if (i == 0) break;
    ++a[i];
    std::fill(a.begin() + i + 1, a.end(), 0);
  }
  return total;
}

TEST(Bell, RecurrenceMatchesPartitionEnumeration) {
  for (int k = 1; k <= 7; ++k) {
    const Vector v = random_vector(k, 300 + k, 2.0);
    std::vector<double> x(v.data(), v.data() + k);
    EXPECT_LE(relative_error(bell_complete(x), bell_by_partitions(x)), 1e-12) << k;
  }
}

TEST(Bell, GaussianMomentCumulantBridge) {
  const double mu = 1.3, s2 = 2.2;
  const std::vector<double> kap{mu, s2, 0.0, 0.0};
  const auto B = bell_complete_all(kap);
  EXPECT_DOUBLE_EQ(B[1], mu);
  EXPECT_DOUBLE_EQ(B[2], mu * mu + s2);
  EXPECT_NEAR(B[3], mu * mu * mu + 3 * mu * s2, 1e-12);
  EXPECT_NEAR(B[4], std::pow(mu, 4) + 6 * mu * mu * s2 + 3 * s2 * s2, 1e-12);
}

TEST(Cumulants, FirstOrderIsCenterInnerProduct) {
  MixtureParams p(2, 2, 1);
  p.centers[0] << 1, 0;
  p.centers[1] << 0, 1;
  const auto t = pairwise_cumulants(p, 3);
  EXPECT_EQ(t(1, 0, 1), 0.0);
  EXPECT_EQ(t(1, 0, 0), 1.0);
}

TEST(Cumulants, SecondOrderZeroMeanRankOne) {
  MixtureParams p(1, 2, 1);
  p.factors[0] << 1, 0;
  const auto t = pairwise_cumulants(p, 2);
  EXPECT_DOUBLE_EQ(t(2, 0, 0), 1.0);
}

// Cumulants of the product of two independent N(1, 4) scalars from exact
// raw moments (E[X^n] for N(1,4) by the two-argument Bell recurrence, then
// E[(XY)^n] = E[X^n]^2) and the moment-to-cumulant recursion.
TEST(Cumulants, ScalarProductAgainstMomentConversion) {
  MixtureParams p(1, 1, 1);
  p.centers[0] << 1.0;
  p.factors[0] << 2.0;
  const int L = 6;
  const auto t = pairwise_cumulants(p, L);
  std::vector<double> m(L + 1);
  for (int n = 0; n <= L; ++n) m[n] = std::pow(bell_two_arg(1.0, 4.0, n), 2);
  // kappa_n = m_n - sum_{i=1}^{n-1} C(n-1, i-1) kappa_i m_{n-i}
  std::vector<double> kap(L + 1, 0.0);
  for (int n = 1; n <= L; ++n) {
    double acc = m[n];
    for (int i = 1; i < n; ++i) acc -= binomial(n - 1, i - 1) * kap[i] * m[n - i];
    kap[n] = acc;
  }
  for (int l = 1; l <= L; ++l) EXPECT_LE(relative_error(t(l, 0, 0), kap[l]), 1e-12) << l;
}

TEST(Alpha, SimpleValues) {
  MixtureParams p(2, 2, 1);
  p.centers[0] << 1, 0;
  p.centers[1] << 0, 1;
  const auto t = pairwise_cumulants(p, 1);
  EXPECT_DOUBLE_EQ(alpha(p, 1, t), 0.5);

  MixtureParams z(1, 3, 2);
  z.factors[0].setOnes();
  EXPECT_EQ(alpha(z, 1, pairwise_cumulants(z, 1)), 0.0);
}

TEST(Alpha, MatchesExplicitNormAndIsNonNegative) {
  for (int trial = 0; trial < 30; ++trial) {
    const int K = 1 + trial % 3, d = 2 + trial % 5, R = 1 + trial % 2;
    const auto p = random_params(K, d, R, 50 + trial, 1.5);
    const auto t = pairwise_cumulants(p, 4);
    for (int k = 1; k <= 4; ++k) {
      const double a = alpha(p, k, t);
      const double ref = std::pow(tensor_norm(population_moment_tensor(p, k)), 2);
      EXPECT_GE(a, 0.0);
      EXPECT_LE(relative_error(a, ref), 1e-10) << "K=" << K << " d=" << d << " k=" << k;
    }
  }
}

TEST(Beta, SimpleValues) {
  const auto p = random_params(2, 4, 2, 5);
  const Vector y = random_vector(4, 6);
  Vector mean = Vector::Zero(4);
  for (int j = 0; j < 2; ++j) mean += p.weights[j] * p.centers[j];
  EXPECT_NEAR(beta(p, y, 1), mean.dot(y), 1e-14);
  for (int k = 1; k <= 5; ++k) EXPECT_EQ(beta(p, Vector::Zero(4), k), 0.0);
}

TEST(Beta, MatchesExplicitInnerProduct) {
  for (int trial = 0; trial < 30; ++trial) {
    const int K = 1 + trial % 3, d = 2 + trial % 5, R = 1 + trial % 2;
    const auto p = random_params(K, d, R, 150 + trial, 1.5);
    const Vector y = random_vector(d, 250 + trial, 2.0);
    for (int k = 1; k <= 4; ++k) {
      const double ref = tensor_inner(population_moment_tensor(p, k), outer_power(y, k));
      EXPECT_LE(relative_error(beta(p, y, k), ref, 1e-12), 1e-10) << "k=" << k;
    }
  }
}

TEST(AlphaGradients, ZeroFactorsFirstOrder) {
  auto p = random_params(3, 4, 2, 9);
  for (auto& V : p.factors) V.setZero();
  const auto g = alpha_gradients(p, 1);
  Vector mean = Vector::Zero(4);
  for (int j = 0; j < 3; ++j) mean += p.weights[j] * p.centers[j];
  for (int j = 0; j < 3; ++j) {
    EXPECT_LE(rel_err(g.mu[j], 2.0 * p.weights[j] * mean), 1e-13);
    EXPECT_EQ(g.V[j].norm(), 0.0);
  }
}

TEST(AlphaGradients, FactorGradientVanishesAtFirstOrder) {
  const auto p = random_params(2, 5, 2, 19);
  const auto g = alpha_gradients(p, 1);
  for (const auto& V : g.V) EXPECT_EQ(V.norm(), 0.0);
}

TEST(AlphaGradients, MatchFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    const int K = 2 + trial % 2, d = 3 + trial % 3, R = 1 + trial % 2;
    const auto p = random_params(K, d, R, 400 + trial, 1.0);
    for (int k = 1; k <= 4; ++k) {
      const auto g = alpha_gradients(p, k);
      const Vector fd = finite_difference(
          [&](const Vector& x) {
            const auto q = params_from_raw(x, K, d, R);
            return alpha(q, k, pairwise_cumulants(q, k));
          },
          raw_from_params(p));
      EXPECT_LE(rel_err(testing::flatten_gradient(g), fd), 1e-5) << "trial " << trial << " k=" << k;
    }
  }
}

TEST(BetaGradients, WeightBlockIsBell) {
  const auto p = random_params(2, 4, 2, 23);
  const Vector y = random_vector(4, 24);
  const auto g = beta_gradients(p, y, 3);
  for (int j = 0; j < 2; ++j) {
    const double a = y.dot(p.centers[j]);
    const double b = (p.factors[j].transpose() * y).squaredNorm();
    EXPECT_DOUBLE_EQ(g.pi[j], bell_two_arg(a, b, 3));
  }
}

TEST(BetaGradients, FirstOrder) {
  const auto p = random_params(2, 4, 2, 25);
  const Vector y = random_vector(4, 26);
  const auto g = beta_gradients(p, y, 1);
  for (int j = 0; j < 2; ++j) {
    EXPECT_LE(rel_err(g.mu[j], p.weights[j] * y), 1e-15);
    EXPECT_EQ(g.V[j].norm(), 0.0);
  }
}

TEST(BetaGradients, MatchFiniteDifferences) {
  for (int trial = 0; trial < 10; ++trial) {
    const int K = 1 + trial % 3, d = 3 + trial % 3, R = 1 + trial % 2;
    const auto p = random_params(K, d, R, 500 + trial, 1.0);
    const Vector y = random_vector(d, 600 + trial, 1.5);
    for (int k = 1; k <= 4; ++k) {
      const auto g = beta_gradients(p, y, k);
      const Vector fd = finite_difference(
          [&](const Vector& x) { return beta(params_from_raw(x, K, d, R), y, k); },
          raw_from_params(p));
      EXPECT_LE(rel_err(testing::flatten_gradient(g), fd), 1e-5) << "trial " << trial << " k=" << k;
    }
  }
}

}  // namespace
}  // namespace dgmm
