#include "cgpdf/metrics.hpp"
#include "cgpdf/mixture.hpp"
#include "linear_benchmark.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace cgpdf;
using namespace cgpdf::testing;

namespace {

GaussianMixture one_dim(std::vector<double> means, std::vector<double> vars) {
  GaussianMixture mix;
  mix.n_obs = 0;
  mix.n_hid = 1;
  mix.means.resize(static_cast<Eigen::Index>(means.size()), 1);
  for (std::size_t i = 0; i < means.size(); ++i) {
    mix.means(static_cast<Eigen::Index>(i), 0) = means[i];
    mix.hid_cov.push_back(scalar(vars[i]));
  }
  return mix;
}

/// Random joint mixture with n_obs observed and n_hid hidden variables.
GaussianMixture random_mixture(std::size_t L, int n_obs, int n_hid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix uI(static_cast<Eigen::Index>(L), n_obs);
  for (Eigen::Index i = 0; i < uI.size(); ++i) uI.data()[i] = n(rng);
  BandwidthMatrix H{Vector::Constant(n_obs, 0.3), std::vector<bool>(n_obs, false)};
  std::vector<ConditionalGaussianState> states;
  for (std::size_t i = 0; i < L; ++i) {
    Matrix A(n_hid, n_hid);
    for (Eigen::Index k = 0; k < A.size(); ++k) A.data()[k] = 0.5 * n(rng);
    Vector m(n_hid);
    for (Eigen::Index k = 0; k < m.size(); ++k) m[k] = 2.0 * n(rng);
    states.push_back({m, A * A.transpose() + 0.1 * Matrix::Identity(n_hid, n_hid), 0.5});
  }
  return assemble_joint(uI, H, states);
}

}  // namespace

TEST(Assemble, SingleStandardComponentAtOrigin) {
  BandwidthMatrix H{Vector::Ones(1), {false}};
  const auto mix = assemble_joint(Matrix::Zero(1, 1), H, {{vscalar(0.0), scalar(1.0), 0.0}});
  const Vector v = evaluate_points(mix, Matrix::Zero(1, 2));
  EXPECT_NEAR(v[0], 1.0 / (2.0 * std::numbers::pi), 1e-15);
}

TEST(Assemble, EqualWeightsAndBlockDiagonal) {
  const auto mix = random_mixture(500, 2, 3, 1);
  EXPECT_DOUBLE_EQ(mix.weight(), 1.0 / 500.0);
  EXPECT_NEAR(mix.weight() * static_cast<double>(mix.components()), 1.0, 1e-15);
  const Matrix c = mix.component_cov(17);
  EXPECT_EQ(c.topRightCorner(2, 3).norm(), 0.0);
  EXPECT_EQ(c.bottomLeftCorner(3, 2).norm(), 0.0);
  EXPECT_EQ(Vector(c.topLeftCorner(2, 2).diagonal()), mix.H);
  EXPECT_EQ(c.bottomRightCorner(3, 3), mix.hid_cov[17]);
}

TEST(Assemble, Errors) {
  BandwidthMatrix H{Vector::Ones(1), {false}};
  ConditionalGaussianState a{vscalar(0), scalar(1), 0.0}, b{vscalar(0), scalar(1), 0.5};
  EXPECT_THROW(assemble_joint(Matrix::Zero(2, 1), H, {a}), ConfigError);
  EXPECT_THROW(assemble_joint(Matrix::Zero(2, 1), H, {a, b}), ConfigError);
  BandwidthMatrix H2{Vector::Ones(2), {false, false}};
  EXPECT_THROW(assemble_joint(Matrix::Zero(1, 1), H2, {a}), ConfigError);
}

TEST(Marginal, IdentityAndSubBlocks) {
  const auto mix = random_mixture(20, 2, 3, 2);
  const auto same = marginal(mix, {0, 1, 2, 3, 4});
  EXPECT_EQ(same.means, mix.means);
  EXPECT_EQ(same.H, mix.H);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(same.hid_cov[i], mix.hid_cov[i]);

  const auto pair = marginal(mix, {1, 3});
  const Matrix c = pair.component_cov(4);
  EXPECT_EQ(c(0, 1), 0.0);
  EXPECT_EQ(c(0, 0), mix.H[1]);
  EXPECT_EQ(c(1, 1), mix.hid_cov[4](1, 1));
  EXPECT_THROW(marginal(mix, {5}), ConfigError);
  EXPECT_THROW(marginal(mix, {3, 1}), ConfigError);
  EXPECT_THROW(marginal(mix, {}), ConfigError);
}

TEST(Marginal, HiddenOnlyIsPosteriorAverageAndIgnoresBandwidth) {
  auto mix = random_mixture(30, 1, 2, 3);
  const auto hid = marginal(mix, {1, 2});
  Matrix q(3, 2);
  q << 0.1, -0.3, 1.5, 0.2, -2.0, 1.0;
  const Vector v = evaluate_points(hid, q);
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    double expect = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
      const Vector m = mix.means.row(static_cast<Eigen::Index>(i)).tail(2).transpose();
      const Matrix& R = mix.hid_cov[i];
      const Vector z = q.row(r).transpose() - m;
      expect += std::exp(-0.5 * z.dot(R.inverse() * z)) /
                (2.0 * std::numbers::pi * std::sqrt(R.determinant())) / 30.0;
    }
    EXPECT_NEAR(v[r], expect, 1e-13 * expect);
  }
  mix.H *= 7.0;
  EXPECT_EQ(evaluate_points(marginal(mix, {1, 2}), q), v);
}

TEST(Marginal, ObservedOnlyIsKde) {
  const auto mix = random_mixture(40, 1, 2, 4);
  const Matrix uI = mix.means.leftCols(1);
  const BandwidthMatrix H{mix.H, {false}};
  Matrix q(4, 1);
  q << -1.0, 0.0, 0.5, 2.0;
  const Vector a = evaluate_points(marginal(mix, {0}), q);
  const Vector b = kde_evaluate(uI, H, q);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(Grid, StandardNormalIntegral) {
  const auto f = evaluate_on_grid(one_dim({0.0}, {1.0}), GridSpec{{GridAxis{-8, 8, 200, "x"}}});
  EXPECT_NEAR(f.integral, 1.0, 1e-3);
  for (double v : f.values) EXPECT_GE(v, 0.0);
}

TEST(Grid, SymmetricPairAtCentre) {
  const auto f = evaluate_on_grid(one_dim({-1.0, 1.0}, {0.2, 0.2}), GridSpec{{GridAxis{-4, 4, 201, "x"}}});
  const double n01 = std::exp(-0.5 / 0.2) / std::sqrt(2.0 * std::numbers::pi * 0.2);
  EXPECT_NEAR(f.values[100], 2.0 * 0.5 * n01, 1e-15);
}

TEST(Grid, MatchesPointwiseEvaluationIn2DAnd3D) {
  const auto mix = random_mixture(25, 1, 2, 5);
  GridSpec g3{{GridAxis{-4, 4, 9, "a"}, GridAxis{-6, 6, 11, "b"}, GridAxis{-6, 6, 7, "c"}}};
  const auto f = evaluate_on_grid(mix, g3);
  Matrix pts(static_cast<Eigen::Index>(g3.size()), 3);
  for (std::size_t i = 0, r = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 11; ++j)
      for (std::size_t k = 0; k < 7; ++k, ++r)
        pts.row(static_cast<Eigen::Index>(r)) << g3.axes[0].coord(i), g3.axes[1].coord(j), g3.axes[2].coord(k);
  const Vector exact = evaluate_points(mix, pts);
  for (std::size_t r = 0; r < g3.size(); ++r) EXPECT_NEAR(f.values[r], exact[static_cast<Eigen::Index>(r)], 1e-15);

  const auto m2 = marginal(mix, {0, 2});
  const auto f2 = evaluate_on_grid(m2, GridSpec{{GridAxis{-10, 10, 161, "a"}, GridAxis{-14, 14, 161, "c"}}});
  EXPECT_NEAR(f2.integral, 1.0, 1e-3);
  EXPECT_THROW(evaluate_on_grid(mix, GridSpec{{GridAxis{-1, 1, 5, "a"}}}), ConfigError);
}

TEST(Moments, SingleComponent) {
  const auto m = mixture_moments(one_dim({2.0}, {3.0}), 0);
  EXPECT_DOUBLE_EQ(m.mean, 2.0);
  EXPECT_DOUBLE_EQ(m.variance, 3.0);
  EXPECT_NEAR(m.skewness, 0.0, 1e-14);
  EXPECT_NEAR(m.kurtosis, 3.0, 1e-14);
  EXPECT_THROW(mixture_moments(one_dim({2.0}, {0.0}), 0), NumericalError);
}

TEST(Moments, SymmetricPair) {
  const auto m = mixture_moments(one_dim({-1.5, 1.5}, {0.25, 0.25}), 0);
  EXPECT_NEAR(m.mean, 0.0, 1e-15);
  EXPECT_NEAR(m.variance, 1.5 * 1.5 + 0.25, 1e-14);
  EXPECT_NEAR(m.skewness, 0.0, 1e-14);
}

TEST(Moments, ScaleMixtureKurtosisMatchesSampling) {
  const auto mix = one_dim({0.0, 0.0}, {1.0, 9.0});
  const auto m = mixture_moments(mix, 0);
  // 3 E[s^4] / E[s^2]^2 with s^2 in {1, 9}.
  EXPECT_NEAR(m.kurtosis, 3.0 * 41.0 / 25.0, 1e-12);
  std::mt19937_64 rng(6);
  const Matrix s = sample_mixture(mix, 1000000, rng);
  const Vector x = s.col(0);
  const auto sm = sample_moments({x.data(), static_cast<std::size_t>(x.size())});
  EXPECT_NEAR(sm.kurtosis / m.kurtosis, 1.0, 0.01);
}

TEST(Moments, SkewedMixtureMatchesSampling) {
  const auto mix = one_dim({0.0, 0.0, 3.0}, {1.0, 0.5, 2.0});
  const auto m = mixture_moments(mix, 0);
  std::mt19937_64 rng(7);
  const Matrix s = sample_mixture(mix, 1000000, rng);
  const Vector x = s.col(0);
  const auto sm = sample_moments({x.data(), static_cast<std::size_t>(x.size())});
  EXPECT_NEAR(sm.mean, m.mean, 0.01);
  EXPECT_NEAR(sm.variance / m.variance, 1.0, 0.01);
  EXPECT_NEAR(sm.skewness, m.skewness, 0.02);
  EXPECT_NEAR(sm.kurtosis / m.kurtosis, 1.0, 0.01);
}

TEST(Moments, LawOfTotalCovariance) {
  const auto mix = random_mixture(50, 2, 2, 8);
  Vector mean = Vector::Zero(4);
  for (Eigen::Index i = 0; i < 50; ++i) mean += mix.means.row(i).transpose() / 50.0;
  EXPECT_LT((mixture_mean(mix) - mean).norm(), 1e-14);
  Matrix cov = Matrix::Zero(4, 4);
  for (std::size_t i = 0; i < 50; ++i) {
    const Vector d = mix.means.row(static_cast<Eigen::Index>(i)).transpose() - mean;
    cov += (mix.component_cov(i) + d * d.transpose()) / 50.0;
  }
  EXPECT_LT((mixture_covariance(mix) - cov).norm(), 1e-12);

  std::mt19937_64 rng(9);
  const Matrix s = sample_mixture(mix, 400000, rng);
  const Vector sm = s.colwise().mean();
  const Matrix centred = s.rowwise() - sm.transpose();
  const Matrix sc = centred.transpose() * centred / static_cast<double>(s.rows());
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(sm[i], mean[i], 4.0 * std::sqrt(cov(i, i) / 400000.0));
    for (int j = 0; j < 4; ++j) {
      EXPECT_NEAR(sc(i, j), cov(i, j), 0.02 * std::sqrt(cov(i, i) * cov(j, j)));
    }
  }
  for (int d = 0; d < 4; ++d) {
    EXPECT_NEAR(mixture_moments(mix, d).variance, cov(d, d), 1e-12 * cov(d, d));
  }
}

TEST(BlockDiagonal, LinearBenchmarkImprovesWithL) {
  const LinearBenchmark bench;
  const auto g = bench.grid(33);
  const auto truth = bench.analytic(g);
  EXPECT_NEAR(truth.integral, 1.0, 1e-3);
  const double small = bench.kl(50, 1, g, truth);
  const double large = bench.kl(800, 1, g, truth);
  EXPECT_LT(large, small);
  EXPECT_LT(large, 0.05);
}
