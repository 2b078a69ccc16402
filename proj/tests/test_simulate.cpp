#include "cgpdf/metrics.hpp"
#include "cgpdf/simulate.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace cgpdf;
using namespace cgpdf::testing;

namespace {

double column_variance(const Matrix& m, Eigen::Index col) {
  const double mean = m.col(col).mean();
  return (m.col(col).array() - mean).square().mean();
}

CGSystemSpec decay(double rate, double noise) {
  // Observed OU with an inert hidden partner.
  return ou_pair(rate, noise, 1.0, noise > 0.0 ? noise : 0.0);
}

DensityField analytic_normal(const GridSpec& grid, double mean, double var) {
  DensityField f;
  f.grid = grid;
  f.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.axes[0].coord(i);
    f.values[i] = std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
  }
  f.update_integral();
  return f;
}

GridSpec axis_grid(double lo, double hi, std::size_t n) {
  return GridSpec{{GridAxis{lo, hi, n, "x"}}};
}

}  // namespace

TEST(Simulate, OuStationaryVariance) {
  const auto spec = decay(1.0, 1.0);
  const auto snaps = simulate_snapshots(spec, InitialCondition::delta(Vector::Zero(2)), 10000,
                                        1e-2, {10.0}, 3);
  EXPECT_NEAR(column_variance(snaps[0], 0), 0.5, 0.03);
}

TEST(Simulate, ZeroNoiseDecayWithinEulerError) {
  const auto spec = decay(1.0, 0.0);
  Vector u0(2);
  u0 << 1.0, 0.0;
  const double dt = 1e-3;
  const auto paths = simulate_ensemble(spec, InitialCondition::delta(u0), 1, dt, 1.0, 1);
  const double end = paths.obs(0, paths.index_of_time(1.0))[0];
  EXPECT_LT(std::abs(end - std::exp(-1.0)), 2.0 * dt);
}

TEST(Simulate, WeakOrderOneOnLinearDecay) {
  const auto spec = decay(1.0, 0.0);
  Vector u0(2);
  u0 << 1.0, 0.0;
  auto error = [&](double dt) {
    const auto p = simulate_ensemble(spec, InitialCondition::delta(u0), 1, dt, 1.0, 1);
    return std::abs(p.obs(0, p.n_times() - 1)[0] - std::exp(-1.0));
  };
  const double ratio = error(2e-3) / error(1e-3);
  EXPECT_NEAR(ratio, 2.0, 0.3);
}

TEST(Simulate, UniformTimeGrid) {
  const auto spec = build_model("l63");
  const auto p = simulate_ensemble(spec, InitialCondition::delta(Vector::Zero(3)), 2, 1e-3, 0.05, 5);
  ASSERT_EQ(p.n_times(), 51u);
  for (std::size_t k = 0; k < p.n_times(); ++k) EXPECT_EQ(p.times[k], static_cast<double>(k) * 1e-3);
  EXPECT_EQ(p.index_of_time(0.033), 33u);
  EXPECT_THROW(p.index_of_time(0.0335), ConfigError);
}

TEST(Simulate, SameSeedIsBitwiseIdenticalAcrossThreadCounts) {
  const auto spec = build_model("l63");
  const auto init = InitialCondition::gaussian(Vector::Zero(3), Vector::Ones(3));
  omp_set_num_threads(1);
  const auto a = simulate_ensemble(spec, init, 37, 1e-3, 0.1, 99);
  omp_set_num_threads(4);
  const auto b = simulate_ensemble(spec, init, 37, 1e-3, 0.1, 99);
  const auto snaps = simulate_snapshots(spec, init, 37, 1e-3, {0.05, 0.1}, 99);
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_EQ(a.uI, b.uI);
  EXPECT_EQ(a.uII, b.uII);
  const Matrix hid = a.hid_at(a.index_of_time(0.1));
  EXPECT_EQ(snaps[1].col(0), a.obs_at(a.index_of_time(0.1)).col(0));
  EXPECT_EQ(snaps[1].rightCols(2), hid);
  const auto c = simulate_ensemble(spec, init, 37, 1e-3, 0.1, 100);
  EXPECT_NE(a.uI, c.uI);
}

TEST(Simulate, EnsembleMembersDoNotDependOnEnsembleSize) {
  const auto spec = build_model("l63");
  const auto init = InitialCondition::gaussian(Vector::Zero(3), Vector::Ones(3));
  const auto small = simulate_ensemble(spec, init, 5, 1e-3, 0.02, 8);
  const auto big = simulate_ensemble(spec, init, 50, 1e-3, 0.02, 8);
  for (std::size_t m = 0; m < 5; ++m) {
    for (std::size_t k = 0; k < small.n_times(); ++k) {
      EXPECT_EQ(small.obs(m, k)[0], big.obs(m, k)[0]);
    }
  }
}

TEST(Simulate, LyapunovMomentsOfCoupledLinearSystem) {
  // duI = (-0.5 uI + uII) dt + 0.6 dW1, duII = (1 - 0.8 uII) dt + 0.9 dW2
  Matrix M(2, 2);
  M << -0.5, 1.0, 0.0, -0.8;
  Vector c(2);
  c << 0.0, 1.0;
  Matrix Q = Matrix::Zero(2, 2);
  Q(0, 0) = 0.36;
  Q(1, 1) = 0.81;
  const auto spec = linear_spec(vscalar(0.0), scalar(1.0), vscalar(1.0), scalar(-0.8), scalar(0.6),
                                scalar(0.9), scalar(-0.5));
  Vector m0(2), v0(2);
  m0 << 1.0, -1.0;
  v0 << 0.2, 0.3;
  const double t_end = 1.5;
  const std::size_t L = 20000;
  const auto snaps =
      simulate_snapshots(spec, InitialCondition::gaussian(m0, v0), L, 1e-3, {t_end}, 17);

  // Oracle: RK4 on dm = M m + c, dC = M C + C M^T + Q.
  Vector m = m0;
  Matrix C = v0.asDiagonal();
  const int n = 15000;
  const double h = t_end / n;
  auto fm = [&](const Vector& x) -> Vector { return M * x + c; };
  auto fC = [&](const Matrix& X) -> Matrix { return M * X + X * M.transpose() + Q; };
  for (int k = 0; k < n; ++k) {
    const Vector k1 = fm(m), k2 = fm(m + 0.5 * h * k1), k3 = fm(m + 0.5 * h * k2), k4 = fm(m + h * k3);
    m += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    const Matrix K1 = fC(C), K2 = fC(C + 0.5 * h * K1), K3 = fC(C + 0.5 * h * K2), K4 = fC(C + h * K3);
    C += h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4);
  }
  const Vector mean = snaps[0].colwise().mean();
  const Matrix centered = snaps[0].rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(L);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(mean[i], m[i], 3.0 * std::sqrt(C(i, i) / L)) << i;
    EXPECT_NEAR(cov(i, i), C(i, i), 3.0 * C(i, i) * std::sqrt(2.0 / L)) << i;
  }
  const double se01 = std::sqrt((C(0, 0) * C(1, 1) + C(0, 1) * C(0, 1)) / L);
  EXPECT_NEAR(cov(0, 1), C(0, 1), 3.0 * se01);
}

TEST(Simulate, BlowUpNamesMember) {
  const auto spec = linear_spec(vscalar(0.0), scalar(0.0), vscalar(0.0), scalar(-1.0), scalar(1.0),
                                scalar(1.0), scalar(5000.0));
  Vector u0(2);
  u0 << 1.0, 0.0;
  try {
    simulate_ensemble(spec, InitialCondition::delta(u0), 3, 1.0, 200.0, 1);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("member"), std::string::npos);
  }
}

TEST(Simulate, RejectsBadArguments) {
  const auto spec = decay(1.0, 1.0);
  const auto init = InitialCondition::delta(Vector::Zero(2));
  EXPECT_THROW(simulate_ensemble(spec, init, 0, 1e-3, 1.0, 1), ConfigError);
  EXPECT_THROW(simulate_ensemble(spec, init, 2, 0.0, 1.0, 1), ConfigError);
  EXPECT_THROW(simulate_ensemble(spec, init, 2, 1e-3, 0.0, 1), ConfigError);
  EXPECT_THROW(simulate_ensemble(spec, init, 2, 0.3, 1.0, 1), ConfigError);
  EXPECT_THROW(simulate_ensemble(spec, InitialCondition::delta(Vector::Zero(3)), 2, 1e-3, 1.0, 1),
               ConfigError);
  EXPECT_EQ(step_count(0.33, 1e-3), 330u);
  EXPECT_EQ(step_count(0.05, 5e-4), 100u);
}

TEST(InitialConditions, SamplerMomentsAndDeterminism) {
  InitialCondition init;
  init.marginals = {MarginalInit::gamma(1.0, 1.0), MarginalInit::bimodal(-1.0, 0.2, 1.0, 0.2),
                    MarginalInit::gaussian(3.0, 4.0), MarginalInit::delta(7.0)};
  init.validate(4);
  std::mt19937_64 rng(5), again(5);
  const int n = 100000;
  Matrix s(n, 4);
  for (int i = 0; i < n; ++i) s.row(i) = init.sample(rng, 4).transpose();
  EXPECT_EQ(init.sample(again, 4), s.row(0).transpose());
  EXPECT_NEAR(s.col(0).mean(), 1.0, 0.02);
  EXPECT_NEAR(column_variance(s, 0), 1.0, 0.04);
  EXPECT_GE(s.col(0).minCoeff(), 0.0);
  EXPECT_NEAR(s.col(1).mean(), 0.0, 0.02);
  EXPECT_NEAR(column_variance(s, 1), 1.2, 0.03);
  EXPECT_NEAR(s.col(2).mean(), 3.0, 0.03);
  EXPECT_NEAR(column_variance(s, 2), 4.0, 0.1);
  EXPECT_EQ(s.col(3).minCoeff(), 7.0);
  EXPECT_EQ(s.col(3).maxCoeff(), 7.0);
}

TEST(InitialConditions, InvalidParametersRejected) {
  InitialCondition bad;
  bad.marginals = {MarginalInit::gamma(0.0, 1.0)};
  EXPECT_THROW(bad.validate(1), ConfigError);
  bad.marginals = {MarginalInit::gamma(1.0, -1.0)};
  EXPECT_THROW(bad.validate(1), ConfigError);
  bad.marginals = {MarginalInit::gaussian(0.0, -1.0)};
  EXPECT_THROW(bad.validate(1), ConfigError);
  bad.marginals = {MarginalInit::bimodal(0, 1, 1, 1, 1.5)};
  EXPECT_THROW(bad.validate(1), ConfigError);
  EXPECT_THROW(InitialCondition::delta(Vector::Zero(2)).validate(3), ConfigError);
}

TEST(EnsembleFile, RoundTrip) {
  const auto spec = build_model("triad3:I");
  const auto p = simulate_ensemble(spec, InitialCondition::gaussian(Vector::Zero(3), Vector::Ones(3)),
                                   4, 1e-3, 0.01, 21);
  const auto file = std::filesystem::temp_directory_path() / "cgpdf_test_ensemble.bin";
  save_ensemble(p, file);
  const auto q = load_ensemble(file);
  EXPECT_EQ(q.n_obs, p.n_obs);
  EXPECT_EQ(q.n_hid, p.n_hid);
  EXPECT_EQ(q.members, p.members);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(q.dt, p.dt);
  EXPECT_EQ(q.times, p.times);
  EXPECT_EQ(q.uI, p.uI);
  EXPECT_EQ(q.uII, p.uII);
  std::filesystem::resize_file(file, 100);
  EXPECT_THROW(load_ensemble(file), Error);
  std::filesystem::remove(file);
}

TEST(Truth, HeatKernelAtOrigin) {
  // Pure 2D Brownian motion: zero drift, unit noise.
  const auto spec = linear_spec(vscalar(0.0), scalar(0.0), vscalar(0.0), scalar(0.0), scalar(1.0),
                                scalar(1.0));
  GridSpec grid{{GridAxis{-6.0, 6.0, 101, "o1"}, GridAxis{-6.0, 6.0, 101, "h1"}}};
  const auto f = mc_truth_density(spec, InitialCondition::delta(Vector::Zero(2)), 40000, 1e-2, 1.0,
                                  2, {0, 1}, grid);
  const double centre = f.values[50 * 101 + 50];
  EXPECT_NEAR(centre, 1.0 / (2.0 * std::numbers::pi), 0.05 / (2.0 * std::numbers::pi));
  EXPECT_NEAR(f.integral, 1.0, 1e-3);
}

TEST(Truth, IndependentSeedsAgree) {
  const auto spec = decay(1.0, 1.0);
  const auto init = InitialCondition::gaussian(Vector::Zero(2), Vector::Constant(2, 2.0));
  const auto grid = axis_grid(-4.0, 4.0, 200);
  const auto a = mc_truth_density(spec, init, 150000, 1e-2, 1.0, 1, {0}, grid);
  const auto b = mc_truth_density(spec, init, 150000, 1e-2, 1.0, 2, {0}, grid);
  EXPECT_LT(relative_entropy(a, b).value, 0.01);
}

TEST(Truth, RejectsThreeDimensionalMarginal) {
  const auto spec = build_model("l63");
  GridSpec g{{GridAxis{-1, 1, 5, "x"}, GridAxis{-1, 1, 5, "y"}, GridAxis{-1, 1, 5, "z"}}};
  EXPECT_THROW(mc_truth_density(spec, InitialCondition::delta(Vector::Zero(3)), 10, 1e-3, 0.01, 1,
                                {0, 1, 2}, g),
               ConfigError);
}

TEST(Truth, L63TransientYMarginalIsPlatykurtic) {
  const auto spec = build_model("l63");
  const auto snaps = simulate_snapshots(
      spec, InitialCondition::gaussian(Vector::Zero(3), Vector::Ones(3)), 20000, 1e-3, {0.33}, 4);
  const Vector y = snaps[0].col(1);
  EXPECT_LT(sample_moments({y.data(), static_cast<std::size_t>(y.size())}).kurtosis, 2.0);
}

TEST(LongRun, OuEquilibriumIsStandardNormal) {
  const auto spec = decay(1.0, std::sqrt(2.0));
  const auto grid = axis_grid(-6.0, 6.0, 200);
  const auto f = long_run_equilibrium(spec, 10.0, 5000.0, 1e-2, 7, {0}, grid);
  EXPECT_LT(relative_entropy(analytic_normal(grid, 0.0, 1.0), f).value, 0.01);
}

TEST(LongRun, ErgodicAverageMatchesEnsembleAtLargeTime) {
  const auto spec = decay(1.0, std::sqrt(2.0));
  const auto grid = axis_grid(-6.0, 6.0, 200);
  const auto time_avg = long_run_equilibrium(spec, 10.0, 5000.0, 1e-2, 8, {0}, grid);
  const auto ensemble = mc_truth_density(spec, InitialCondition::delta(Vector::Zero(2)), 50000,
                                         1e-2, 10.0, 9, {0}, grid);
  EXPECT_LT(relative_entropy(ensemble, time_avg).value, 0.05);
}

TEST(LongRun, TriadRegimeOneIsIntermittent) {
  const auto spec = build_model("triad3:I");
  const Matrix s = long_run_samples(spec, 20.0, 2000.0, 1e-3, 3);
  const Vector u1 = s.col(0);
  const auto m = sample_moments({u1.data(), static_cast<std::size_t>(u1.size())});
  EXPECT_GT(m.kurtosis, 3.0);
  EXPECT_GT(std::abs(m.skewness), 0.1);
}

TEST(LongRun, RejectsShortRun) {
  const auto spec = decay(1.0, 1.0);
  EXPECT_THROW(long_run_samples(spec, 10.0, 5.0, 1e-2, 1), ConfigError);
}
