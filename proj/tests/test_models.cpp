#include "cgpdf/models.hpp"
#include "cgpdf/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace cgpdf;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(L63, DriftVanishesAtOrigin) {
  const auto spec = build_l63(l63_defaults());
  EXPECT_EQ(spec.drift(0.0, Vector::Zero(3)).norm(), 0.0);
  EXPECT_EQ(spec.assembled_drift(0.0, Vector::Zero(3)).norm(), 0.0);
}

TEST(L63, HandEvaluatedDriftAtOnes) {
  const auto spec = build_l63(l63_defaults());
  const Vector f = spec.assembled_drift(0.0, vec({1, 1, 1}));
  EXPECT_NEAR(f[0], 0.0, 1e-14);
  EXPECT_NEAR(f[1], 26.0, 1e-14);
  EXPECT_NEAR(f[2], 1.0 - 8.0 / 3.0, 1e-14);
}

TEST(L63, CoefficientBlocks) {
  const auto spec = build_l63(l63_defaults());
  const Vector x = vec({2.0});
  const auto c = spec.eval(0.0, x);
  EXPECT_DOUBLE_EQ(c.A0[0], -20.0);
  EXPECT_DOUBLE_EQ(c.A1(0, 0), 10.0);
  EXPECT_DOUBLE_EQ(c.A1(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(c.a0[0], 56.0);
  EXPECT_DOUBLE_EQ(c.a0[1], 0.0);
  EXPECT_DOUBLE_EQ(c.a1(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(c.a1(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(c.a1(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(c.a1(1, 1), -8.0 / 3.0);
  EXPECT_EQ(spec.names, (std::vector<std::string>{"x", "y", "z"}));
}

TEST(L63, SkewCancellationAtOneTwoThree) {
  const auto spec = build_l63(l63_defaults());
  const Vector u = vec({1, 2, 3});
  EXPECT_EQ(u.dot(spec.quad_energy(u)), 0.0);
}

TEST(L63, AlternativePartitionObservesYZ) {
  const auto spec = build_l63(l63_defaults(), L63Partition::observe_yz);
  EXPECT_EQ(spec.n_obs, 2u);
  EXPECT_EQ(spec.n_hid, 1u);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int k = 0; k < 50; ++k) {
    const Vector u = vec({n(rng), n(rng), n(rng)});
    const Vector a = spec.assembled_drift(0.0, u);
    const Vector d = spec.drift(0.0, u);
    EXPECT_LE((a - d).norm(), 1e-13 * (1.0 + d.norm()));
  }
}

TEST(L63, RejectsNonPositiveNoise) {
  auto p = l63_defaults();
  p.set("sigma_y", 0.0);
  EXPECT_THROW(build_l63(p), ConfigError);
  p.set("sigma_y", -1.0);
  EXPECT_THROW(build_l63(p), ConfigError);
}

TEST(Climate4d, HiddenDriftAtOrigin) {
  const auto spec = build_climate4d(climate4d_defaults());
  EXPECT_EQ(spec.drift(0.0, Vector::Zero(4))[3], 0.0);
}

TEST(Climate4d, ConstraintDefaultAndEnforcement) {
  const auto p = climate4d_defaults();
  EXPECT_DOUBLE_EQ(p.get("b312"), -(1.5 + 1.5));
  auto bad = p;
  bad.set("b312", -2.0);
  EXPECT_THROW(build_climate4d(bad), ConfigError);
  auto eps = p;
  eps.set("epsilon", 0.0);
  EXPECT_THROW(build_climate4d(eps), ConfigError);
}

TEST(Climate4d, EnergyIdentityAtFixedState) {
  const auto spec = build_climate4d(climate4d_defaults());
  const Vector u = vec({1, -1, 2, 0.5});
  EXPECT_NEAR(u.dot(spec.quad_energy(u)), 0.0, 1e-14);
}

TEST(Climate4d, MultiplicativeCouplingInA1AndFastScaling) {
  auto p = climate4d_defaults();
  p.set("epsilon", 0.25);
  const auto spec = build_climate4d(p);
  const auto c = spec.eval(0.0, vec({0.7, -0.3}));
  EXPECT_DOUBLE_EQ(c.A1(0, 0), 0.5 + 1.5 * -0.3);
  EXPECT_DOUBLE_EQ(c.A1(1, 0), 1.5 * 0.7);
  EXPECT_DOUBLE_EQ(c.a1(0, 0), -1.0 / 0.25);
  EXPECT_DOUBLE_EQ(c.sigma_II(0, 0), 0.5 / 0.5);
  EXPECT_DOUBLE_EQ(c.sigma_II(1, 1), 1.0 / 0.5);
}

TEST(Triad, RegimeOneHandEvaluatedDrift) {
  const auto spec = build_triad3(triad3_defaults(TriadRegime::I), TriadRegime::I);
  EXPECT_NEAR(spec.assembled_drift(0.0, vec({1, 1, 1}))[0], 5.3, 1e-14);
}

TEST(Triad, RegimeTwoForcingQuarterPeriod) {
  const auto spec = build_triad3(triad3_defaults(TriadRegime::II), TriadRegime::II);
  EXPECT_NEAR(spec.A0(0.25, Vector::Zero(1))[0], 4.0, 1e-14);
}

TEST(Triad, ForcingIsOnePeriodic) {
  for (auto regime : {TriadRegime::II, TriadRegime::III}) {
    const auto spec = build_triad3(triad3_defaults(regime), regime);
    // Exact for dyadic times, where t and t + 1 share the same fractional part.
    for (double t : {0.0, 0.125, 0.25, 0.375, 0.5, 0.8125, 3.0625}) {
      EXPECT_EQ(spec.A0(t, Vector::Zero(1))[0], spec.A0(t + 1.0, Vector::Zero(1))[0]) << t;
    }
  }
}

TEST(Triad, QuadraticPartConservesEnergy) {
  const auto spec = build_triad3(triad3_defaults(TriadRegime::III), TriadRegime::III);
  const Vector u = vec({1.3, -0.4, 2.0});
  EXPECT_NEAR(u.dot(spec.quad_energy(u)), 0.0, 1e-14);
  EXPECT_THROW(parse_triad_regime("IV"), ConfigError);
}

TEST(Turbulence6d, DriftOfObservedAtHalf) {
  const auto spec = build_turbulence6d(turbulence6d_defaults());
  Vector u = Vector::Zero(6);
  u[0] = 0.5;
  EXPECT_NEAR(spec.drift(0.0, u)[0], 0.45, 1e-15);
}

TEST(Turbulence6d, DiagonalDamping) {
  const auto spec = build_turbulence6d(turbulence6d_defaults());
  const Matrix a1 = spec.a1(0.0, vec({1.7}));
  const Vector want = vec({-0.2, -0.5, -1.0, -2.0, -5.0});
  EXPECT_EQ(a1.diagonal(), want);
  EXPECT_EQ((a1 - Matrix(a1.diagonal().asDiagonal())).norm(), 0.0);
  const Matrix A1 = spec.A1(0.0, vec({2.0}));
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(A1(0, i), 0.25 * 2.0);
}

TEST(L96, OnlyForcingSurvivesAtZero) {
  auto p = lorenz96_two_layer_defaults();
  const auto spec = build_lorenz96_two_layer(4, 2, p);
  const Vector f = spec.drift(0.0, Vector::Zero(12));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(f[i], 8.0);
  for (int k = 4; k < 12; ++k) EXPECT_EQ(f[k], 0.0);
}

TEST(L96, HiddenDriftOfFirstFastVariable) {
  const auto spec = build_lorenz96_two_layer(4, 2, lorenz96_two_layer_defaults());
  Vector u = Vector::Zero(12);
  u[0] = 1.0;
  EXPECT_DOUBLE_EQ(spec.drift(0.0, u)[4], -1.0);
}

TEST(L96, PeriodicWrapInSlowIndex) {
  const auto spec = build_lorenz96_two_layer(4, 1, lorenz96_two_layer_defaults());
  // du_4 contains u_3 (u_5 - u_2) with u_5 = u_1.
  Vector u = Vector::Zero(8);
  u[0] = 2.0;  // u_1
  u[2] = 3.0;  // u_3
  const Vector f = spec.drift(0.0, u);
  EXPECT_DOUBLE_EQ(f[3], 3.0 * 2.0 + 8.0);
}

TEST(L96, HiddenCapEnforced) {
  const auto p = lorenz96_two_layer_defaults();
  EXPECT_THROW(build_lorenz96_two_layer(40, 20, p), ConfigError);
  EXPECT_THROW(build_lorenz96_two_layer(3, 2, p), ConfigError);
  EXPECT_NO_THROW(build_lorenz96_two_layer(40, 20, p, 800));
}

TEST(L96, FastAdvectionIsNotEnergyConserving) {
  // With a_S = 0 the term (a_L u_i / eps)(v_{j-1} - v_{j+2}) is not skew, so
  // the quadratic part does not conserve energy.
  const auto spec = build_model("l96two");
  const auto report = check_energy_conservation(spec, 1000, 1e-12);
  EXPECT_TRUE(report.applicable);
  EXPECT_FALSE(report.pass);
  auto slow_only = spec;
  const auto nI = static_cast<Eigen::Index>(spec.n_obs);
  slow_only.quad_energy = [q = spec.quad_energy, nI](const Vector& u) {
    Vector b = q(u);
    b.tail(b.size() - nI).setZero();
    return b;
  };
  EXPECT_TRUE(check_energy_conservation(slow_only, 1000, 1e-12).pass);
}

TEST(AllModels, AssembledDriftMatchesRightHandSide) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  std::uniform_real_distribution<double> time(0.0, 5.0);
  for (const auto& id : model_ids()) {
    const auto spec = build_model(id);
    for (int trial = 0; trial < 200; ++trial) {
      Vector u(spec.dim());
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = n(rng);
      const double t = time(rng);
      const Vector a = spec.assembled_drift(t, u);
      const Vector d = spec.drift(t, u);
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        EXPECT_LE(std::abs(a[i] - d[i]), 1e-14 * (1.0 + std::abs(d[i]) + a.cwiseAbs().maxCoeff()))
            << id << " component " << i;
      }
    }
  }
}

TEST(AllModels, ConservativeQuadraticParts) {
  for (const auto& id : model_ids()) {
    if (id == "l96two") continue;
    const auto spec = build_model(id);
    const auto report = check_energy_conservation(spec, 1000, 1e-12);
    EXPECT_TRUE(report.applicable) << id;
    EXPECT_TRUE(report.pass) << id << " max violation " << report.max_violation;
  }
}

TEST(EnergyCheck, PerturbedQuadraticFails) {
  auto spec = build_model("l63");
  spec.quad_energy = [q = spec.quad_energy](const Vector& u) {
    Vector b = q(u);
    b[1] += 0.1 * u[0] * u[0];
    return b;
  };
  EXPECT_FALSE(check_energy_conservation(spec, 1000, 1e-12).pass);
}

TEST(EnergyCheck, MissingQuadraticIsNotApplicable) {
  auto spec = build_model("l63");
  spec.quad_energy = nullptr;
  const auto report = check_energy_conservation(spec, 10, 1e-12);
  EXPECT_FALSE(report.applicable);
  EXPECT_FALSE(report.pass);
}

TEST(Registry, DefaultsFromTable) {
  const auto l63 = default_params("l63");
  EXPECT_EQ(l63.get("sigma"), 10.0);
  EXPECT_EQ(l63.get("rho"), 28.0);
  EXPECT_EQ(l63.get("beta"), 8.0 / 3.0);
  const auto t1 = default_params("triad3:I");
  EXPECT_EQ(t1.get("gamma_2"), 0.2);
  EXPECT_EQ(t1.get("sigma_2"), 1.2);
  EXPECT_EQ(t1.get("F_amplitude"), 0.0);
  const auto t3 = default_params("triad3:III");
  EXPECT_EQ(t3.get("L23"), 10.0);
  EXPECT_EQ(t3.get("epsilon"), 0.1);
  const auto t6 = default_params("turb6d");
  EXPECT_EQ(t6.get("sigma_v1"), 0.5);
  EXPECT_EQ(t6.get("d_v5"), 5.0);
  EXPECT_EQ(t6.get("F"), 0.5);
}

TEST(Registry, OverridesAndErrors) {
  const auto spec = build_model("l63", {{"rho", 10.0}});
  EXPECT_DOUBLE_EQ(spec.a0(0.0, vec({1.0}))[0], 10.0);
  EXPECT_THROW(build_model("l63", {{"nope", 1.0}}), ConfigError);
  EXPECT_THROW(build_model("lorenz"), ConfigError);
  EXPECT_THROW(build_model("l96two", {{"J", 2.5}}), ConfigError);
  EXPECT_THROW(spec.index_of("w"), ConfigError);
  EXPECT_EQ(spec.index_of("z"), 2u);
}
