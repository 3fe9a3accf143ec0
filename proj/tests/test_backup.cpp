#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "obcbf/backup.hpp"

namespace obcbf {
namespace {

const Matrix kInertia = Vector{{0.5186, 0.8006, 0.8006}}.asDiagonal();
const Matrix kA{{0.0, 1.0}, {0.0, 0.0}};
const Matrix kB{{0.0}, {1.0}};
const Matrix kK{{1.535, 1.382}};

Matrix lyapunov_p() { return math::solve_lyapunov(kA - kB * kK, Matrix::Identity(2, 2)); }

TEST(Barrier, QuadraticAndLinear) {
  const Barrier h = make_quadratic_barrier(4.0, Matrix{{1.0, 0.0}, {0.0, 0.0}});
  EXPECT_DOUBLE_EQ(h.value(Vector{{1.0, 9.0}}), 3.0);
  EXPECT_EQ(h.gradient(Vector{{1.0, 9.0}}), (Vector{{-2.0, 0.0}}));
  EXPECT_DOUBLE_EQ(h.p_lambda_max, 1.0);
  EXPECT_NEAR(h.lipschitz_on(3.0), 6.0, 1e-12);
  const Barrier l = make_linear_barrier(Vector{{1.0, -2.0}}, 0.5);
  EXPECT_DOUBLE_EQ(l.value(Vector{{1.0, 1.0}}), -0.5);
  EXPECT_NEAR(l.lipschitz_on(100.0), std::sqrt(5.0), 1e-12);
}

TEST(PropagateFlow, ZeroHorizonIsIdentity) {
  const SystemModel sys = make_double_integrator();
  const BackupPolicy pol = make_saturated_linear_policy(kK, 2.0, 3.0);
  const Vector x{{0.4, 0.2}};
  const FlowGrid g = propagate_flow(sys, pol, x, 0.0, 0.02);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.states[0], x);
  EXPECT_EQ(g.sensitivities[0], Matrix::Identity(2, 2));
}

TEST(PropagateFlow, GridIntervalsMustDivide) {
  EXPECT_EQ(grid_intervals(2.0, 0.02), 100);
  EXPECT_EQ(grid_intervals(3.0, 0.05), 60);
  EXPECT_THROW(grid_intervals(2.0, 0.03), std::invalid_argument);
}

TEST(PropagateFlow, Semigroup) {
  const SystemModel sys = make_spacecraft(kInertia);
  const BackupPolicy pol = make_spacecraft_policy(kInertia, 0.2746, 0.15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  for (int k = 0; k < 5; ++k) {
    const Vector x{{u(rng), u(rng), u(rng)}};
    const Vector whole = propagate_flow(sys, pol, x, 3.0, 0.05).states.back();
    const Vector mid = propagate_flow(sys, pol, x, 1.2, 0.05).states.back();
    EXPECT_LE((propagate_flow(sys, pol, mid, 1.8, 0.05).states.back() - whole).norm(), 1e-6);
  }
  const SystemModel di = make_double_integrator();
  const BackupPolicy sat = make_saturated_linear_policy(kK, 2.0, 3.0);
  const Vector x{{1.2, -0.7}};
  const Vector mid = propagate_flow(di, sat, x, 0.8, 0.02).states.back();
  EXPECT_LE((propagate_flow(di, sat, mid, 1.2, 0.02).states.back() - propagate_flow(di, sat, x, 2.0, 0.02).states.back())
                .norm(),
            1e-6);
}

TEST(PropagateFlow, SensitivityMatchesFiniteDifferences) {
  const SystemModel sys = make_double_integrator();
  const BackupPolicy pol = make_saturated_linear_policy(kK, 2.0, 3.0);
  const Vector x{{1.1, 0.9}};
  const FlowGrid g = propagate_flow(sys, pol, x, 2.0, 0.02);
  const Matrix fd = math::finite_difference_jacobian(
      [&](const Vector& v) { return propagate_flow(sys, pol, v, 2.0, 0.02).states.back(); }, x);
  EXPECT_LE((g.sensitivities.back() - fd).norm() / fd.norm(), 1e-4);
}

TEST(PropagateFlow, SpacecraftBackupFlowContracts) {
  const SystemModel sys = make_spacecraft(kInertia);
  const double kb = 0.2746;
  const BackupPolicy pol = make_spacecraft_policy(kInertia, kb, 0.15);
  const Vector w{{0.06, -0.04, 0.05}};
  const FlowGrid g = propagate_flow(sys, pol, w, 3.0, 0.05);
  for (size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(g.states[i].norm(), std::exp(-kb * g.taus[i]) * w.norm(), 1e-10);
    EXPECT_LE((g.sensitivities[i] - std::exp(-kb * g.taus[i]) * Matrix::Identity(3, 3)).norm(), 1e-8);
  }
  EXPECT_LE(pol.control(Vector::Zero(3)).norm(), 0.0);
}

TEST(Certification, LinearGainExamples) {
  const Matrix p = lyapunov_p();
  const auto zero = certify_linear_backup_gain(p, 0.76, kA, kB, kK, 0.0);
  EXPECT_TRUE(zero.certified);
  EXPECT_DOUBLE_EQ(zero.rhs, 0.0);
  const auto paper = certify_linear_backup_gain(p, 0.76, kA, kB, kK, 0.15);
  EXPECT_TRUE(paper.certified);
  EXPECT_NEAR(paper.lambda_min_Q, 1.0, 1e-9);
  EXPECT_LT(paper.rhs, paper.lambda_min_Q);
  EXPECT_GE(paper.rhs_conservative, paper.rhs);
  EXPECT_FALSE(certify_linear_backup_gain(p, 0.76, kA, kB, kK, 5.0).certified);
}

TEST(Certification, NoSaturationExamples) {
  const Matrix p = lyapunov_p();
  EXPECT_TRUE(certify_no_saturation_linear(Matrix::Zero(1, 2), p, 0.76, 0.15, 1e-6));
  EXPECT_TRUE(certify_no_saturation_linear(kK, p, 0.76, 0.15, 2.0));
  EXPECT_FALSE(certify_no_saturation_linear(kK, p, 0.76, 0.15, 0.0));
  const double peak = no_saturation_peak(kK, p, 0.76, 0.15);
  EXPECT_NEAR(peak, std::sqrt(0.76) * math::spectral_norm(kK * math::inverse_sqrt_spd(p)) + kK.norm() * 0.15, 1e-12);
}

TEST(Certification, SpacecraftGainWindow) {
  EXPECT_DOUBLE_EQ(spacecraft_gain_floor(kInertia, 0.0013, 0.0, 0.1), 0.0);
  const double floor = spacecraft_gain_floor(kInertia, 0.0013, 0.01, 0.1);
  const double ceiling = spacecraft_gain_ceiling(kInertia, 0.03, 0.1);
  EXPECT_LE(floor, 0.2746);
  EXPECT_GE(ceiling, 0.2746);
  EXPECT_LT(spacecraft_gain_floor(kInertia, 1e6, 0.01, 0.1), 1e-3);
  EXPECT_LT(spacecraft_gain_floor(kInertia, 1e6, 0.01, 0.1), floor);
}

TEST(BackupSet, ForwardInvariantUnderWorstCaseEstimationError) {
  // u = -K (x + e) with the error chosen to push h_b down as hard as possible.
  const Matrix p = lyapunov_p();
  const double gamma = 0.76, eb = 0.15;
  const Matrix a_cl = kA - kB * kK;
  const Vector start_dir{{1.0, -0.3}};
  Vector x = start_dir * std::sqrt(gamma / start_dir.dot(p * start_dir));
  const auto hb = [&](const Vector& v) { return gamma - v.dot(p * v); };
  double worst = hb(x);
  const auto field = [&](double, const Vector& v) -> Vector {
    const Vector dir = (p * kB * kK).transpose() * v;
    const Vector e = dir.norm() > 0 ? Vector(-eb * dir / dir.norm()) : Vector::Zero(2);
    return a_cl * v - kB * kK * e;
  };
  for (int k = 0; k < 4000; ++k) {
    x = math::rk4_step(field, 0.0, x, 0.005);
    worst = std::min(worst, hb(x));
  }
  EXPECT_GE(worst, -1e-9);
}

TEST(SupOverBall, ConvergesForSmoothFunction) {
  const auto s = sup_over_ball([](const Vector& x) { return x.norm(); }, 2, 1.5);
  EXPECT_TRUE(s.converged);
  EXPECT_NEAR(s.value, 1.5, 0.05);
  EXPECT_LE(s.value, 1.5 + 1e-12);
}

}  // namespace
}  // namespace obcbf
