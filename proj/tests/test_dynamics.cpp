#include <random>

#include <gtest/gtest.h>

#include "obcbf/dynamics.hpp"

namespace obcbf {
namespace {

const Matrix kInertia = Vector{{0.5186, 0.8006, 0.8006}}.asDiagonal();

Vector random_point(std::mt19937_64& rng, int n, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = u(rng);
  return x;
}

void expect_jacobians_match(const SystemModel& sys, double radius) {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 20; ++k) {
    const Vector x = random_point(rng, sys.n, radius);
    const Vector u = random_point(rng, sys.m, 1.0);
    const Matrix fd_drift = math::finite_difference_jacobian(sys.drift, x);
    EXPECT_LE((sys.drift_jacobian(x) - fd_drift).norm(), 1e-5) << sys.name;
    const Matrix fd_input = math::finite_difference_jacobian([&](const Vector& v) { return Vector(sys.input_map(v) * u); }, x);
    EXPECT_LE((sys.input_map_directional_jacobian(x, u) - fd_input).norm(), 1e-5) << sys.name;
    EXPECT_LE((sys.measure_jacobian(x) - math::finite_difference_jacobian(sys.measure, x)).norm(), 1e-5);
  }
}

TEST(DoubleIntegrator, Examples) {
  const SystemModel sys = make_double_integrator();
  EXPECT_EQ(sys.drift(Vector{{1.0, 2.0}}), (Vector{{2.0, 0.0}}));
  EXPECT_DOUBLE_EQ(sys.measure(Vector{{1.5, -3.0}})(0), 1.5);
  EXPECT_EQ(sys.input_map(Vector::Zero(2)), (Matrix{{0.0}, {1.0}}));
  EXPECT_TRUE(sys.constant_input_map);
  EXPECT_NEAR(sys.measure_lipschitz, 1.0, 1e-12);
}

TEST(Spacecraft, EquilibriumAndCrossProduct) {
  const SystemModel sys = make_spacecraft(kInertia);
  EXPECT_LE(sys.drift(Vector::Zero(3)).norm(), 0.0);
  const Vector w{{0.1, 0.1, 0.0}};
  const Vector jw{{0.5186 * 0.1, 0.8006 * 0.1, 0.0}};
  // w x Jw written out componentwise.
  const Vector cross{{w(1) * jw(2) - w(2) * jw(1), w(2) * jw(0) - w(0) * jw(2), w(0) * jw(1) - w(1) * jw(0)}};
  const Vector expected = -(kInertia.inverse() * cross);
  EXPECT_LE((sys.drift(w) - expected).norm(), 1e-15);
  EXPECT_GT(std::abs(expected(2)), 0.0);
}

TEST(Spacecraft, RejectsBadInertia) {
  EXPECT_THROW(make_spacecraft(Matrix::Identity(2, 2)), std::invalid_argument);
  EXPECT_THROW(make_spacecraft(Matrix{{1, 0.5, 0}, {0, 1, 0}, {0, 0, 1}}), std::invalid_argument);
  EXPECT_THROW(make_spacecraft(Matrix(Vector{{1.0, -1.0, 1.0}}.asDiagonal())), std::invalid_argument);
}

TEST(Jacobians, MatchFiniteDifferences) {
  expect_jacobians_match(make_double_integrator(), 3.0);
  expect_jacobians_match(make_spacecraft(kInertia), 0.2);
  expect_jacobians_match(make_linear({Matrix{{0.0, 1.0, 0.0}, {-1.0, -0.3, 0.2}, {0.0, 0.0, -2.0}},
                                      Matrix{{0.0, 1.0}, {1.0, 0.0}, {0.5, 0.5}}, Matrix{{1.0, 0.0, 1.0}}}),
                         2.0);
}

TEST(Linear, MeasurementLipschitz) {
  EXPECT_NEAR(make_linear({Matrix::Zero(2, 2), Matrix{{0.0}, {1.0}}, Matrix{{1.0, 0.0}}}).measure_lipschitz, 1.0, 1e-12);
  EXPECT_NEAR(make_linear({Matrix::Zero(2, 2), Matrix{{0.0}, {1.0}}, Matrix{{3.0, 4.0}}}).measure_lipschitz, 5.0, 1e-12);
  const SystemModel zero = make_linear({Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  EXPECT_EQ(zero.drift(Vector{{3.0, 4.0}}), Vector::Zero(2));
  EXPECT_THROW(make_linear({Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Identity(2, 2)}), std::invalid_argument);
}

TEST(Observability, DoubleIntegratorPositionOnly) {
  EXPECT_TRUE(is_observable({Matrix{{0.0, 1.0}, {0.0, 0.0}}, Matrix{{0.0}, {1.0}}, Matrix{{1.0, 0.0}}}));
  EXPECT_FALSE(is_observable({Matrix{{0.0, 1.0}, {0.0, 0.0}}, Matrix{{0.0}, {1.0}}, Matrix{{0.0, 1.0}}}));
}

TEST(ClosedLoop, ZeroControllerIsDrift) {
  const SystemModel sys = make_spacecraft(kInertia);
  const auto cl = closed_loop_field(sys, [](const Vector&) { return Vector::Zero(3).eval(); });
  const Vector w{{0.05, -0.02, 0.07}};
  EXPECT_LE((cl.field(w) - sys.drift(w)).norm(), 1e-15);
}

TEST(ClosedLoop, LinearFeedback) {
  const SystemModel sys = make_double_integrator();
  const Matrix k{{1.535, 1.382}};
  const Matrix a{{0.0, 1.0}, {0.0, 0.0}};
  const Matrix b{{0.0}, {1.0}};
  const auto cl = closed_loop_field(sys, [&](const Vector& x) { return Vector(-k * x); },
                                    [&](const Vector&) { return Matrix(-k); });
  const Vector x{{0.4, -0.9}};
  EXPECT_LE((cl.field(x) - (a - b * k) * x).norm(), 1e-14);
  EXPECT_LE((cl.jacobian(x) - (a - b * k)).norm(), 1e-14);
  const auto fd_only = closed_loop_field(sys, [&](const Vector& v) { return Vector(-k * v); });
  EXPECT_LE((fd_only.jacobian(x) - (a - b * k)).norm(), 1e-6);
}

TEST(ClosedLoop, SpacecraftBackupCancelsGyroscopicTerm) {
  const SystemModel sys = make_spacecraft(kInertia);
  const double kb = 0.2746;
  const auto policy = [&](const Vector& w) {
    const Eigen::Vector3d v = w;
    const Eigen::Vector3d jw = kInertia * v;
    return Vector(-kb * jw + v.cross(jw));
  };
  const auto cl = closed_loop_field(sys, policy);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    const Vector w = random_point(rng, 3, 0.1);
    EXPECT_LE((cl.field(w) + kb * w).norm(), 1e-15);
    EXPECT_LE((cl.jacobian(w) + kb * Matrix::Identity(3, 3)).norm(), 1e-5);
    EXPECT_LE((cl.jacobian(w) - math::finite_difference_jacobian(cl.field, w)).norm(), 1e-5);
  }
}

TEST(Spacecraft, FreeRotationConservesEnergy) {
  const SystemModel sys = make_spacecraft(kInertia);
  const auto energy = [&](const Vector& w) { return 0.5 * w.dot(kInertia * w); };
  Vector w{{0.08, -0.05, 0.03}};
  const auto field = [&](double, const Vector& x) { return sys.drift(x); };
  for (int k = 0; k < 200; ++k) {
    const Vector next = math::rk4_step(field, 0.0, w, 0.05);
    EXPECT_LE(std::abs(energy(next) - energy(w)), 1e-8);
    w = next;
  }
}

TEST(InputBox, ClampAndContain) {
  const InputBox box = InputBox::symmetric(2, 1.5);
  EXPECT_TRUE(box.contains(Vector{{1.5, -1.5}}));
  EXPECT_FALSE(box.contains(Vector{{1.6, 0.0}}));
  EXPECT_TRUE(box.contains(Vector{{1.6, 0.0}}, 0.2));
  EXPECT_EQ(box.clamp(Vector{{3.0, -0.2}}), (Vector{{1.5, -0.2}}));
  InputBox bad{Vector{{1.0}}, Vector{{0.0}}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace obcbf
