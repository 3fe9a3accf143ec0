#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "obcbf/simulation.hpp"

namespace obcbf {
namespace {

const LinearSystemSpec kDoubleIntegrator{Matrix{{0.0, 1.0}, {0.0, 0.0}}, Matrix{{0.0}, {1.0}}, Matrix{{1.0, 0.0}}};

Matrix integrate_riccati(const Estimator& est, double t_end, int steps) {
  Vector s = est.initial_internal_state();
  const Vector x = Vector::Zero(1), u = Vector::Zero(1);
  const auto field = [&](double t, const Vector& v) { return est.internal_derivative(t, x, u, v); };
  for (int k = 0; k < steps; ++k) s = math::rk4_step(field, k * t_end / steps, s, t_end / steps);
  return static_cast<const ExtendedKalmanEstimator&>(est).sigma_from(s);
}

TEST(ConstantGainObserver, ConsistentMeasurementGivesNoCorrection) {
  const auto obs = constant_gain_observer(kDoubleIntegrator, Matrix{{2.0}, {2.0}});
  const Vector xhat{{0.3, -0.4}};
  EXPECT_LE(obs->correction(0.0, xhat, kDoubleIntegrator.C * xhat, Vector()).norm(), 0.0);
  EXPECT_EQ(obs->correction(0.0, xhat, Vector{{1.3}}, Vector()), (Vector{{2.0}, {2.0}}).col(0));
}

TEST(ConstantGainObserver, ErrorDynamicsAndHurwitzCheck) {
  const auto obs = constant_gain_observer(kDoubleIntegrator, Matrix{{2.0}, {2.0}});
  EXPECT_EQ(obs->error_dynamics(), (Matrix{{-2.0, 1.0}, {-2.0, 0.0}}));
  EXPECT_NEAR(obs->gain_norm_bound(), std::sqrt(8.0), 1e-12);
  double re = 0.0;
  EXPECT_TRUE(math::is_hurwitz(obs->error_dynamics(), &re));
  EXPECT_NEAR(re, -1.0, 1e-9);
  const LinearSystemSpec zero{Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  EXPECT_THROW(constant_gain_observer(zero, Matrix::Zero(1, 1)), std::invalid_argument);
  EXPECT_THROW(constant_gain_observer(kDoubleIntegrator, Matrix{{1.0, 2.0}}), std::invalid_argument);
}

TEST(Ekf, ScalarRiccatiWithoutProcessNoise) {
  // Sigma' = -Sigma^2 with Sigma(0) = 1 solves to 1 / (1 + t).
  const SystemModel sys = make_linear({Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1)});
  const ExtendedKalmanEstimator ekf(sys, {Matrix::Identity(1, 1), Matrix::Constant(1, 1, 1e-300), Matrix::Identity(1, 1)});
  EXPECT_NEAR(integrate_riccati(ekf, 1.0, 200)(0, 0), 0.5, 1e-8);
  EXPECT_NEAR(integrate_riccati(ekf, 3.0, 600)(0, 0), 0.25, 1e-8);
}

TEST(Ekf, ScalarSteadyState) {
  const double w = 0.04, r = 0.25;
  const SystemModel sys = make_linear({Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1)});
  const ExtendedKalmanEstimator ekf(sys, {Matrix::Identity(1, 1), Matrix::Constant(1, 1, w), Matrix::Constant(1, 1, r)});
  EXPECT_NEAR(integrate_riccati(ekf, 60.0, 6000)(0, 0), std::sqrt(w * r), 1e-8);
  EXPECT_NEAR(ekf.gain(ekf.initial_internal_state())(0, 0), 1.0 / r, 1e-12);
}

TEST(Ekf, RejectsIndefiniteMatrices) {
  const SystemModel sys = make_spacecraft(Matrix::Identity(3, 3));
  EXPECT_THROW(ExtendedKalmanEstimator(sys, {-Matrix::Identity(3, 3), Matrix::Identity(3, 3), Matrix::Identity(3, 3)}),
               std::invalid_argument);
  EXPECT_THROW(ExtendedKalmanEstimator(sys, {Matrix::Identity(2, 2), Matrix::Identity(3, 3), Matrix::Identity(3, 3)}),
               std::invalid_argument);
}

TEST(Ekf, CovarianceStaysSymmetricPositiveDefiniteInSpacecraftRun) {
  const auto sc = build_scenario(load_scenario(bundled_scenario("spacecraft.toml")));
  const auto& ekf = dynamic_cast<const ExtendedKalmanEstimator&>(*sc->estimator);
  const NoiseSource noise(sc->cfg.noise);
  CoState st{sc->cfg.x0, sc->cfg.xhat0, ekf.initial_internal_state(), 0.0};
  const double dt = sc->cfg.control_period;
  for (int k = 0; k < 400; ++k) {
    const double t = k * dt;
    st = step(sc->sys, ekf, noise, nullptr, st, sc->box.clamp(sc->primary(t)), t, dt, sc->cfg.substeps);
    const Matrix sigma = ekf.sigma_from(st.s);
    ASSERT_LE((sigma - sigma.transpose()).norm(), 1e-10);
    ASSERT_GT(math::symmetric_eigen_extrema(sigma).min, 0.0);
    EXPECT_LE(math::spectral_norm(ekf.gain(st.s)), ekf.gain_norm_bound() + 1e-12);
  }
}

TEST(ErrorBoundLinear, Examples) {
  const Matrix lam{{-2.0, 1.0}, {-2.0, 0.0}};
  const Matrix l{{2.0}, {2.0}};
  EXPECT_NEAR(error_bound_linear(0.0, 0.2, lam, l, 0.02), 0.2, 1e-14);
  const Matrix scalar = Matrix::Constant(1, 1, -1.0);
  const Matrix one = Matrix::Identity(1, 1);
  EXPECT_NEAR(error_bound_linear(std::log(2.0), 0.2, scalar, one, 0.02), 0.11, 1e-9);
  for (double t : {0.3, 1.0, 4.0})
    EXPECT_NEAR(error_bound_linear(t, 0.2, scalar, one, 0.02), 0.2 * std::exp(-t) + 0.02 * (1 - std::exp(-t)), 1e-9);
}

TEST(ErrorBoundLinear, NoiseFreeDecay) {
  // Monotone for a normal error matrix; the observer's non-normal one may
  // overshoot e0 briefly (||e^{Lambda t}|| peaks near 1.013) but still decays.
  const Matrix normal{{-1.0, 0.5}, {0.5, -2.0}};
  double prev = error_bound_linear(0.0, 0.2, normal, Matrix::Identity(2, 2), 0.0);
  for (double t = 0.5; t <= 20.0; t += 0.5) {
    const double v = error_bound_linear(t, 0.2, normal, Matrix::Identity(2, 2), 0.0);
    EXPECT_LE(v, prev + 1e-15);
    prev = v;
  }
  EXPECT_LT(prev, 1e-7);
  const Matrix lam{{-2.0, 1.0}, {-2.0, 0.0}};
  const Matrix l{{2.0}, {2.0}};
  for (double t : {0.5, 2.0, 20.0})
    EXPECT_NEAR(error_bound_linear(t, 0.2, lam, l, 0.0), 0.2 * math::spectral_norm(math::matrix_exponential(lam, t)),
                1e-14);
  EXPECT_LT(error_bound_linear(20.0, 0.2, lam, l, 0.0), 1e-7);
}

TEST(LinearErrorBound, TableMatchesDirectIntegration) {
  const Matrix lam{{-2.0, 1.0}, {-2.0, 0.0}};
  const Matrix l{{2.0}, {2.0}};
  const LinearErrorBound table(lam, l, 0.2, 0.02, 0.15);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int k = 0; k < 30; ++k) {
    const double t = u(rng);
    EXPECT_NEAR(table.at(t), error_bound_linear(t, 0.2, lam, l, 0.02), 1e-7) << "t = " << t;
  }
  EXPECT_DOUBLE_EQ(table.initial_bound(), 0.2);
  EXPECT_DOUBLE_EQ(table.backup_region_bound(), 0.15);
}

TEST(LinearErrorBound, ContinuousInTime) {
  const LinearErrorBound table(Matrix{{-2.0, 1.0}, {-2.0, 0.0}}, Matrix{{2.0}, {2.0}}, 0.2, 0.02, 0.15);
  const double h = 1e-3;
  double worst = 0.0;
  for (double t = 0.0; t < 10.0; t += h) worst = std::max(worst, std::abs(table.at(t + h) - table.at(t)) / h);
  EXPECT_LT(worst, 1.0);
}

TEST(ErrorBoundExponential, Examples) {
  EXPECT_DOUBLE_EQ(error_bound_exponential(0.0, 0.02, 0.017, 0.2), 0.02);
  EXPECT_NEAR(error_bound_exponential(1e3, 0.02, 0.017, 0.2), 0.003, 1e-15);
  EXPECT_DOUBLE_EQ(error_bound_exponential(7.0, 0.02, 0.0, 0.2), 0.02);
  EXPECT_THROW(ExponentialErrorBound(0.02, 0.03, 0.2, 0.01), std::invalid_argument);
}

TEST(ConstantGainObserver, ConsistentEstimateStaysExact) {
  const auto sc = build_scenario(load_scenario(bundled_scenario("double_integrator.toml")));
  NoiseSpec quiet = sc->cfg.noise;
  quiet.vbar = 0.0;
  const NoiseSource noise(quiet);
  const Vector x0{{0.5, -0.3}};
  CoState st{x0, x0, Vector(), 0.0};
  for (int k = 0; k < 500; ++k) {
    const double t = 0.02 * k;
    st = step(sc->sys, *sc->estimator, noise, nullptr, st, Vector{{std::sin(t)}}, t, 0.02, 4);
    ASSERT_LE((st.x - st.xhat).norm(), 1e-9);
  }
}

}  // namespace
}  // namespace obcbf
