#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <vector>

#include "obcbf/dynamics.hpp"

namespace obcbf {

/// State estimator of the form xhat_dot = f(xhat) + g(xhat) u + r(t, xhat, y).
///
/// Estimators may carry an internal state `s` (the Riccati matrix of an EKF)
/// which the simulator integrates alongside the estimate. Estimators without
/// internal state use an empty vector.
class Estimator {
 public:
  virtual ~Estimator() = default;

  virtual Vector initial_internal_state() const { return Vector(); }
  virtual Vector internal_derivative(double t, const Vector& xhat, const Vector& u,
                                     const Vector& s) const;
  /// Throws std::runtime_error if `s` is no longer admissible.
  virtual void check_internal_state(const Vector& s) const;

  /// Gain L for internal state `s`.
  virtual Matrix gain(const Vector& s) const = 0;
  /// Upper bound on ||L(t)|| over a run.
  virtual double gain_norm_bound() const = 0;
  /// Correction term r(t, xhat, y) = L(y - z(xhat)).
  virtual Vector correction(double t, const Vector& xhat, const Vector& y, const Vector& s) const;

 protected:
  explicit Estimator(SystemModel sys) : sys_(std::move(sys)) {}
  SystemModel sys_;
};

/// Luenberger observer with constant gain L; A - LC must be Hurwitz.
class ConstantGainObserver final : public Estimator {
 public:
  ConstantGainObserver(const LinearSystemSpec& spec, Matrix gain);
  Matrix gain(const Vector&) const override { return gain_; }
  double gain_norm_bound() const override { return gain_norm_; }
  const Matrix& error_dynamics() const { return lambda_; }

 private:
  Matrix gain_;
  Matrix lambda_;
  double gain_norm_;
};

std::unique_ptr<ConstantGainObserver> constant_gain_observer(const LinearSystemSpec& spec,
                                                             const Matrix& gain);

struct RiccatiState {
  Matrix sigma;
  Matrix W;
  Matrix R;
};

/// Continuous-time EKF: L = Sigma C^T R^-1 with
/// Sigma_dot = F Sigma + Sigma F^T + W - Sigma C^T R^-1 C Sigma.
class ExtendedKalmanEstimator final : public Estimator {
 public:
  ExtendedKalmanEstimator(SystemModel sys, RiccatiState riccati, double gain_bound = -1.0);

  Vector initial_internal_state() const override;
  Vector internal_derivative(double t, const Vector& xhat, const Vector& u,
                             const Vector& s) const override;
  void check_internal_state(const Vector& s) const override;
  Matrix gain(const Vector& s) const override;
  double gain_norm_bound() const override { return gain_bound_; }

  Matrix sigma_from(const Vector& s) const;

 private:
  RiccatiState riccati_;
  Matrix r_inv_;
  double gain_bound_;
};

std::unique_ptr<ExtendedKalmanEstimator> ekf_estimator(const SystemModel& sys, const RiccatiState& riccati);

/// Time profile delta_x(t) bounding the estimation error norm.
class ErrorBound {
 public:
  virtual ~ErrorBound() = default;
  virtual double at(double t) const = 0;
  double initial_bound() const { return initial_bound_; }
  double backup_region_bound() const { return backup_region_bound_; }

 protected:
  ErrorBound(double e0, double eb) : initial_bound_(e0), backup_region_bound_(eb) {}
  double initial_bound_;
  double backup_region_bound_;
};

/// e0 ||e^{Lambda t}|| + vbar int_0^t ||e^{Lambda (t - s)} L|| ds
double error_bound_linear(double t, double e0, const Matrix& lambda, const Matrix& gain, double vbar);
/// e0 - beta (1 - e^{-kappa t})
double error_bound_exponential(double t, double e0, double beta, double kappa);

/// Linear-observer bound with a cumulative Simpson table so that each
/// evaluation costs O(1) matrix exponentials.
class LinearErrorBound final : public ErrorBound {
 public:
  LinearErrorBound(Matrix lambda, Matrix gain, double e0, double vbar, double eb);
  double at(double t) const override;

 private:
  void extend_to(double t) const;
  double integrand(double s) const;

  Matrix lambda_;
  Matrix gain_;
  double vbar_;
  double h_ = 0.005;
  Matrix step_exp_;
  mutable std::mutex mutex_;
  mutable Matrix last_power_;
  mutable std::vector<double> nodes_;       // ||e^{Lambda k h} L||
  mutable std::vector<double> cumulative_;  // Simpson integral up to node 2j
  mutable std::array<std::pair<double, double>, 8> recent_{};  // (t, value) memo
  mutable size_t recent_next_ = 0;
};

class ExponentialErrorBound final : public ErrorBound {
 public:
  ExponentialErrorBound(double e0, double beta, double kappa, double eb);
  double at(double t) const override { return error_bound_exponential(t, initial_bound_, beta_, kappa_); }

 private:
  double beta_;
  double kappa_;
};

}  // namespace obcbf
