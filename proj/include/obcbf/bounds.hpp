#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "obcbf/backup.hpp"
#include "obcbf/estimation.hpp"

namespace obcbf {

/// delta_x e^{(L_f + L_g ubar) tau}
double flow_bound_general(double delta_x, double lf, double lg, double ubar, double tau);
/// delta_x ||e^{A tau}||
double flow_bound_linear(double delta_x, const Matrix& a, double tau);
/// delta_x(t + tau) + Lbar vbar (e^{k tau} - 1) / k
///   + Lbar L_z int_0^tau e^{k (tau - s)} delta_x(t + s) ds,
/// with the integral evaluated by composite trapezoid with step <= max_step.
double flow_bound_closed_loop(const ErrorBound& profile, double t, double tau, double kappa_cl,
                              double gain_bound, double lz, double vbar, double max_step = 0.005);

/// Bound delta_hat(tau, t) on the distance between the true and the estimated
/// open-loop backup flows.
class FlowBound {
 public:
  enum class Kind { general_gronwall, linear_expm, closed_loop_osl };

  static FlowBound general(std::shared_ptr<const ErrorBound> profile, double lf, double lg, double ubar);
  static FlowBound linear(std::shared_ptr<const ErrorBound> profile, Matrix a);
  static FlowBound closed_loop(std::shared_ptr<const ErrorBound> profile, double kappa_cl,
                               double gain_bound, double lz, double vbar, double max_step = 0.005);

  double evaluate(double tau, double t) const;
  Kind kind() const { return kind_; }
  const ErrorBound& profile() const { return *profile_; }

  double lf = 0.0, lg = 0.0, ubar = 0.0;
  double kappa_cl = 0.0, gain_bound = 0.0, lz = 0.0, vbar = 0.0, max_step = 0.005;

 private:
  FlowBound(Kind kind, std::shared_ptr<const ErrorBound> profile) : kind_(kind), profile_(std::move(profile)) {}
  double expm_norm(double tau) const;

  Kind kind_;
  std::shared_ptr<const ErrorBound> profile_;
  Matrix a_;
  // ||e^{A tau}|| keyed by tau in nanoseconds; shared between copies.
  struct ExpCache {
    std::mutex mutex;
    std::map<long long, double> values;
  };
  std::shared_ptr<ExpCache> cache_;
};

/// max over samples of lambda_max((F + F^T) / 2).
double one_sided_lipschitz_estimate(const std::function<Matrix(const Vector&)>& jacobian,
                                    const std::vector<Vector>& samples);

/// sup ||df/dx|| over the operating ball.
BallSupremum estimate_drift_lipschitz(const SystemModel& sys, double radius, int density = 16);
/// Lipschitz constant of g (per unit input); exactly zero for constant g.
double estimate_input_map_lipschitz(const SystemModel& sys, double radius, int density = 16);

struct TighteningRule {
  enum class Kind { exact_linear, quadratic, convex_gradient, lipschitz };
  Kind kind = Kind::lipschitz;
  /// lipschitz kind: fixed constant when positive, otherwise the barrier's
  /// Lipschitz constant on the smallest origin ball containing the
  /// delta_hat-ball around the flow point.
  double lipschitz_constant = -1.0;
  /// quadratic kind: solve the trust-region problem instead of the closed-form
  /// over-approximation.
  bool exact_quadratic = false;
};

/// max over ||d|| <= radius of d^T P d + 2 phi^T P d, P symmetric PSD.
double quadratic_sup_exact(const Matrix& p, const Vector& phi, double radius);
/// radius^2 lambda_max(P) + 2 radius ||P phi||
double quadratic_sup_overapprox(const Matrix& p, const Vector& phi, double radius);
double quadratic_sup_overapprox(const Matrix& p, double lambda_max, const Vector& phi, double radius);

/// Margin epsilon >= sup_{||d|| <= delta_hat} h(point) - h(point + d).
/// Throws std::invalid_argument for a rule/barrier pairing that is not sound.
double tighten(const TighteningRule& rule, const Barrier& barrier, const Vector& point, double delta_hat);

/// d epsilon / dt at fixed flow point, by central differences of delta_hat(t).
double tightening_rate(const TighteningRule& rule, const Barrier& barrier, const Vector& point,
                       const std::function<double(double)>& delta_hat_of_t, double t,
                       double step = 1e-4, bool zeroed = false);

}  // namespace obcbf
