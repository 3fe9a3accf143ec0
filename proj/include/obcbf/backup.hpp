#pragma once

#include <functional>
#include <string>
#include <vector>

#include "obcbf/dynamics.hpp"

namespace obcbf {

/// Scalar constraint function with gradient; the set is {x : value(x) >= 0}.
struct Barrier {
  enum class Kind { linear, quadratic_centered, general };

  Kind kind = Kind::general;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  /// Lipschitz constant of `value` on the origin-centred ball of given radius.
  std::function<double(double)> lipschitz_on;
  bool convex = false;

  // quadratic_centered: value(x) = gamma - x^T P x, P symmetric PSD.
  double gamma = 0.0;
  Matrix P;
  double p_lambda_max = 0.0;
  // linear: value(x) = a^T x + b.
  Vector a;
  double b = 0.0;
};

Barrier make_quadratic_barrier(double gamma, const Matrix& p);
Barrier make_linear_barrier(const Vector& a, double b);
Barrier make_general_barrier(std::function<double(const Vector&)> value,
                             std::function<Vector(const Vector&)> gradient,
                             std::function<double(double)> lipschitz_on, bool convex);

struct BackupPolicy {
  std::string name;
  std::function<Vector(const Vector&)> control;
  std::function<Matrix(const Vector&)> control_jacobian;
  double lipschitz = 0.0;  // sup ||dk/dx|| over the operating ball
  double sup_norm = 0.0;   // sup ||k(x)|| over the operating ball
};

/// Sampled open-loop estimated backup flow and its sensitivity.
struct FlowGrid {
  std::vector<double> taus;
  std::vector<Vector> states;
  std::vector<Matrix> sensitivities;

  size_t size() const { return taus.size(); }
};

/// Integrates the backup flow and its sensitivity as one augmented ODE,
/// `substeps` RK4 steps per grid interval `delta`.
FlowGrid propagate_flow(const SystemModel& sys, const BackupPolicy& policy, const Vector& xhat,
                        double horizon, double delta, int substeps = 4);

/// Number of grid intervals, T / delta, checked to be an integer.
int grid_intervals(double horizon, double delta);

struct LinearGainCertificate {
  bool certified = false;
  Matrix Q;
  double lambda_min_Q = 0.0;
  double rhs = 0.0;               // 2 e_b sqrt(lmin(P)/gamma) ||P B K||
  double rhs_conservative = 0.0;  // same with ||P|| ||B|| ||K||
  bool certified_conservative = false;
  std::string diagnostic;
};

/// Checks that u = -K xhat keeps {gamma - x^T P x >= 0} invariant for
/// estimation errors up to e_b.
LinearGainCertificate certify_linear_backup_gain(const Matrix& p, double gamma, const Matrix& a,
                                                 const Matrix& b, const Matrix& k, double e_b);

/// sqrt(gamma) ||K P^{-1/2}|| + ||K|| e_b, the peak backup input inside the backup set.
double no_saturation_peak(const Matrix& k, const Matrix& p, double gamma, double e_b);
bool certify_no_saturation_linear(const Matrix& k, const Matrix& p, double gamma, double e_b, double u_max);

/// Minimum spacecraft backup gain for robust invariance of the energy level set.
/// Throws std::domain_error when the backup set is too small for e_b.
double spacecraft_gain_floor(const Matrix& inertia, double gamma, double e_b, double omega_max);
/// Largest gain for which the backup torque stays within u_max on the safe set.
double spacecraft_gain_ceiling(const Matrix& inertia, double u_max, double omega_max);

struct BallSupremum {
  double value = 0.0;
  bool converged = false;
  int density = 0;
};

/// Supremum of `fn` over the origin-centred ball, sampled on a grid refined
/// until doubling the density moves the estimate less than `rel_tol`.
BallSupremum sup_over_ball(const std::function<double(const Vector&)>& fn, int dim, double radius,
                           int density = 16, double rel_tol = 0.01, int max_density = 256);

/// u_max tanh(-K x / u_max), componentwise.
BackupPolicy make_saturated_linear_policy(const Matrix& k, double u_max, double domain_radius,
                                          int density = 16);
/// -K_b J w + w x J w.
BackupPolicy make_spacecraft_policy(const Matrix& inertia, double gain, double domain_radius,
                                    int density = 16);
/// -K x without saturation.
BackupPolicy make_linear_policy(const Matrix& k, double domain_radius);

}  // namespace obcbf
