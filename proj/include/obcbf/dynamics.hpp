#pragma once

#include <functional>
#include <string>

#include "obcbf/core_math.hpp"

namespace obcbf {

/// Control-affine model xdot = f(x) + g(x) u with output z(x).
struct SystemModel {
  std::string name;
  int n = 0;
  int m = 0;
  int y_dim = 0;
  std::function<Vector(const Vector&)> drift;
  std::function<Matrix(const Vector&)> input_map;
  std::function<Matrix(const Vector&)> drift_jacobian;
  /// d(g(x) u)/dx at fixed u.
  std::function<Matrix(const Vector&, const Vector&)> input_map_directional_jacobian;
  std::function<Vector(const Vector&)> measure;
  std::function<Matrix(const Vector&)> measure_jacobian;
  double measure_lipschitz = 0.0;
  /// True when g does not depend on x.
  bool constant_input_map = false;

  Vector dynamics(const Vector& x, const Vector& u) const { return drift(x) + input_map(x) * u; }
  /// Full state Jacobian of f(x) + g(x) u.
  Matrix dynamics_jacobian(const Vector& x, const Vector& u) const {
    return drift_jacobian(x) + input_map_directional_jacobian(x, u);
  }
};

/// Axis-aligned admissible input set.
struct InputBox {
  Vector lower;
  Vector upper;

  static InputBox symmetric(int m, double bound);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector& u, double tol = 0.0) const;
  Vector clamp(const Vector& u) const;
  void validate() const;
};

struct LinearSystemSpec {
  Matrix A;
  Matrix B;
  Matrix C;
};

bool is_observable(const LinearSystemSpec& spec);

SystemModel make_double_integrator();
/// Euler rotation equations; throws std::invalid_argument for non-SPD inertia.
SystemModel make_spacecraft(const Matrix& inertia);
SystemModel make_linear(const LinearSystemSpec& spec);

struct ClosedLoopField {
  std::function<Vector(const Vector&)> field;
  std::function<Matrix(const Vector&)> jacobian;
};

/// f(x) + g(x) k(x) together with its Jacobian. Without an analytic
/// controller Jacobian a central-difference one is used.
ClosedLoopField closed_loop_field(const SystemModel& sys,
                                  std::function<Vector(const Vector&)> controller,
                                  std::function<Matrix(const Vector&)> controller_jacobian = nullptr);

}  // namespace obcbf
