#include "obcbf/dynamics.hpp"

#include <stdexcept>

namespace obcbf {

InputBox InputBox::symmetric(int m, double bound) {
  return InputBox{Vector::Constant(m, -bound), Vector::Constant(m, bound)};
}

bool InputBox::contains(const Vector& u, double tol) const {
  return u.size() == lower.size() && (u.array() >= lower.array() - tol).all() &&
         (u.array() <= upper.array() + tol).all();
}

Vector InputBox::clamp(const Vector& u) const { return u.cwiseMax(lower).cwiseMin(upper); }

void InputBox::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("InputBox: bound dimensions mismatch");
  if ((lower.array() > upper.array()).any())
    throw std::invalid_argument("InputBox: lower bound exceeds upper bound");
}

bool is_observable(const LinearSystemSpec& spec) {
  const Eigen::Index n = spec.A.rows();
  const Eigen::Index p = spec.C.rows();
  Matrix obs(n * p, n);
  Matrix block = spec.C;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.middleRows(k * p, p) = block;
    block = block * spec.A;
  }
  Eigen::FullPivLU<Matrix> lu(obs);
  return lu.rank() == n;
}

SystemModel make_linear(const LinearSystemSpec& spec) {
  if (spec.A.rows() != spec.A.cols() || spec.B.rows() != spec.A.rows() || spec.C.cols() != spec.A.rows())
    throw std::invalid_argument("make_linear: inconsistent matrix dimensions");
  SystemModel sys;
  sys.name = "linear";
  sys.n = static_cast<int>(spec.A.rows());
  sys.m = static_cast<int>(spec.B.cols());
  sys.y_dim = static_cast<int>(spec.C.rows());
  const Matrix a = spec.A, b = spec.B, c = spec.C;
  sys.drift = [a](const Vector& x) -> Vector { return a * x; };
  sys.input_map = [b](const Vector&) -> Matrix { return b; };
  sys.drift_jacobian = [a](const Vector&) -> Matrix { return a; };
  const int n = sys.n;
  sys.input_map_directional_jacobian = [n](const Vector&, const Vector&) -> Matrix {
    return Matrix::Zero(n, n);
  };
  sys.measure = [c](const Vector& x) -> Vector { return c * x; };
  sys.measure_jacobian = [c](const Vector&) -> Matrix { return c; };
  sys.measure_lipschitz = math::spectral_norm(c);
  sys.constant_input_map = true;
  return sys;
}

SystemModel make_double_integrator() {
  LinearSystemSpec spec;
  spec.A = Matrix{{0.0, 1.0}, {0.0, 0.0}};
  spec.B = Matrix{{0.0}, {1.0}};
  spec.C = Matrix{{1.0, 0.0}};
  SystemModel sys = make_linear(spec);
  sys.name = "double_integrator";
  return sys;
}

SystemModel make_spacecraft(const Matrix& inertia) {
  if (inertia.rows() != 3 || inertia.cols() != 3)
    throw std::invalid_argument("make_spacecraft: inertia must be 3x3");
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("make_spacecraft: inertia must be symmetric");
  if (math::symmetric_eigen_extrema(inertia).min <= 0.0)
    throw std::invalid_argument("make_spacecraft: inertia must be positive definite");

  const Eigen::Matrix3d j = inertia;
  const Eigen::Matrix3d j_inv = j.inverse();
  SystemModel sys;
  sys.name = "spacecraft";
  sys.n = 3;
  sys.m = 3;
  sys.y_dim = 3;
  sys.drift = [j, j_inv](const Vector& x) -> Vector {
    const Eigen::Vector3d w = x;
    return j_inv * (-w.cross(j * w));
  };
  sys.input_map = [j_inv](const Vector&) -> Matrix { return j_inv; };
  // d/dw (w x Jw) = [w]x J - [Jw]x
  sys.drift_jacobian = [j, j_inv](const Vector& x) -> Matrix {
    const Eigen::Vector3d w = x;
    return j_inv * (-math::skew(w) * j + math::skew(j * w));
  };
  sys.input_map_directional_jacobian = [](const Vector&, const Vector&) -> Matrix {
    return Matrix::Zero(3, 3);
  };
  sys.measure = [](const Vector& x) -> Vector { return x; };
  sys.measure_jacobian = [](const Vector&) -> Matrix { return Matrix::Identity(3, 3); };
  sys.measure_lipschitz = 1.0;
  sys.constant_input_map = true;
  return sys;
}

ClosedLoopField closed_loop_field(const SystemModel& sys,
                                  std::function<Vector(const Vector&)> controller,
                                  std::function<Matrix(const Vector&)> controller_jacobian) {
  ClosedLoopField out;
  out.field = [sys, controller](const Vector& x) -> Vector { return sys.dynamics(x, controller(x)); };
  if (!controller_jacobian) {
    controller_jacobian = [controller](const Vector& x) -> Matrix {
      return math::finite_difference_jacobian(controller, x, 1e-6);
    };
  }
  out.jacobian = [sys, controller, controller_jacobian](const Vector& x) -> Matrix {
    const Vector u = controller(x);
    return sys.dynamics_jacobian(x, u) + sys.input_map(x) * controller_jacobian(x);
  };
  return out;
}

}  // namespace obcbf
