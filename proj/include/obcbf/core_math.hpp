#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace obcbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace math {

/// Raised when an integrator meets a non-finite state or field value.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double tau)
      : std::runtime_error(what + " at tau=" + std::to_string(tau)), tau_(tau) {}
  double tau() const { return tau_; }

 private:
  double tau_;
};

using TimeVaryingField = std::function<Vector(double, const Vector&)>;
using StaticField = std::function<Vector(const Vector&)>;

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

/// One classical Runge-Kutta step of size `h` from (t, x).
Vector rk4_step(const TimeVaryingField& field, double t, const Vector& x, double h);

/// Fixed-step RK4 over [t_start, t_end]. The returned trajectory has steps+1
/// samples; sample 0 is `x0`.
std::vector<Vector> rk4_integrate(const TimeVaryingField& field, const Vector& x0,
                                  double t_start, double t_end, int steps);

/// e^{M * scale} by scaling and squaring with a truncated Taylor series.
Matrix matrix_exponential(const Matrix& m, double scale = 1.0);

/// Largest singular value, by power iteration on M^T M.
double spectral_norm(const Matrix& m);

struct EigenExtrema {
  double min;
  double max;
};

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // columns are orthonormal eigenvectors
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
/// Throws std::invalid_argument for asymmetric input.
SymmetricEigen symmetric_eigen(const Matrix& s);
EigenExtrema symmetric_eigen_extrema(const Matrix& s);

/// Central-difference Jacobian.
Matrix finite_difference_jacobian(const StaticField& f, const Vector& x, double h = 1e-6);

/// Solves A^T P + P A = -Q for P through the vectorised Kronecker system.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// S^{-1/2} for a symmetric positive definite S.
Matrix inverse_sqrt_spd(const Matrix& s);

bool is_hurwitz(const Matrix& a, double* max_real_part = nullptr);

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

}  // namespace math
}  // namespace obcbf
