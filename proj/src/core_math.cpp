#include "obcbf/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace obcbf::math {

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

Vector rk4_step(const TimeVaryingField& field, double t, const Vector& x, double h) {
  const Vector k1 = field(t, x);
  const Vector k2 = field(t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = field(t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = field(t + h, x + h * k3);
  if (!(k1.allFinite() && k2.allFinite() && k3.allFinite() && k4.allFinite())) {
    throw IntegrationError("non-finite vector field evaluation", t);
  }
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<Vector> rk4_integrate(const TimeVaryingField& field, const Vector& x0,
                                  double t_start, double t_end, int steps) {
  if (steps < 1) throw std::invalid_argument("rk4_integrate: steps must be >= 1");
  std::vector<Vector> traj;
  traj.reserve(static_cast<size_t>(steps) + 1);
  traj.push_back(x0);
  const double h = (t_end - t_start) / steps;
  Vector x = x0;
  for (int k = 0; k < steps; ++k) {
    const double t = t_start + k * h;
    x = rk4_step(field, t, x, h);
    if (!x.allFinite()) throw IntegrationError("non-finite state", t + h);
    traj.push_back(x);
  }
  return traj;
}

Matrix matrix_exponential(const Matrix& m, double scale) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix_exponential: matrix not square");
  const Eigen::Index n = m.rows();
  Matrix a = m * scale;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  a /= std::ldexp(1.0, squarings);

  // ||a|| <= 0.5 so 20 terms leave a remainder below 1e-25.
  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 20; ++k) {
    term = term * a / static_cast<double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const Matrix ms = m / scale;
  const Matrix gram = (ms.rows() < ms.cols()) ? Matrix(ms * ms.transpose())
                                               : Matrix(ms.transpose() * ms);
  const Eigen::Index n = gram.rows();

  // Repeated squaring is the power iteration run 2^k steps at a time; it
  // converges to the projector onto the dominant eigenspace.
  Matrix g = gram;
  for (int k = 0; k < 40; ++k) {
    g = g * g;
    const double mx = g.cwiseAbs().maxCoeff();
    if (!(mx > 0.0)) break;
    g /= mx;
  }
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * std::sin(1.0 + static_cast<double>(i));
  Vector w = g * v;
  if (w.norm() < 1e-8 * v.norm()) {
    Eigen::Index best = 0;
    g.colwise().norm().maxCoeff(&best);
    w = g.col(best);
  }
  v = w.normalized();

  double rq = v.dot(gram * v);
  for (int it = 0; it < 200; ++it) {
    const Vector gv = gram * v;
    const double nrm = gv.norm();
    if (nrm == 0.0) break;
    v = gv / nrm;
    const double next = v.dot(gram * v);
    const bool done = std::abs(next - rq) <= 1e-15 * std::abs(next);
    rq = next;
    if (done) break;
  }
  return scale * std::sqrt(std::max(rq, 0.0));
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
  if (s.rows() != s.cols()) throw std::invalid_argument("symmetric_eigen: matrix not square");
  const Eigen::Index n = s.rows();
  const double tol = 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("symmetric_eigen: matrix is not symmetric");
  }
  Matrix a = 0.5 * (s + s.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double fro = std::max(a.norm(), 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= 1e-15 * fro) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

EigenExtrema symmetric_eigen_extrema(const Matrix& s) {
  const SymmetricEigen e = symmetric_eigen(s);
  return {e.values(0), e.values(e.values.size() - 1)};
}

Matrix finite_difference_jacobian(const StaticField& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_jacobian: h must be positive");
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  Vector xp = x;
  Vector xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return jac;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix kron(n * n, n * n);
  // vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      kron.block(i * n, j * n, n, n) = eye(i, j) * a.transpose() + a(j, i) * eye;
  const Vector rhs = -Eigen::Map<const Vector>(Matrix(q).data(), n * n);
  const Vector sol = kron.fullPivLu().solve(rhs);
  Matrix p = Eigen::Map<const Matrix>(sol.data(), n, n);
  return 0.5 * (p + p.transpose());
}

Matrix inverse_sqrt_spd(const Matrix& s) {
  const SymmetricEigen e = symmetric_eigen(s);
  if (e.values(0) <= 0.0) throw std::invalid_argument("inverse_sqrt_spd: matrix not positive definite");
  const Vector d = e.values.array().rsqrt();
  return e.vectors * d.asDiagonal() * e.vectors.transpose();
}

bool is_hurwitz(const Matrix& a, double* max_real_part) {
  const Eigen::EigenSolver<Matrix> es(a, false);
  const double mx = es.eigenvalues().real().maxCoeff();
  if (max_real_part) *max_real_part = mx;
  return mx < 0.0;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

}  // namespace obcbf::math
