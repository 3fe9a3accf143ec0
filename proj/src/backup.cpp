#include "obcbf/backup.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace obcbf {

Barrier make_quadratic_barrier(double gamma, const Matrix& p) {
  if (p.rows() != p.cols()) throw std::invalid_argument("quadratic barrier: P must be square");
  const auto ext = math::symmetric_eigen_extrema(p);
  if (ext.min < -1e-12) throw std::invalid_argument("quadratic barrier: P must be positive semidefinite");
  Barrier h;
  h.kind = Barrier::Kind::quadratic_centered;
  h.gamma = gamma;
  h.P = 0.5 * (p + p.transpose());
  const Matrix pm = h.P;
  h.value = [gamma, pm](const Vector& x) { return gamma - x.dot(pm * x); };
  h.gradient = [pm](const Vector& x) -> Vector { return -2.0 * (pm * x); };
  const double lmax = ext.max;
  h.p_lambda_max = lmax;
  h.lipschitz_on = [lmax](double r) { return 2.0 * lmax * r; };
  h.convex = false;
  return h;
}

Barrier make_linear_barrier(const Vector& a, double b) {
  Barrier h;
  h.kind = Barrier::Kind::linear;
  h.a = a;
  h.b = b;
  h.value = [a, b](const Vector& x) { return a.dot(x) + b; };
  h.gradient = [a](const Vector&) -> Vector { return a; };
  const double na = a.norm();
  h.lipschitz_on = [na](double) { return na; };
  h.convex = true;
  return h;
}

Barrier make_general_barrier(std::function<double(const Vector&)> value,
                             std::function<Vector(const Vector&)> gradient,
                             std::function<double(double)> lipschitz_on, bool convex) {
  Barrier h;
  h.kind = Barrier::Kind::general;
  h.value = std::move(value);
  h.gradient = std::move(gradient);
  h.lipschitz_on = std::move(lipschitz_on);
  h.convex = convex;
  return h;
}

int grid_intervals(double horizon, double delta) {
  if (!(delta > 0.0) || horizon < 0.0) throw std::invalid_argument("flow grid: need delta > 0 and T >= 0");
  const double ratio = horizon / delta;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument("flow grid: T / delta must be an integer");
  return static_cast<int>(rounded);
}

FlowGrid propagate_flow(const SystemModel& sys, const BackupPolicy& policy, const Vector& xhat,
                        double horizon, double delta, int substeps) {
  if (substeps < 1) throw std::invalid_argument("propagate_flow: substeps must be >= 1");
  const int intervals = grid_intervals(horizon, delta);
  const int n = sys.n;
  const auto cl = closed_loop_field(sys, policy.control, policy.control_jacobian);

  const auto field = [&](double, const Vector& z) -> Vector {
    const Vector x = z.head(n);
    const Eigen::Map<const Matrix> phi(z.data() + n, n, n);
    Vector dz(z.size());
    dz.head(n) = cl.field(x);
    const Matrix dphi = cl.jacobian(x) * phi;
    dz.tail(n * n) = Eigen::Map<const Vector>(dphi.data(), n * n);
    return dz;
  };

  FlowGrid grid;
  grid.taus.reserve(static_cast<size_t>(intervals) + 1);
  grid.states.reserve(static_cast<size_t>(intervals) + 1);
  grid.sensitivities.reserve(static_cast<size_t>(intervals) + 1);

  Vector z(n + n * n);
  z.head(n) = xhat;
  const Matrix eye = Matrix::Identity(n, n);
  z.tail(n * n) = Eigen::Map<const Vector>(eye.data(), n * n);
  grid.taus.push_back(0.0);
  grid.states.push_back(xhat);
  grid.sensitivities.push_back(eye);

  const double h = delta / substeps;
  for (int i = 0; i < intervals; ++i) {
    for (int s = 0; s < substeps; ++s) {
      const double tau = i * delta + s * h;
      z = math::rk4_step(field, tau, z, h);
      if (!z.allFinite()) throw math::IntegrationError("backup flow diverged", tau + h);
    }
    grid.taus.push_back((i + 1) * delta);
    grid.states.push_back(z.head(n));
    grid.sensitivities.push_back(Eigen::Map<const Matrix>(z.data() + n, n, n));
  }
  return grid;
}

LinearGainCertificate certify_linear_backup_gain(const Matrix& p, double gamma, const Matrix& a,
                                                 const Matrix& b, const Matrix& k, double e_b) {
  if (!(gamma > 0.0)) throw std::invalid_argument("certify_linear_backup_gain: gamma must be positive");
  const auto p_ext = math::symmetric_eigen_extrema(p);
  if (p_ext.min <= 0.0) throw std::invalid_argument("certify_linear_backup_gain: P must be positive definite");

  LinearGainCertificate cert;
  const Matrix acl = a - b * k;
  cert.Q = -(acl.transpose() * p + p * acl);
  cert.Q = 0.5 * (cert.Q + cert.Q.transpose());
  cert.lambda_min_Q = math::symmetric_eigen_extrema(cert.Q).min;
  const double factor = 2.0 * e_b * std::sqrt(p_ext.min / gamma);
  cert.rhs = factor * math::spectral_norm(p * b * k);
  cert.rhs_conservative =
      factor * math::spectral_norm(p) * math::spectral_norm(b) * math::spectral_norm(k);

  std::ostringstream diag;
  if (cert.lambda_min_Q <= 0.0) {
    diag << "Q is not positive definite (lambda_min = " << cert.lambda_min_Q << ")";
  } else {
    cert.certified = cert.lambda_min_Q >= cert.rhs;
    cert.certified_conservative = cert.lambda_min_Q >= cert.rhs_conservative;
    diag << "lambda_min(Q) = " << cert.lambda_min_Q << ", required " << cert.rhs;
  }
  cert.diagnostic = diag.str();
  return cert;
}

double no_saturation_peak(const Matrix& k, const Matrix& p, double gamma, double e_b) {
  return std::sqrt(gamma) * math::spectral_norm(k * math::inverse_sqrt_spd(p)) +
         math::spectral_norm(k) * e_b;
}

bool certify_no_saturation_linear(const Matrix& k, const Matrix& p, double gamma, double e_b, double u_max) {
  return no_saturation_peak(k, p, gamma, e_b) <= u_max;
}

double spacecraft_gain_floor(const Matrix& inertia, double gamma, double e_b, double omega_max) {
  const auto ext = math::symmetric_eigen_extrema(inertia);
  const double cond = ext.max * math::spectral_norm(inertia) * math::spectral_norm(inertia.inverse());
  const double denom = std::sqrt(2.0 * gamma * ext.min) - cond * e_b;
  if (!(denom > 0.0)) throw std::domain_error("backup set too small for this error bound");
  return 2.0 * cond * e_b * omega_max / denom;
}

double spacecraft_gain_ceiling(const Matrix& inertia, double u_max, double omega_max) {
  return u_max / (math::spectral_norm(inertia) * omega_max) - omega_max;
}

namespace {

double sample_ball(const std::function<double(const Vector&)>& fn, int dim, double radius, int density) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<size_t>(dim), 0);
  Vector x(dim);
  const double step = 2.0 * radius / (density - 1);
  while (true) {
    for (int d = 0; d < dim; ++d) x(d) = -radius + step * idx[static_cast<size_t>(d)];
    const double r = x.norm();
    if (r <= radius * (1.0 + 1e-12)) {
      best = std::max(best, fn(x));
      if (r > 0.0) best = std::max(best, fn(x * (radius / r)));
    }
    int d = 0;
    while (d < dim && ++idx[static_cast<size_t>(d)] == density) idx[static_cast<size_t>(d++)] = 0;
    if (d == dim) break;
  }
  return best;
}

}  // namespace

BallSupremum sup_over_ball(const std::function<double(const Vector&)>& fn, int dim, double radius,
                           int density, double rel_tol, int max_density) {
  BallSupremum out;
  density = std::max(density, 3) | 1;  // odd, so the origin is a sample
  double prev = sample_ball(fn, dim, radius, density);
  while (2 * density - 1 <= max_density) {
    const int next_density = 2 * density - 1;
    const double next = sample_ball(fn, dim, radius, next_density);
    density = next_density;
    const bool ok = std::abs(next - prev) <= rel_tol * std::max(std::abs(next), 1e-300);
    prev = std::max(prev, next);
    if (ok) {
      out.converged = true;
      break;
    }
  }
  out.value = prev;
  out.density = density;
  return out;
}

BackupPolicy make_saturated_linear_policy(const Matrix& k, double u_max, double domain_radius, int density) {
  if (!(u_max > 0.0)) throw std::invalid_argument("saturated policy: u_max must be positive");
  BackupPolicy pol;
  pol.name = "saturated_linear";
  pol.control = [k, u_max](const Vector& x) -> Vector {
    return (u_max * (-(k * x) / u_max).array().tanh()).matrix();
  };
  pol.control_jacobian = [k, u_max](const Vector& x) -> Matrix {
    const Vector arg = -(k * x) / u_max;
    const Vector sech2 = (1.0 - arg.array().tanh().square()).matrix();
    return -(sech2.asDiagonal() * k);
  };
  const int n = static_cast<int>(k.cols());
  const auto ctrl = pol.control;
  const auto jac = pol.control_jacobian;
  pol.lipschitz = sup_over_ball([&](const Vector& x) { return math::spectral_norm(jac(x)); }, n,
                                domain_radius, density).value;
  pol.sup_norm = sup_over_ball([&](const Vector& x) { return ctrl(x).norm(); }, n, domain_radius, density).value;
  return pol;
}

BackupPolicy make_spacecraft_policy(const Matrix& inertia, double gain, double domain_radius, int density) {
  const Eigen::Matrix3d j = inertia;
  BackupPolicy pol;
  pol.name = "spacecraft_feedback_linearizing";
  pol.control = [j, gain](const Vector& x) -> Vector {
    const Eigen::Vector3d w = x;
    return -gain * (j * w) + w.cross(j * w);
  };
  pol.control_jacobian = [j, gain](const Vector& x) -> Matrix {
    const Eigen::Vector3d w = x;
    return -gain * j + math::skew(w) * j - math::skew(j * w);
  };
  const auto ctrl = pol.control;
  const auto jac = pol.control_jacobian;
  pol.lipschitz = sup_over_ball([&](const Vector& x) { return math::spectral_norm(jac(x)); }, 3,
                                domain_radius, density).value;
  pol.sup_norm = sup_over_ball([&](const Vector& x) { return ctrl(x).norm(); }, 3, domain_radius, density).value;
  return pol;
}

BackupPolicy make_linear_policy(const Matrix& k, double domain_radius) {
  BackupPolicy pol;
  pol.name = "linear";
  pol.control = [k](const Vector& x) -> Vector { return -(k * x); };
  pol.control_jacobian = [k](const Vector&) -> Matrix { return -k; };
  pol.lipschitz = math::spectral_norm(k);
  pol.sup_norm = pol.lipschitz * domain_radius;
  return pol;
}

}  // namespace obcbf
