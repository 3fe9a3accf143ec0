#include "obcbf/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace obcbf {

double flow_bound_general(double delta_x, double lf, double lg, double ubar, double tau) {
  return delta_x * std::exp((lf + lg * ubar) * tau);
}

double flow_bound_linear(double delta_x, const Matrix& a, double tau) {
  return delta_x * math::spectral_norm(math::matrix_exponential(a, tau));
}

double flow_bound_closed_loop(const ErrorBound& profile, double t, double tau, double kappa_cl,
                              double gain_bound, double lz, double vbar, double max_step) {
  if (tau <= 0.0) return profile.at(t);
  const double growth = std::abs(kappa_cl) < 1e-12 ? tau : std::expm1(kappa_cl * tau) / kappa_cl;
  const int intervals = std::max(1, static_cast<int>(std::ceil(tau / max_step)));
  const double h = tau / intervals;
  double integral = 0.0;
  for (int k = 0; k <= intervals; ++k) {
    const double s = k * h;
    const double w = (k == 0 || k == intervals) ? 0.5 : 1.0;
    integral += w * std::exp(kappa_cl * (tau - s)) * profile.at(t + s);
  }
  integral *= h;
  return profile.at(t + tau) + gain_bound * vbar * growth + gain_bound * lz * integral;
}

FlowBound FlowBound::general(std::shared_ptr<const ErrorBound> profile, double lf, double lg, double ubar) {
  FlowBound fb(Kind::general_gronwall, std::move(profile));
  fb.lf = lf;
  fb.lg = lg;
  fb.ubar = ubar;
  return fb;
}

FlowBound FlowBound::linear(std::shared_ptr<const ErrorBound> profile, Matrix a) {
  FlowBound fb(Kind::linear_expm, std::move(profile));
  fb.a_ = std::move(a);
  fb.cache_ = std::make_shared<ExpCache>();
  return fb;
}

FlowBound FlowBound::closed_loop(std::shared_ptr<const ErrorBound> profile, double kappa_cl,
                                 double gain_bound, double lz, double vbar, double max_step) {
  if (!(max_step > 0.0)) throw std::invalid_argument("closed-loop flow bound: max_step must be positive");
  FlowBound fb(Kind::closed_loop_osl, std::move(profile));
  fb.kappa_cl = kappa_cl;
  fb.gain_bound = gain_bound;
  fb.lz = lz;
  fb.vbar = vbar;
  fb.max_step = max_step;
  return fb;
}

double FlowBound::expm_norm(double tau) const {
  const long long key = std::llround(tau * 1e9);
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    const auto it = cache_->values.find(key);
    if (it != cache_->values.end()) return it->second;
  }
  const double v = math::spectral_norm(math::matrix_exponential(a_, tau));
  std::lock_guard<std::mutex> lock(cache_->mutex);
  cache_->values.emplace(key, v);
  return v;
}

double FlowBound::evaluate(double tau, double t) const {
  switch (kind_) {
    case Kind::general_gronwall:
      return flow_bound_general(profile_->at(t), lf, lg, ubar, tau);
    case Kind::linear_expm:
      return profile_->at(t) * expm_norm(tau);
    case Kind::closed_loop_osl:
      return flow_bound_closed_loop(*profile_, t, tau, kappa_cl, gain_bound, lz, vbar, max_step);
  }
  return std::numeric_limits<double>::infinity();
}

double one_sided_lipschitz_estimate(const std::function<Matrix(const Vector&)>& jacobian,
                                    const std::vector<Vector>& samples) {
  if (samples.empty()) throw std::invalid_argument("one_sided_lipschitz_estimate: no samples");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& x : samples) {
    const Matrix f = jacobian(x);
    best = std::max(best, math::symmetric_eigen_extrema(0.5 * (f + f.transpose())).max);
  }
  return best;
}

BallSupremum estimate_drift_lipschitz(const SystemModel& sys, double radius, int density) {
  return sup_over_ball([&](const Vector& x) { return math::spectral_norm(sys.drift_jacobian(x)); }, sys.n,
                       radius, density);
}

double estimate_input_map_lipschitz(const SystemModel& sys, double radius, int density) {
  if (sys.constant_input_map) return 0.0;
  return sup_over_ball(
             [&](const Vector& x) {
               double sq = 0.0;
               for (int j = 0; j < sys.m; ++j) {
                 const Vector e = Vector::Unit(sys.m, j);
                 sq += std::pow(math::spectral_norm(sys.input_map_directional_jacobian(x, e)), 2);
               }
               return std::sqrt(sq);
             },
             sys.n, radius, density)
      .value;
}

double quadratic_sup_overapprox(const Matrix& p, const Vector& phi, double radius) {
  return quadratic_sup_overapprox(p, math::symmetric_eigen_extrema(p).max, phi, radius);
}

double quadratic_sup_overapprox(const Matrix& p, double lambda_max, const Vector& phi, double radius) {
  return radius * radius * lambda_max + 2.0 * radius * (p * phi).norm();
}

double quadratic_sup_exact(const Matrix& p, const Vector& phi, double radius) {
  if (radius <= 0.0) return 0.0;
  const auto eig = math::symmetric_eigen(p);
  const Vector& lam = eig.values;
  const Vector c = eig.vectors.transpose() * (p * phi);
  const int n = static_cast<int>(lam.size());
  const double lmax = lam(n - 1);
  const double scale = std::max({1.0, std::abs(lmax), c.norm()});

  // Maximise d^T D d + 2 c^T d on ||d|| <= r: the maximiser sits on the
  // sphere with d_i = c_i / (mu - lambda_i), mu >= lambda_max.
  const auto objective = [&](const Vector& d) { return d.dot(lam.asDiagonal() * d) + 2.0 * c.dot(d); };
  const auto norm_at = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double gap = mu - lam(i);
      if (gap <= 0.0) return std::numeric_limits<double>::infinity();
      s += std::pow(c(i) / gap, 2);
    }
    return std::sqrt(s);
  };

  const double tol = 1e-12 * scale;
  bool hard = true;
  for (int i = 0; i < n; ++i)
    if (lmax - lam(i) <= tol && std::abs(c(i)) > tol) hard = false;

  Vector d(n);
  if (hard) {
    double rest = 0.0;
    d.setZero();
    for (int i = 0; i < n; ++i) {
      if (lmax - lam(i) > tol) {
        d(i) = c(i) / (lmax - lam(i));
        rest += d(i) * d(i);
      }
    }
    if (rest <= radius * radius) {
      for (int i = 0; i < n; ++i) {
        if (lmax - lam(i) <= tol) {
          d(i) = std::sqrt(radius * radius - rest);
          break;
        }
      }
      return objective(d);
    }
  }
  double lo = lmax;
  double hi = lmax + c.norm() / radius + 1e-300;
  while (norm_at(hi) > radius) hi = lmax + 2.0 * (hi - lmax);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm_at(mid) > radius ? lo : hi) = mid;
  }
  for (int i = 0; i < n; ++i) d(i) = c(i) / (hi - lam(i));
  if (d.norm() > 0.0) d *= radius / d.norm();
  double best = objective(d);

  // Safeguard: projected gradient ascent from the analytic point.
  Vector z = d;
  const double step = 1.0 / (2.0 * std::max(lmax, 1e-12) + 1e-12);
  for (int it = 0; it < 50; ++it) {
    z += step * 2.0 * (lam.asDiagonal() * z + c);
    if (z.norm() > radius) z *= radius / z.norm();
    best = std::max(best, objective(z));
  }
  return best;
}

double tighten(const TighteningRule& rule, const Barrier& barrier, const Vector& point, double delta_hat) {
  if (delta_hat < 0.0) throw std::invalid_argument("tighten: delta_hat must be non-negative");
  switch (rule.kind) {
    case TighteningRule::Kind::exact_linear:
      if (barrier.kind != Barrier::Kind::linear)
        throw std::invalid_argument("tighten: exact_linear rule needs a linear barrier");
      return barrier.a.norm() * delta_hat;
    case TighteningRule::Kind::quadratic:
      if (barrier.kind != Barrier::Kind::quadratic_centered)
        throw std::invalid_argument("tighten: quadratic rule needs a quadratic barrier");
      return rule.exact_quadratic ? quadratic_sup_exact(barrier.P, point, delta_hat)
                                  : quadratic_sup_overapprox(barrier.P, barrier.p_lambda_max, point, delta_hat);
    case TighteningRule::Kind::convex_gradient:
      if (!barrier.convex)
        throw std::invalid_argument("tighten: convex_gradient rule needs a convex barrier");
      return barrier.gradient(point).norm() * delta_hat;
    case TighteningRule::Kind::lipschitz: {
      const double l = rule.lipschitz_constant > 0.0 ? rule.lipschitz_constant
                                                     : barrier.lipschitz_on(point.norm() + delta_hat);
      return l * delta_hat;
    }
  }
  throw std::invalid_argument("tighten: unknown rule");
}

double tightening_rate(const TighteningRule& rule, const Barrier& barrier, const Vector& point,
                       const std::function<double(double)>& delta_hat_of_t, double t, double step, bool zeroed) {
  if (zeroed) return 0.0;
  const double lo_t = std::max(0.0, t - step);
  const double hi_t = t + step;
  const double lo = tighten(rule, barrier, point, std::max(0.0, delta_hat_of_t(lo_t)));
  const double hi = tighten(rule, barrier, point, std::max(0.0, delta_hat_of_t(hi_t)));
  return (hi - lo) / (hi_t - lo_t);
}

}  // namespace obcbf
