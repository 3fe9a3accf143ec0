#include "obcbf/estimation.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

namespace obcbf {

Vector Estimator::internal_derivative(double, const Vector&, const Vector&, const Vector&) const {
  return Vector();
}

void Estimator::check_internal_state(const Vector&) const {}

Vector Estimator::correction(double, const Vector& xhat, const Vector& y, const Vector& s) const {
  return gain(s) * (y - sys_.measure(xhat));
}

ConstantGainObserver::ConstantGainObserver(const LinearSystemSpec& spec, Matrix gain)
    : Estimator(make_linear(spec)), gain_(std::move(gain)) {
  if (gain_.rows() != spec.A.rows() || gain_.cols() != spec.C.rows())
    throw std::invalid_argument("constant_gain_observer: gain has wrong dimensions");
  lambda_ = spec.A - gain_ * spec.C;
  const Eigen::EigenSolver<Matrix> es(lambda_, false);
  if (es.eigenvalues().real().maxCoeff() >= 0.0) {
    std::ostringstream msg;
    msg << "constant_gain_observer: A - LC is not Hurwitz, eigenvalues:";
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) msg << ' ' << es.eigenvalues()(i);
    throw std::invalid_argument(msg.str());
  }
  gain_norm_ = math::spectral_norm(gain_);
}

std::unique_ptr<ConstantGainObserver> constant_gain_observer(const LinearSystemSpec& spec,
                                                             const Matrix& gain) {
  return std::make_unique<ConstantGainObserver>(spec, gain);
}

ExtendedKalmanEstimator::ExtendedKalmanEstimator(SystemModel sys, RiccatiState riccati, double gain_bound)
    : Estimator(std::move(sys)), riccati_(std::move(riccati)) {
  const int n = sys_.n;
  if (riccati_.sigma.rows() != n || riccati_.W.rows() != n || riccati_.R.rows() != sys_.y_dim)
    throw std::invalid_argument("ekf_estimator: Riccati matrices have wrong dimensions");
  for (const Matrix* m : {&riccati_.sigma, &riccati_.W, &riccati_.R}) {
    if (math::symmetric_eigen_extrema(*m).min <= 0.0)
      throw std::invalid_argument("ekf_estimator: Sigma0, W and R must be positive definite");
  }
  r_inv_ = riccati_.R.inverse();
  if (gain_bound > 0.0) {
    gain_bound_ = gain_bound;
  } else {
    // Sigma stays below max(Sigma0, steady state) along the filter; the
    // simulator monitors the realised gain against this value.
    const Matrix c = sys_.measure_jacobian(Vector::Zero(n));
    const double l0 = math::spectral_norm(riccati_.sigma * c.transpose() * r_inv_);
    const double w = math::symmetric_eigen_extrema(riccati_.W).max;
    const double r_min = math::symmetric_eigen_extrema(riccati_.R).min;
    gain_bound_ = std::max(l0, std::sqrt(w / r_min));
  }
}

Vector ExtendedKalmanEstimator::initial_internal_state() const {
  return Eigen::Map<const Vector>(riccati_.sigma.data(), riccati_.sigma.size());
}

Matrix ExtendedKalmanEstimator::sigma_from(const Vector& s) const {
  return Eigen::Map<const Matrix>(s.data(), sys_.n, sys_.n);
}

Vector ExtendedKalmanEstimator::internal_derivative(double, const Vector& xhat, const Vector& u,
                                                    const Vector& s) const {
  const Matrix sigma = sigma_from(s);
  const Matrix f = sys_.dynamics_jacobian(xhat, u);
  const Matrix c = sys_.measure_jacobian(xhat);
  const Matrix fs = f * sigma;
  const Matrix cs = c * sigma;
  Matrix info = cs.transpose() * r_inv_ * cs;
  info = 0.5 * (info + info.transpose());
  const Matrix d = fs + fs.transpose() + riccati_.W - info;
  return Eigen::Map<const Vector>(d.data(), d.size());
}

void ExtendedKalmanEstimator::check_internal_state(const Vector& s) const {
  const Matrix sigma = sigma_from(s);
  if (!sigma.allFinite()) throw std::runtime_error("EKF covariance became non-finite");
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) throw std::runtime_error("EKF covariance lost symmetry");
  if (math::symmetric_eigen_extrema(sigma).min <= 0.0)
    throw std::runtime_error("EKF covariance lost positive definiteness");
}

Matrix ExtendedKalmanEstimator::gain(const Vector& s) const {
  const Matrix c = sys_.measure_jacobian(Vector::Zero(sys_.n));
  return sigma_from(s) * c.transpose() * r_inv_;
}

std::unique_ptr<ExtendedKalmanEstimator> ekf_estimator(const SystemModel& sys, const RiccatiState& riccati) {
  return std::make_unique<ExtendedKalmanEstimator>(sys, riccati);
}

double error_bound_linear(double t, double e0, const Matrix& lambda, const Matrix& gain, double vbar) {
  if (t <= 0.0) return e0;
  int intervals = static_cast<int>(std::ceil(t / 0.01));
  if (intervals % 2) ++intervals;
  const double h = t / intervals;
  const Matrix step = math::matrix_exponential(lambda, h);
  Matrix power = Matrix::Identity(lambda.rows(), lambda.cols());
  double sum = 0.0;
  for (int k = 0; k <= intervals; ++k) {
    const double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += w * math::spectral_norm(power * gain);
    power = power * step;
  }
  const double integral = sum * h / 3.0;
  return e0 * math::spectral_norm(math::matrix_exponential(lambda, t)) + vbar * integral;
}

double error_bound_exponential(double t, double e0, double beta, double kappa) {
  return e0 - beta * (1.0 - std::exp(-kappa * t));
}

LinearErrorBound::LinearErrorBound(Matrix lambda, Matrix gain, double e0, double vbar, double eb)
    : ErrorBound(e0, eb), lambda_(std::move(lambda)), gain_(std::move(gain)), vbar_(vbar) {
  step_exp_ = math::matrix_exponential(lambda_, h_);
  last_power_ = Matrix::Identity(lambda_.rows(), lambda_.cols());
  nodes_.push_back(math::spectral_norm(gain_));
  cumulative_.push_back(0.0);
}

double LinearErrorBound::integrand(double s) const {
  return math::spectral_norm(math::matrix_exponential(lambda_, s) * gain_);
}

void LinearErrorBound::extend_to(double t) const {
  const size_t needed = 2 * static_cast<size_t>(std::floor(t / (2.0 * h_))) + 1;
  while (nodes_.size() < needed) {
    for (int k = 0; k < 2; ++k) {
      last_power_ = last_power_ * step_exp_;
      nodes_.push_back(math::spectral_norm(last_power_ * gain_));
    }
    const size_t j = nodes_.size() - 1;
    cumulative_.push_back(cumulative_.back() +
                          h_ / 3.0 * (nodes_[j - 2] + 4.0 * nodes_[j - 1] + nodes_[j]));
  }
}

double LinearErrorBound::at(double t) const {
  if (t <= 0.0) return initial_bound_;
  double base = 0.0;
  double t0 = 0.0;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [tt, v] : recent_)
      if (tt == t) return v;
    extend_to(t);
    const size_t j = static_cast<size_t>(std::floor(t / (2.0 * h_)));
    base = cumulative_[j];
    t0 = 2.0 * h_ * static_cast<double>(j);
  }
  const double rem = t - t0;
  double integral = base;
  if (rem > 0.0) {
    integral += rem / 6.0 * (integrand(t0) + 4.0 * integrand(t0 + 0.5 * rem) + integrand(t));
  }
  const double value =
      initial_bound_ * math::spectral_norm(math::matrix_exponential(lambda_, t)) + vbar_ * integral;
  std::lock_guard<std::mutex> lock(mutex_);
  recent_[recent_next_] = {t, value};
  recent_next_ = (recent_next_ + 1) % recent_.size();
  return value;
}

ExponentialErrorBound::ExponentialErrorBound(double e0, double beta, double kappa, double eb)
    : ErrorBound(e0, eb), beta_(beta), kappa_(kappa) {
  if (!(beta >= 0.0 && beta < e0 && kappa > 0.0))
    throw std::invalid_argument("exponential error bound requires 0 <= beta < e0 and kappa > 0");
}

}  // namespace obcbf
