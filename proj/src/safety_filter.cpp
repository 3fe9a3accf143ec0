#include "obcbf/safety_filter.hpp"

#include <sstream>
#include <stdexcept>

namespace obcbf {

ClassKappa ClassKappa::linear(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("class-K function needs a positive slope");
  return {c, 0.0};
}

ClassKappa ClassKappa::linear_cubic(double c1, double c3) {
  if (!(c1 > 0.0) || c3 < 0.0) throw std::invalid_argument("class-K function needs c1 > 0 and c3 >= 0");
  return {c1, c3};
}

std::string ClassKappa::describe() const {
  std::ostringstream s;
  if (c3 == 0.0)
    s << "linear(" << c1 << ")";
  else
    s << "linear-cubic(" << c1 << ", " << c3 << ")";
  return s.str();
}

double robustness_linear_correction(const Vector& row_gradient, const Matrix& gain, double lz, double delta_x,
                                    double vbar) {
  if (gain.size() == 0) return 0.0;
  return (gain.transpose() * row_gradient).norm() * (lz * delta_x + vbar);
}

namespace {

struct RowTerms {
  double epsilon = 0.0;
  double rate = 0.0;
  double rho = 0.0;
};

void fill_row(ObcbfQp& out, int i, const Barrier& barrier, const ClassKappa& alpha, const Vector& phi,
              const Matrix& sens, const Vector& f_hat, const Matrix& g_hat, const RowTerms& terms) {
  const Vector row_grad = sens.transpose() * barrier.gradient(phi);
  const double hv = barrier.value(phi);
  out.qp.rows.row(i) = (g_hat.transpose() * row_grad).transpose();
  out.qp.rhs(i) = -alpha(hv - terms.epsilon) + terms.rate + terms.rho - row_grad.dot(f_hat);
  out.h_values(i) = hv;
  out.epsilon(i) = terms.epsilon;
  out.epsilon_rate(i) = terms.rate;
  out.rho(i) = terms.rho;
}

RowTerms row_terms(const ObcbfSettings& s, const TighteningRule& rule, const Barrier& barrier, const Vector& phi,
                   const Matrix& sens, double tau, double t, const Robustness& robust) {
  RowTerms r;
  if (s.bound) {
    const FlowBound& bound = *s.bound;
    r.epsilon = tighten(rule, barrier, phi, bound.evaluate(tau, t));
    r.rate = tightening_rate(
        rule, barrier, phi, [&](double tt) { return bound.evaluate(tau, tt); }, t, s.rate_step, s.zero_rate);
  }
  if (s.robust) {
    const Vector row_grad = sens.transpose() * barrier.gradient(phi);
    r.rho = robustness_linear_correction(row_grad, robust.gain, robust.lz, robust.delta_x, robust.vbar);
  }
  return r;
}

ObcbfQp allocate(int rows, int m, const Vector& kp_value, const InputBox& box) {
  ObcbfQp out;
  out.qp.target = kp_value;
  out.qp.rows.resize(rows, m);
  out.qp.rhs.resize(rows);
  out.qp.box = box;
  out.h_values.resize(rows);
  out.epsilon.resize(rows);
  out.epsilon_rate.resize(rows);
  out.rho.resize(rows);
  return out;
}

}  // namespace

ObcbfQp build_obcbf_qp(const FlowGrid& grid, const SystemModel& sys, const Vector& xhat, double t,
                       const ObcbfSettings& settings, const Robustness& robust, const Vector& kp_value,
                       const InputBox& box) {
  if (!settings.h || !settings.hb) throw std::invalid_argument("build_obcbf_qp: barriers not set");
  const int points = static_cast<int>(grid.size());
  ObcbfQp out = allocate(points + 1, sys.m, kp_value, box);
  const Vector f_hat = sys.drift(xhat);
  const Matrix g_hat = sys.input_map(xhat);
  for (int i = 0; i < points; ++i) {
    const auto& phi = grid.states[static_cast<size_t>(i)];
    const auto& sens = grid.sensitivities[static_cast<size_t>(i)];
    const auto terms = row_terms(settings, settings.rule, *settings.h, phi, sens, grid.taus[static_cast<size_t>(i)],
                                 t, robust);
    fill_row(out, i, *settings.h, settings.alpha, phi, sens, f_hat, g_hat, terms);
  }
  const auto& phi_t = grid.states.back();
  const auto& sens_t = grid.sensitivities.back();
  const auto terms = row_terms(settings, settings.rule_b, *settings.hb, phi_t, sens_t, grid.taus.back(), t, robust);
  fill_row(out, points, *settings.hb, settings.alpha_b, phi_t, sens_t, f_hat, g_hat, terms);
  return out;
}

ObcbfQp build_vanilla_bcbf_qp(const FlowGrid& grid, const SystemModel& sys, const Vector& xhat,
                              const Barrier& h, const Barrier& hb, const ClassKappa& alpha,
                              const ClassKappa& alpha_b, const Vector& kp_value, const InputBox& box) {
  ObcbfSettings s;
  s.h = &h;
  s.hb = &hb;
  s.alpha = alpha;
  s.alpha_b = alpha_b;
  s.robust = false;
  return build_obcbf_qp(grid, sys, xhat, 0.0, s, Robustness{}, kp_value, box);
}

QpProblem build_cbf_qp(const SystemModel& sys, const Vector& x, const Barrier& h, const ClassKappa& alpha,
                       const Vector& kp_value, const InputBox& box) {
  QpProblem qp;
  qp.target = kp_value;
  qp.box = box;
  const Vector grad = h.gradient(x);
  qp.rows = (sys.input_map(x).transpose() * grad).transpose();
  qp.rhs.resize(1);
  qp.rhs(0) = -alpha(h.value(x)) - grad.dot(sys.drift(x));
  return qp;
}

const char* to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::qp:
      return "qp";
    case FilterMode::backup_fallback:
      return "backup-fallback";
    case FilterMode::passthrough:
      return "passthrough";
  }
  return "?";
}

SafetyFilter::SafetyFilter(const SystemModel& sys, const BackupPolicy& policy, ObcbfSettings settings, InputBox box,
                           double horizon, double delta, int flow_substeps, FilterKind kind)
    : sys_(sys),
      policy_(policy),
      settings_(settings),
      box_(std::move(box)),
      horizon_(horizon),
      delta_(delta),
      flow_substeps_(flow_substeps),
      kind_(kind) {
  box_.validate();
  grid_intervals(horizon_, delta_);
  if (kind_ == FilterKind::vanilla) {
    settings_.bound = nullptr;
    settings_.robust = false;
  }
}

FilterVerdict SafetyFilter::safe_control(const Vector& xhat, double t, const Vector& kp_value,
                                         const Robustness& robust) {
  FilterVerdict v;
  if (kind_ == FilterKind::none) {
    v.input = box_.clamp(kp_value);
    v.mode = FilterMode::passthrough;
    return v;
  }

  ObcbfQp built;
  bool have_qp = false;
  try {
    const FlowGrid grid = propagate_flow(sys_, policy_, xhat, horizon_, delta_, flow_substeps_);
    built = build_obcbf_qp(grid, sys_, xhat, t, settings_, robust, kp_value, box_);
    have_qp = true;
  } catch (const std::exception& e) {
    v.diagnostic = e.what();
  }

  const auto fallback = [&](const std::string& why) {
    v.input = box_.clamp(policy_.control(xhat));
    v.mode = FilterMode::backup_fallback;
    if (v.diagnostic.empty()) v.diagnostic = why;
  };

  if (!have_qp) {
    ++fallback_count_;
    hold_ = 1;
    fallback("flow propagation failed");
  } else {
    const QpResult res = solve_qp(built.qp);
    v.solve_iterations = res.iterations;
    if (hold_ > 0) {
      --hold_;
      fallback("holding backup after fallback");
    } else if (!res.feasible) {
      ++fallback_count_;
      hold_ = 1;
      fallback(res.diagnostic);
    } else {
      v.input = res.solution;
      v.mode = FilterMode::qp;
      v.kkt_residual = res.kkt_residual;
    }
    v.margins = built.qp.rows * v.input - built.qp.rhs;
    v.tightened_margin = built.tightened_margin();
  }
  return v;
}

}  // namespace obcbf
