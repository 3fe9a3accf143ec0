#pragma once

#include <functional>
#include <string>

#include "obcbf/bounds.hpp"
#include "obcbf/qp.hpp"

namespace obcbf {

/// Extended class-K_inf function c1 r + c3 r^3 (odd, so negative arguments are covered).
struct ClassKappa {
  double c1 = 1.0;
  double c3 = 0.0;

  static ClassKappa linear(double c);
  static ClassKappa linear_cubic(double c1, double c3);
  double operator()(double r) const { return c1 * r + c3 * r * r * r; }
  std::string describe() const;
};

/// Inputs of the innovation robustness term.
struct Robustness {
  Matrix gain;  // L(t)
  double lz = 0.0;
  double delta_x = 0.0;  // delta_x(t, e0)
  double vbar = 0.0;
};

/// ||row_gradient L|| (L_z delta_x + vbar)
double robustness_linear_correction(const Vector& row_gradient, const Matrix& gain, double lz, double delta_x,
                                    double vbar);

/// Everything besides the flow that shapes the O-bCBF constraints.
struct ObcbfSettings {
  const Barrier* h = nullptr;
  const Barrier* hb = nullptr;
  const FlowBound* bound = nullptr;  // null: no tightening (vanilla)
  TighteningRule rule;
  TighteningRule rule_b;
  ClassKappa alpha = ClassKappa::linear_cubic(10.0, 1.0);
  ClassKappa alpha_b = ClassKappa::linear(10.0);
  bool zero_rate = false;
  double rate_step = 1e-4;
  bool robust = true;
};

struct ObcbfQp {
  QpProblem qp;
  Vector h_values;   // h(phi_i) for i <= N, h_b(phi_N) last
  Vector epsilon;    // eps_tau_i, eps_b last
  Vector epsilon_rate;
  Vector rho;

  /// h - eps per row; nonnegative iff xhat lies in the tightened set.
  Vector tightened_margin() const { return h_values - epsilon; }
};

/// N + 2 rows: one per grid point for h and a terminal row for h_b,
/// each in the form rows u >= rhs.
ObcbfQp build_obcbf_qp(const FlowGrid& grid, const SystemModel& sys, const Vector& xhat, double t,
                       const ObcbfSettings& settings, const Robustness& robust, const Vector& kp_value,
                       const InputBox& box);

/// Same rows with epsilon, its rate and rho all zero.
ObcbfQp build_vanilla_bcbf_qp(const FlowGrid& grid, const SystemModel& sys, const Vector& xhat,
                              const Barrier& h, const Barrier& hb, const ClassKappa& alpha,
                              const ClassKappa& alpha_b, const Vector& kp_value, const InputBox& box);

/// Single-constraint CBF-QP: grad h (f + g u) >= -alpha(h).
QpProblem build_cbf_qp(const SystemModel& sys, const Vector& x, const Barrier& h, const ClassKappa& alpha,
                       const Vector& kp_value, const InputBox& box);

enum class FilterMode { qp, backup_fallback, passthrough };
const char* to_string(FilterMode mode);

struct FilterVerdict {
  Vector input;
  FilterMode mode = FilterMode::qp;
  Vector margins;             // rows u - rhs at the applied input
  Vector tightened_margin;    // h - eps per row
  int solve_iterations = 0;
  double kkt_residual = 0.0;
  std::string diagnostic;
};

enum class FilterKind { obcbf, vanilla, none };

/// Switched filter: QP solution when feasible, otherwise the backup policy,
/// held for at least one further control period.
class SafetyFilter {
 public:
  SafetyFilter(const SystemModel& sys, const BackupPolicy& policy, ObcbfSettings settings, InputBox box,
               double horizon, double delta, int flow_substeps, FilterKind kind);

  FilterVerdict safe_control(const Vector& xhat, double t, const Vector& kp_value, const Robustness& robust);
  int fallback_count() const { return fallback_count_; }

 private:
  const SystemModel& sys_;
  const BackupPolicy& policy_;
  ObcbfSettings settings_;
  InputBox box_;
  double horizon_;
  double delta_;
  int flow_substeps_;
  FilterKind kind_;
  int hold_ = 0;
  int fallback_count_ = 0;
};

}  // namespace obcbf
