#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "obcbf/simulation.hpp"

namespace obcbf {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

CriterionResult accept_double_integrator();
CriterionResult accept_spacecraft_vs_baseline();
CriterionResult accept_certification();
CriterionResult accept_flow_containment();
CriterionResult accept_estimator_bound();
CriterionResult accept_qp_oracle();
CriterionResult accept_sensitivity();
CriterionResult accept_tightening();

/// All eight criteria in order; `on_result` sees each one as it finishes.
std::vector<CriterionResult> run_acceptance(const std::function<void(const CriterionResult&)>& on_result = {});
std::string format_result(const CriterionResult& r);

// Reference computations used by the criteria and the unit tests.

/// Exhaustive grid search at `step` over the box, refined by nested local
/// grids around the incumbent; empty when no coarse grid point is feasible.
std::optional<Vector> qp_grid_search(const QpProblem& p, double step);

/// Sup over the sphere of radius r of d^T P d + 2 phi^T P d by dense sampling
/// plus local refinement (2 or 3 dimensions).
double quadratic_sup_brute_force(const Matrix& p, const Vector& phi, double radius);

struct ContainmentStats {
  int pairs = 0;
  int violations = 0;
  double worst_ratio = 0.0;  // max ||dphi|| / delta_hat over grid points
  double worst_excess = -1.0;  // max ||dphi|| - delta_hat
  int estimator_bound_breaches = 0;  // closed-loop runs where ||e|| > delta_x
  double worst_estimator_ratio = 0.0;  // max ||e|| / delta_x over closed-loop runs
};

/// Open-loop true and estimated backup flows from random pairs with
/// ||x0 - xhat0|| <= e0, compared against delta_hat(tau, 0).
ContainmentStats open_loop_containment(const Scenario& sc, int pairs, double xhat_radius, unsigned seed);
/// Truth driven by the corrected estimate versus the open-loop estimated flow.
ContainmentStats closed_loop_containment(const Scenario& sc, const FlowBound& bound, int pairs, double xhat_radius,
                                         unsigned seed);

}  // namespace obcbf
