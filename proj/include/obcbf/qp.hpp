#pragma once

#include <string>
#include <vector>

#include "obcbf/dynamics.hpp"

namespace obcbf {

/// min ||target - u||^2 s.t. rows u >= rhs, u in box.
struct QpProblem {
  Vector target;
  Matrix rows;
  Vector rhs;
  InputBox box;
};

struct QpResult {
  bool feasible = false;
  Vector solution;
  int iterations = 0;
  /// Row with the largest violation at the phase-1 optimum; -1 when feasible.
  int most_violated_row = -1;
  /// Optimal phase-1 slack (0 when the constraints are consistent).
  double phase1_slack = 0.0;
  double kkt_residual = 0.0;
  /// Active constraints at the solution: row i < c, box lower c + j, box upper c + m + j.
  std::vector<int> active;
  Vector multipliers;
  /// Rows dropped for having no input direction (norm below 1e-12).
  std::vector<int> dropped_rows;
  std::string diagnostic;
};

/// Primal active-set solve with a phase-1 slack LP for the starting point.
/// Infeasibility is reported in the result, never thrown.
QpResult solve_qp(const QpProblem& p);

/// Max of stationarity, primal violation, dual sign and complementarity
/// errors at u for the given multipliers (same indexing as QpResult::active).
double qp_kkt_residual(const QpProblem& p, const Vector& u, const std::vector<int>& active,
                       const Vector& multipliers);

}  // namespace obcbf
