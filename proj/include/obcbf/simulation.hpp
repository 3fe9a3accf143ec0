#pragma once

#include <string>
#include <vector>

#include "obcbf/scenario.hpp"

namespace obcbf {

struct StepRecord {
  double t = 0.0;
  Vector x, xhat, y, u, kp;
  FilterMode mode = FilterMode::qp;
  double h = 0.0;
  double hb = 0.0;
  double e_norm = 0.0;
  double delta_x = 0.0;
  double gain_norm = 0.0;
  double kkt_residual = 0.0;
  Vector margins;
  Vector tightened_margin;
};

struct SimSummary {
  int steps = 0;
  double min_h = 0.0;          // over every integration substep
  double min_h_logged = 0.0;   // over control instants
  double max_error_ratio = 0.0;
  double max_input_excess = 0.0;  // how far u left the box (0 when inside)
  double min_tightened_margin = 0.0;
  double max_kkt_residual = 0.0;
  double max_gain_norm = 0.0;
  int fallback_count = 0;
  double wall_time = 0.0;
};

struct SimLog {
  std::string scenario;
  FilterKind filter = FilterKind::obcbf;
  std::vector<StepRecord> steps;
  SimSummary summary;
  std::vector<std::string> events;
};

struct CoState {
  Vector x, xhat, s;
  /// min h(x) over the substep endpoints of the last step.
  double min_h = 0.0;
};

/// Integrates truth, estimate and estimator internal state over one control
/// period with u held; noise is evaluated at every RK4 stage.
/// Throws math::IntegrationError on a non-finite state.
CoState step(const SystemModel& sys, const Estimator& est, const NoiseSource& noise, const Barrier* h,
             const CoState& start, const Vector& u, double t, double dt, int substeps);

SimLog run_scenario(const Scenario& sc);
SimLog run_scenario(const ScenarioConfig& cfg);

struct MonitorVerdict {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct MonitorReport {
  std::vector<MonitorVerdict> verdicts;
  bool all_pass() const;
  const MonitorVerdict& get(const std::string& name) const;
};

/// Verdicts: safety, error_bound, input_bounds, tightened_membership, fallback.
MonitorReport monitor(const SimLog& log, const Scenario& sc);

}  // namespace obcbf
