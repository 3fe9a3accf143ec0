#pragma once

#include <iosfwd>
#include <string>

#include "obcbf/simulation.hpp"

namespace obcbf {

/// t, x_1..x_n, xhat_1..xhat_n, y_1..y_p, u_1..u_m, h, h_b, e_norm, delta_x, mode
void write_trajectory_csv(std::ostream& out, const SimLog& log);
/// Long format, one line per constraint per step: t, row, tau, margin, tightened_margin.
void write_margins_csv(std::ostream& out, const SimLog& log, double delta, double horizon);
/// Monitor verdicts, summary scalars, certification lines and events.
std::string summary_json(const SimLog& log, const MonitorReport& report, const Scenario& sc);

/// Writes trajectory.csv, margins.csv and summary.json into `dir` (created if needed).
void write_run_artifacts(const std::string& dir, const SimLog& log, const MonitorReport& report,
                         const Scenario& sc);

}  // namespace obcbf
