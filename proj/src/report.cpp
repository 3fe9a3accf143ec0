#include "obcbf/report.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace obcbf {
namespace {

void put_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << v(i);
}

void put_names(std::ostream& out, const char* stem, Eigen::Index count) {
  for (Eigen::Index i = 1; i <= count; ++i) out << ',' << stem << '_' << i;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const SimLog& log) {
  out << std::setprecision(17);
  out << 't';
  if (!log.steps.empty()) {
    const auto& r = log.steps.front();
    put_names(out, "x", r.x.size());
    put_names(out, "xhat", r.xhat.size());
    put_names(out, "y", r.y.size());
    put_names(out, "u", r.u.size());
  }
  out << ",h,h_b,e_norm,delta_x,mode\n";
  for (const auto& r : log.steps) {
    out << r.t;
    put_vector(out, r.x);
    put_vector(out, r.xhat);
    put_vector(out, r.y);
    put_vector(out, r.u);
    out << ',' << r.h << ',' << r.hb << ',' << r.e_norm << ',' << r.delta_x << ',' << to_string(r.mode) << '\n';
  }
}

void write_margins_csv(std::ostream& out, const SimLog& log, double delta, double horizon) {
  out << std::setprecision(17);
  out << "t,row,tau,margin,tightened_margin\n";
  for (const auto& r : log.steps) {
    const Eigen::Index rows = r.margins.size();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double tau = i + 1 == rows ? horizon : static_cast<double>(i) * delta;
      out << r.t << ',' << i << ',' << tau << ',' << r.margins(i) << ',';
      if (i < r.tightened_margin.size()) out << r.tightened_margin(i);
      out << '\n';
    }
  }
}

std::string summary_json(const SimLog& log, const MonitorReport& report, const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["scenario"] = log.scenario;
  j["filter"] = sc.cfg.filter == FilterKind::obcbf ? "obcbf" : sc.cfg.filter == FilterKind::vanilla ? "vanilla-bcbf" : "none";
  j["all_monitors_pass"] = report.all_pass();
  for (const auto& v : report.verdicts)
    j["monitors"].push_back(
        {{"name", v.name}, {"pass", v.pass}, {"value", v.value}, {"threshold", v.threshold}, {"detail", v.detail}});
  const SimSummary& s = log.summary;
  j["summary"] = {{"steps", s.steps},
                  {"min_h", s.min_h},
                  {"min_h_logged", s.min_h_logged},
                  {"max_error_ratio", s.max_error_ratio},
                  {"max_input_excess", s.max_input_excess},
                  {"min_tightened_margin", s.min_tightened_margin},
                  {"max_kkt_residual", s.max_kkt_residual},
                  {"max_gain_norm", s.max_gain_norm},
                  {"fallback_count", s.fallback_count},
                  {"wall_time_s", s.wall_time}};
  for (const auto& c : sc.certificates)
    j["certificates"].push_back(
        {{"name", c.name}, {"relation", c.relation}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}, {"margin", c.margin()}});
  j["events"] = log.events;
  return j.dump(2);
}

void write_run_artifacts(const std::string& dir, const SimLog& log, const MonitorReport& report,
                         const Scenario& sc) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("trajectory.csv");
    write_trajectory_csv(f, log);
  }
  {
    auto f = open("margins.csv");
    write_margins_csv(f, log, sc.cfg.delta, sc.cfg.horizon);
  }
  {
    auto f = open("summary.json");
    f << summary_json(log, report, sc) << '\n';
  }
}

}  // namespace obcbf
