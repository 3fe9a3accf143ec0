#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "obcbf/acceptance.hpp"
#include "obcbf/report.hpp"

namespace fs = std::filesystem;
using namespace obcbf;

namespace {

constexpr int kPass = 0;
constexpr int kMonitorsFailed = 1;
constexpr int kConfigError = 2;

struct RunManifest {
  std::string scenario;
  std::string out = "out";
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  bool quiet = false;

  std::vector<std::string> all_overrides() const {
    auto v = overrides;
    if (seed) v.push_back("noise.seed=" + std::to_string(*seed));
    return v;
  }
};

void print_certificates(const Scenario& sc) {
  for (const auto& c : sc.certificates) {
    std::cout << (c.holds ? "  ok    " : "  FAIL  ") << c.name << ": " << c.relation << "  (" << std::setprecision(6)
              << c.lhs << " vs " << c.rhs << ", margin " << c.margin() << ")\n";
  }
}

void print_monitors(const MonitorReport& report) {
  for (const auto& v : report.verdicts)
    std::cout << (v.pass ? "  pass  " : "  FAIL  ") << v.name << ": " << v.detail << "\n";
}

int cmd_run(const RunManifest& m) {
  const auto sc = build_scenario(load_scenario(m.scenario, m.all_overrides()));
  sc->require_certified();
  const SimLog log = run_scenario(*sc);
  const MonitorReport report = monitor(log, *sc);
  write_run_artifacts(m.out, log, report, *sc);
  if (!m.quiet) {
    std::cout << sc->cfg.name << ": " << log.summary.steps << " steps in " << std::setprecision(3)
              << log.summary.wall_time << " s, artifacts in " << m.out << "\n";
    print_monitors(report);
  }
  return report.all_pass() ? kPass : kMonitorsFailed;
}

int cmd_check(const RunManifest& m) {
  const auto sc = build_scenario(load_scenario(m.scenario, m.all_overrides()));
  print_certificates(*sc);
  bool ok = true;
  for (const auto& c : sc->certificates) ok = ok && c.holds;
  return ok ? kPass : kConfigError;
}

struct SweepRow {
  std::string value;
  std::string dir;
  bool certified = false;
  bool monitors_pass = false;
  SimSummary summary;
  std::string error;
};

int cmd_sweep(const RunManifest& m, const std::string& key, const std::vector<std::string>& values, int jobs) {
  // Validate every configuration up front so a bad value fails before any run starts.
  std::vector<ScenarioConfig> configs;
  for (const auto& v : values) {
    auto ov = m.all_overrides();
    ov.push_back(key + "=" + v);
    configs.push_back(load_scenario(m.scenario, ov));
  }
  fs::create_directories(m.out);
  std::vector<SweepRow> rows(values.size());
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t i = next++; i < values.size(); i = next++) {
      SweepRow& row = rows[i];
      row.value = values[i];
      row.dir = (fs::path(m.out) / ("run_" + std::to_string(i))).string();
      try {
        const auto sc = build_scenario(configs[i]);
        sc->require_certified();
        row.certified = true;
        const SimLog log = run_scenario(*sc);
        const MonitorReport report = monitor(log, *sc);
        write_run_artifacts(row.dir, log, report, *sc);
        row.summary = log.summary;
        row.monitors_pass = report.all_pass();
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  std::vector<std::future<void>> pool;
  for (int j = 0; j < std::max(1, jobs); ++j) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();

  std::ofstream index(fs::path(m.out) / "index.csv");
  index << "value,dir,certified,monitors_pass,min_h,max_error_ratio,min_tightened_margin,fallbacks,wall_time,error\n";
  index << std::setprecision(17);
  bool all_ok = true;
  for (const auto& r : rows) {
    index << r.value << ',' << r.dir << ',' << r.certified << ',' << r.monitors_pass << ',' << r.summary.min_h << ','
          << r.summary.max_error_ratio << ',' << r.summary.min_tightened_margin << ',' << r.summary.fallback_count
          << ',' << r.summary.wall_time << ",\"" << r.error << "\"\n";
    all_ok = all_ok && r.monitors_pass;
    if (!m.quiet) {
      std::cout << std::left << std::setw(14) << (key + "=" + r.value) << std::right;
      if (!r.error.empty())
        std::cout << "  error: " << r.error << "\n";
      else
        std::cout << std::setprecision(4) << "  min h " << std::setw(11) << r.summary.min_h << "  err ratio "
                  << std::setw(8) << r.summary.max_error_ratio << "  fallbacks " << r.summary.fallback_count
                  << (r.monitors_pass ? "  pass" : "  FAIL") << "\n";
    }
  }
  return all_ok ? kPass : kMonitorsFailed;
}

int cmd_accept(const std::vector<int>& only, bool quiet) {
  std::vector<CriterionResult> results;
  const std::vector<CriterionResult (*)()> all = {
      accept_double_integrator, accept_spacecraft_vs_baseline, accept_certification, accept_flow_containment,
      accept_estimator_bound,   accept_qp_oracle,              accept_sensitivity,   accept_tightening};
  bool ok = true;
  for (size_t i = 0; i < all.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
    const CriterionResult r = all[i]();
    ok = ok && r.pass;
    if (!quiet || !r.pass) std::cout << format_result(r) << std::endl;
  }
  return ok ? kPass : kMonitorsFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Observer-based backup CBF safety filter: simulation, certification and acceptance"};
  app.require_subcommand(1);
  RunManifest m;
  const auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    if (needs_scenario) sub->add_option("scenario", m.scenario, "Scenario file")->required();
    sub->add_option("--set", m.overrides, "Override a scenario key, section.key=value (repeatable)");
    sub->add_option("--seed", m.seed, "Noise seed");
    sub->add_flag("--quiet", m.quiet, "Only report failures");
  };

  auto* run = app.add_subcommand("run", "Simulate a scenario and write trajectory.csv, margins.csv, summary.json");
  add_common(run, true);
  run->add_option("--out", m.out, "Output directory");

  auto* check = app.add_subcommand("check", "Evaluate the certification inequalities only");
  add_common(check, true);

  std::string key;
  std::vector<std::string> values;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* sweep = app.add_subcommand("sweep", "Run a scenario for each value of one key");
  add_common(sweep, true);
  sweep->add_option("--out", m.out, "Output directory (one run_<i> per value plus index.csv)");
  sweep->add_option("--key", key, "Key to sweep, section.key")->required();
  sweep->add_option("--values", values, "Values, comma separated or repeated")->required()->delimiter(',');
  sweep->add_option("--jobs", jobs, "Worker threads");

  std::vector<int> only;
  auto* accept = app.add_subcommand("accept", "Run the acceptance suite");
  accept->add_option("--only", only, "Criterion numbers to run (default all)")->delimiter(',');
  accept->add_flag("--quiet", m.quiet, "Only report failures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kConfigError;
  }

  try {
    if (*run) return cmd_run(m);
    if (*check) return cmd_check(m);
    if (*sweep) return cmd_sweep(m, key, values, jobs);
    if (*accept) return cmd_accept(only, m.quiet);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CertificationError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMonitorsFailed;
  }
  return kPass;
}
