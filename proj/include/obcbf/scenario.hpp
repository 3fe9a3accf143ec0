#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "obcbf/bounds.hpp"
#include "obcbf/estimation.hpp"
#include "obcbf/noise.hpp"
#include "obcbf/safety_filter.hpp"

namespace obcbf {

/// Parse or validation failure with the offending location.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what) {}
};

/// A certification inequality that does not hold.
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sectioned key-value text: `[section]` headers, `key = value` lines,
/// `#` comments. Values are scalars, words, `[a, b]` or `[[a, b], [c, d]]`.
class ConfigDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for command-line overrides
  };

  static ConfigDocument parse(const std::string& text, const std::string& source = "<string>");
  static ConfigDocument load(const std::string& path);

  /// `section.key=value`; the key must already exist unless allow_new.
  void apply_override(const std::string& assignment, bool allow_new = false);

  bool has(const std::string& section, const std::string& key) const;
  std::string where(const std::string& section, const std::string& key) const;
  const Entry* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string text(const std::string& section, const std::string& key) const;
  std::string text_or(const std::string& section, const std::string& key, const std::string& fallback) const;
  double number(const std::string& section, const std::string& key) const;
  double number_or(const std::string& section, const std::string& key, double fallback) const;
  /// "auto" maps to nullopt.
  std::optional<double> number_or_auto(const std::string& section, const std::string& key) const;
  long long integer_or(const std::string& section, const std::string& key, long long fallback) const;
  bool flag_or(const std::string& section, const std::string& key, bool fallback) const;
  Vector vector(const std::string& section, const std::string& key) const;
  Matrix matrix(const std::string& section, const std::string& key) const;

  /// Keys present in the document but never read.
  std::vector<std::string> unused() const;
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
  mutable std::map<std::string, bool> used_;
};

/// Parse "[1, 2]" / "[[1, 2], [3, 4]]" / "3".
Matrix parse_numeric_array(const std::string& text);

enum class SystemKind { double_integrator, spacecraft };
enum class EstimatorKind { luenberger, ekf };
enum class ErrorBoundKind { linear, exponential };
enum class BoundKind { linear, general, closed_loop };

struct ScenarioConfig {
  std::string name = "scenario";

  // [system]
  SystemKind system = SystemKind::double_integrator;
  Matrix inertia;
  double u_max = 2.0;
  double x_max = 2.0;      // double integrator: h = x_max^2 - x_1^2
  double omega_max = 0.1;  // spacecraft: h = omega_max^2 - ||omega||^2

  // [estimator]
  EstimatorKind estimator = EstimatorKind::luenberger;
  Matrix observer_gain;
  Matrix sigma0, W, R;
  double ekf_gain_bound = -1.0;
  ErrorBoundKind error_bound = ErrorBoundKind::linear;
  double e0 = 0.2;
  double eb = 0.15;
  double beta = 0.0;
  double kappa = 0.0;

  // [backup]
  Matrix backup_gain;  // K (double integrator) or 1x1 K_b (spacecraft)
  double gamma = 0.76;
  Matrix backup_P;     // empty: Lyapunov solution with backup_Q
  Matrix backup_Q;
  double horizon = 2.0;
  double delta = 0.02;
  int flow_substeps = 4;
  double domain_radius = 3.0;

  // [filter]
  FilterKind filter = FilterKind::obcbf;
  BoundKind bound = BoundKind::linear;
  std::optional<double> lf, lg, kappa_cl;
  TighteningRule rule, rule_b;
  ClassKappa alpha = ClassKappa::linear_cubic(10.0, 1.0);
  ClassKappa alpha_b = ClassKappa::linear(10.0);
  bool zero_rate = false;
  bool robust = true;

  // [noise]
  NoiseSpec noise;

  // [run]
  double t_final = 20.0;
  double control_period = 0.02;
  int substeps = 10;
  Vector x0, xhat0;
  /// k_p(t)_j = amplitude cos(frequency_j t + phase_j)
  double primary_amplitude = 0.0;
  Vector primary_frequency, primary_phase;

  void validate() const;
};

ScenarioConfig scenario_from_document(const ConfigDocument& doc);
ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

/// Path of a bundled scenario file.
std::string bundled_scenario(const std::string& name);

struct CertificationLine {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  /// Human-readable inequality.
  std::string relation;
  double margin() const { return rhs - lhs; }
};

/// Objects derived from a configuration and shared by one run.
struct Scenario {
  ScenarioConfig cfg;
  SystemModel sys;
  LinearSystemSpec linear;  // set for the double integrator
  std::unique_ptr<Estimator> estimator;
  std::shared_ptr<const ErrorBound> error_profile;
  Barrier h, hb;
  BackupPolicy policy;
  std::unique_ptr<FlowBound> bound;
  InputBox box;
  std::vector<CertificationLine> certificates;

  Vector primary(double t) const;
  /// Throws CertificationError naming the first inequality that fails.
  void require_certified() const;
};

/// Builds the models and runs every certification inequality.
std::unique_ptr<Scenario> build_scenario(const ScenarioConfig& cfg);

}  // namespace obcbf
