#include "obcbf/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace obcbf {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

int bracket_balance(const std::string& s) {
  int depth = 0;
  for (char c : s) depth += (c == '[') - (c == ']');
  return depth;
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("empty number");
  if (t == "pi") return std::numbers::pi;
  if (t == "-pi") return -std::numbers::pi;
  size_t used = 0;
  const double v = std::stod(t, &used);
  if (used != t.size()) throw std::invalid_argument("not a number: '" + t + "'");
  return v;
}

// Recursive reader over [..] nesting; returns rows of numbers.
struct ArrayReader {
  const std::string& s;
  size_t pos = 0;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool peek(char c) {
    skip();
    return pos < s.size() && s[pos] == c;
  }
  void expect(char c) {
    if (!peek(c)) throw std::invalid_argument(std::string("expected '") + c + "' at column " + std::to_string(pos + 1));
    ++pos;
  }
  std::vector<double> flat() {
    std::vector<double> out;
    expect('[');
    if (peek(']')) {
      ++pos;
      return out;
    }
    while (true) {
      skip();
      const size_t start = pos;
      while (pos < s.size() && s[pos] != ',' && s[pos] != ']') ++pos;
      out.push_back(parse_double(s.substr(start, pos - start)));
      if (peek(',')) {
        ++pos;
        continue;
      }
      expect(']');
      return out;
    }
  }
};

}  // namespace

Matrix parse_numeric_array(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("empty value");
  if (t.front() != '[') {
    Matrix m(1, 1);
    m(0, 0) = parse_double(t);
    return m;
  }
  ArrayReader r{t};
  r.skip();
  r.expect('[');
  std::vector<std::vector<double>> rows;
  if (r.peek('[')) {
    while (true) {
      rows.push_back(r.flat());
      if (r.peek(',')) {
        ++r.pos;
        continue;
      }
      r.expect(']');
      break;
    }
  } else {
    r.pos = 0;
    const auto v = r.flat();
    Matrix m(static_cast<int>(v.size()), 1);
    for (size_t i = 0; i < v.size(); ++i) m(static_cast<int>(i), 0) = v[i];
    r.skip();
    if (r.pos != t.size()) throw std::invalid_argument("trailing characters after array");
    return m;
  }
  r.skip();
  if (r.pos != t.size()) throw std::invalid_argument("trailing characters after array");
  const size_t cols = rows.empty() ? 0 : rows.front().size();
  for (const auto& row : rows)
    if (row.size() != cols) throw std::invalid_argument("matrix rows have different lengths");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(cols));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols; ++j) m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return m;
}

ConfigDocument ConfigDocument::parse(const std::string& text, const std::string& source) {
  ConfigDocument doc;
  doc.source_ = source;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string loc = source + ":" + std::to_string(line_no);
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') throw ConfigError(loc, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(loc, "empty section name");
      doc.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(loc, "expected 'key = value'");
    if (section.empty()) throw ConfigError(loc, "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(loc, "missing key");
    const int start_line = line_no;
    while (bracket_balance(value) > 0 && std::getline(in, raw)) {
      ++line_no;
      const auto h2 = raw.find('#');
      value += " " + trim(h2 == std::string::npos ? raw : raw.substr(0, h2));
    }
    if (bracket_balance(value) != 0) throw ConfigError(loc, "unbalanced brackets in value of '" + key + "'");
    if (value.empty()) throw ConfigError(loc, "missing value for '" + key + "'");
    auto& sec = doc.sections_[section];
    if (sec.count(key)) throw ConfigError(loc, "duplicate key '" + key + "'");
    sec[key] = Entry{unquote(value), start_line};
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void ConfigDocument::apply_override(const std::string& assignment, bool allow_new) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("--set " + assignment, "expected section.key=value");
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  const std::string value = unquote(trim(assignment.substr(eq + 1)));
  if (!allow_new && !has(section, key))
    throw ConfigError("--set " + assignment, "unknown key " + section + "." + key);
  sections_[section][key] = Entry{value, 0};
}

bool ConfigDocument::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

const ConfigDocument::Entry* ConfigDocument::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return nullptr;
  used_[section + "." + key] = true;
  return &k->second;
}

void ConfigDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = Entry{value, 0};
}

std::string ConfigDocument::where(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  std::string loc = source_;
  if (s != sections_.end()) {
    const auto k = s->second.find(key);
    if (k != s->second.end()) loc += k->second.line > 0 ? ":" + std::to_string(k->second.line) : " (override)";
  }
  return loc + " [" + section + "] " + key;
}

std::string ConfigDocument::text(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) throw ConfigError(source_ + " [" + section + "] " + key, "required key is missing");
  return e->value;
}

std::string ConfigDocument::text_or(const std::string& section, const std::string& key,
                                    const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double ConfigDocument::number(const std::string& section, const std::string& key) const {
  const std::string v = text(section, key);
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    throw ConfigError(where(section, key), "expected a number, got '" + v + "'");
  }
}

double ConfigDocument::number_or(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

std::optional<double> ConfigDocument::number_or_auto(const std::string& section, const std::string& key) const {
  if (!has(section, key) || text(section, key) == "auto") return std::nullopt;
  return number(section, key);
}

long long ConfigDocument::integer_or(const std::string& section, const std::string& key, long long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = trim(text(section, key));
  try {
    size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(where(section, key), "expected an integer, got '" + v + "'");
  }
}

bool ConfigDocument::flag_or(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = text(section, key);
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(where(section, key), "expected true or false, got '" + v + "'");
}

Vector ConfigDocument::vector(const std::string& section, const std::string& key) const {
  const Matrix m = matrix(section, key);
  if (m.cols() != 1 && m.rows() != 1) throw ConfigError(where(section, key), "expected a vector");
  return m.cols() == 1 ? Vector(m.col(0)) : Vector(m.row(0).transpose());
}

Matrix ConfigDocument::matrix(const std::string& section, const std::string& key) const {
  const std::string v = text(section, key);
  try {
    return parse_numeric_array(v);
  } catch (const std::exception& e) {
    throw ConfigError(where(section, key), std::string("bad numeric array: ") + e.what());
  }
}

std::vector<std::string> ConfigDocument::unused() const {
  std::vector<std::string> out;
  for (const auto& [section, keys] : sections_)
    for (const auto& [key, entry] : keys)
      if (!used_.count(section + "." + key)) out.push_back(where(section, key));
  return out;
}

namespace {

template <class E>
E choose(const ConfigDocument& doc, const std::string& section, const std::string& key,
         const std::vector<std::pair<std::string, E>>& options, E fallback) {
  if (!doc.has(section, key)) return fallback;
  const std::string v = doc.text(section, key);
  std::string names;
  for (const auto& [name, value] : options) {
    if (name == v) return value;
    names += (names.empty() ? "" : ", ") + name;
  }
  throw ConfigError(doc.where(section, key), "unknown value '" + v + "' (expected one of: " + names + ")");
}

TighteningRule read_rule(const ConfigDocument& doc, const std::string& kind_key, const std::string& lip_key,
                         TighteningRule::Kind fallback) {
  TighteningRule r;
  r.kind = choose<TighteningRule::Kind>(doc, "filter", kind_key,
                                        {{"exact_linear", TighteningRule::Kind::exact_linear},
                                         {"quadratic", TighteningRule::Kind::quadratic},
                                         {"convex_gradient", TighteningRule::Kind::convex_gradient},
                                         {"lipschitz", TighteningRule::Kind::lipschitz}},
                                        fallback);
  r.lipschitz_constant = doc.number_or_auto("filter", lip_key).value_or(-1.0);
  r.exact_quadratic = doc.flag_or("filter", "exact_quadratic", false);
  return r;
}

ClassKappa read_kappa(const ConfigDocument& doc, const std::string& key, ClassKappa fallback) {
  if (!doc.has("filter", key)) return fallback;
  const Vector c = doc.vector("filter", key);
  try {
    if (c.size() == 1) return ClassKappa::linear(c(0));
    if (c.size() == 2) return c(1) == 0.0 ? ClassKappa::linear(c(0)) : ClassKappa::linear_cubic(c(0), c(1));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(doc.where("filter", key), e.what());
  }
  throw ConfigError(doc.where("filter", key), "expected [c1] or [c1, c3]");
}

}  // namespace

ScenarioConfig scenario_from_document(const ConfigDocument& doc) {
  ScenarioConfig c;
  c.name = doc.text_or("run", "name", c.name);

  c.system = choose<SystemKind>(doc, "system", "type",
                                {{"double_integrator", SystemKind::double_integrator},
                                 {"spacecraft", SystemKind::spacecraft}},
                                SystemKind::double_integrator);
  if (c.system == SystemKind::spacecraft) {
    c.inertia = doc.matrix("system", "inertia");
    if (c.inertia.cols() == 1) c.inertia = Matrix(c.inertia.col(0).asDiagonal());
    c.omega_max = doc.number("system", "omega_max");
  } else {
    c.x_max = doc.number("system", "x_max");
  }
  c.u_max = doc.number("system", "u_max");

  c.estimator = choose<EstimatorKind>(doc, "estimator", "type",
                                      {{"luenberger", EstimatorKind::luenberger}, {"ekf", EstimatorKind::ekf}},
                                      EstimatorKind::luenberger);
  if (c.estimator == EstimatorKind::luenberger) {
    c.observer_gain = doc.matrix("estimator", "gain");
  } else {
    c.sigma0 = doc.matrix("estimator", "sigma0");
    c.W = doc.matrix("estimator", "W");
    c.R = doc.matrix("estimator", "R");
    c.ekf_gain_bound = doc.number_or_auto("estimator", "gain_bound").value_or(-1.0);
  }
  c.error_bound = choose<ErrorBoundKind>(doc, "estimator", "error_bound",
                                         {{"linear", ErrorBoundKind::linear},
                                          {"exponential", ErrorBoundKind::exponential}},
                                         ErrorBoundKind::linear);
  c.e0 = doc.number("estimator", "e0");
  c.eb = doc.number("estimator", "eb");
  if (c.error_bound == ErrorBoundKind::exponential) {
    c.beta = doc.number("estimator", "beta");
    c.kappa = doc.number("estimator", "kappa");
  }

  c.backup_gain = doc.matrix("backup", "gain");
  c.gamma = doc.number("backup", "gamma");
  if (doc.has("backup", "P") && doc.text("backup", "P") != "auto") c.backup_P = doc.matrix("backup", "P");
  if (doc.has("backup", "Q")) c.backup_Q = doc.matrix("backup", "Q");
  c.horizon = doc.number("backup", "horizon");
  c.delta = doc.number("backup", "delta");
  c.flow_substeps = static_cast<int>(doc.integer_or("backup", "flow_substeps", c.flow_substeps));
  c.domain_radius = doc.number_or("backup", "domain_radius", c.domain_radius);

  c.filter = choose<FilterKind>(doc, "filter", "mode",
                                {{"obcbf", FilterKind::obcbf},
                                 {"vanilla-bcbf", FilterKind::vanilla},
                                 {"none", FilterKind::none}},
                                FilterKind::obcbf);
  c.bound = choose<BoundKind>(doc, "filter", "bound",
                              {{"linear", BoundKind::linear},
                               {"general", BoundKind::general},
                               {"closed_loop", BoundKind::closed_loop}},
                              BoundKind::linear);
  c.lf = doc.number_or_auto("filter", "lf");
  c.lg = doc.number_or_auto("filter", "lg");
  c.kappa_cl = doc.number_or_auto("filter", "kappa_cl");
  c.rule = read_rule(doc, "tightening", "lipschitz_h", TighteningRule::Kind::lipschitz);
  c.rule_b = read_rule(doc, "tightening_b", "lipschitz_hb", c.rule.kind);
  c.alpha = read_kappa(doc, "alpha", c.alpha);
  c.alpha_b = read_kappa(doc, "alpha_b", c.alpha_b);
  c.zero_rate = doc.flag_or("filter", "zero_rate", c.zero_rate);
  c.robust = doc.flag_or("filter", "robust", c.robust);

  c.noise.waveform = choose<NoiseSpec::Waveform>(doc, "noise", "waveform",
                                                 {{"zero", NoiseSpec::Waveform::zero},
                                                  {"filtered", NoiseSpec::Waveform::filtered},
                                                  {"multisine", NoiseSpec::Waveform::multisine}},
                                                 NoiseSpec::Waveform::filtered);
  c.noise.seed = static_cast<std::uint64_t>(doc.integer_or("noise", "seed", 1));
  c.noise.vbar = doc.number("noise", "vbar");
  c.noise.knot_spacing = doc.number_or("noise", "knot_spacing", c.noise.knot_spacing);
  c.noise.taps = static_cast<int>(doc.integer_or("noise", "taps", c.noise.taps));
  c.noise.tones = static_cast<int>(doc.integer_or("noise", "tones", c.noise.tones));

  c.t_final = doc.number("run", "t_final");
  c.control_period = doc.number_or("run", "control_period", c.delta);
  c.substeps = static_cast<int>(doc.integer_or("run", "substeps", c.substeps));
  c.x0 = doc.vector("run", "x0");
  c.xhat0 = doc.vector("run", "xhat0");
  c.primary_amplitude = doc.number_or("run", "primary_amplitude", 0.0);
  const int m = c.system == SystemKind::spacecraft ? 3 : 1;
  c.primary_frequency = doc.has("run", "primary_frequency") ? doc.vector("run", "primary_frequency")
                                                            : Vector(Vector::Zero(m));
  c.primary_phase =
      doc.has("run", "primary_phase") ? doc.vector("run", "primary_phase") : Vector(Vector::Zero(m));

  const auto unused = doc.unused();
  if (!unused.empty()) throw ConfigError(unused.front(), "unknown or unused key");
  c.noise.dim = c.system == SystemKind::spacecraft ? 3 : 1;
  c.validate();
  return c;
}

void ScenarioConfig::validate() const {
  const int n = system == SystemKind::spacecraft ? 3 : 2;
  const int m = system == SystemKind::spacecraft ? 3 : 1;
  const auto fail = [](const std::string& what) { throw ConfigError("scenario", what); };
  if (x0.size() != n || xhat0.size() != n) fail("x0 and xhat0 must have the state dimension");
  if (!((x0 - xhat0).norm() <= e0)) fail("initial conditions violate ||x0 - xhat0|| <= e0");
  if (!(control_period > 0.0)) fail("control_period must be positive");
  if (!(t_final > 0.0)) fail("t_final must be positive");
  if (substeps < 1 || flow_substeps < 1) fail("substeps must be positive");
  try {
    grid_intervals(horizon, delta);
  } catch (const std::invalid_argument&) {
    fail("horizon / delta must be an integer");
  }
  if (!(u_max > 0.0) || !(gamma > 0.0) || !(e0 > 0.0) || !(eb > 0.0)) fail("u_max, gamma, e0, eb must be positive");
  if (primary_frequency.size() != m || primary_phase.size() != m)
    fail("primary_frequency and primary_phase need one entry per input");
  if (noise.vbar < 0.0) fail("noise vbar must be non-negative");
  if (bound == BoundKind::linear && system != SystemKind::double_integrator)
    fail("the linear flow bound needs a linear system");
  if (error_bound == ErrorBoundKind::linear && estimator != EstimatorKind::luenberger)
    fail("the linear error bound needs a constant-gain observer");
}

ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  ConfigDocument doc = ConfigDocument::load(path);
  static const std::set<std::string> known = {
      "system.type", "system.inertia", "system.u_max", "system.x_max", "system.omega_max",
      "estimator.type", "estimator.gain", "estimator.sigma0", "estimator.W", "estimator.R",
      "estimator.gain_bound", "estimator.error_bound", "estimator.e0", "estimator.eb", "estimator.beta",
      "estimator.kappa", "backup.gain", "backup.gamma", "backup.P", "backup.Q", "backup.horizon",
      "backup.delta", "backup.flow_substeps", "backup.domain_radius", "filter.mode", "filter.bound",
      "filter.lf", "filter.lg", "filter.kappa_cl", "filter.tightening", "filter.tightening_b",
      "filter.lipschitz_h", "filter.lipschitz_hb", "filter.exact_quadratic", "filter.alpha",
      "filter.alpha_b", "filter.zero_rate", "filter.robust", "noise.waveform", "noise.seed", "noise.vbar",
      "noise.knot_spacing", "noise.taps", "noise.tones", "run.name", "run.t_final", "run.control_period",
      "run.substeps", "run.x0", "run.xhat0", "run.primary_amplitude", "run.primary_frequency",
      "run.primary_phase"};
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const std::string key = trim(o.substr(0, eq));
    doc.apply_override(o, known.count(key) > 0);
  }
  return scenario_from_document(doc);
}

std::string bundled_scenario(const std::string& name) {
  return std::string(OBCBF_SCENARIO_DIR) + "/" + name;
}

Vector Scenario::primary(double t) const {
  return (cfg.primary_amplitude * (cfg.primary_frequency * t + cfg.primary_phase).array().cos()).matrix();
}

void Scenario::require_certified() const {
  for (const auto& c : certificates) {
    if (!c.holds) {
      std::ostringstream msg;
      msg << "certification failed: " << c.name << " (" << c.relation << ": " << c.lhs << " vs " << c.rhs << ")";
      throw CertificationError(msg.str());
    }
  }
}

namespace {

CertificationLine leq(const std::string& name, const std::string& relation, double lhs, double rhs) {
  return CertificationLine{name, lhs, rhs, lhs <= rhs, relation};
}

}  // namespace

std::unique_ptr<Scenario> build_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  auto sc = std::make_unique<Scenario>();
  sc->cfg = cfg;
  const int m = cfg.system == SystemKind::spacecraft ? 3 : 1;
  sc->box = InputBox::symmetric(m, cfg.u_max);
  std::vector<CertificationLine>& cert = sc->certificates;

  try {
    if (cfg.system == SystemKind::double_integrator) {
      sc->sys = make_double_integrator();
      sc->linear.A = Matrix{{0.0, 1.0}, {0.0, 0.0}};
      sc->linear.B = Matrix{{0.0}, {1.0}};
      sc->linear.C = Matrix{{1.0, 0.0}};
      sc->h = make_quadratic_barrier(cfg.x_max * cfg.x_max, Matrix{{1.0, 0.0}, {0.0, 0.0}});
      const Matrix& k = cfg.backup_gain;
      if (k.rows() != 1 || k.cols() != 2) throw ConfigError("[backup] gain", "expected a 1x2 gain");
      Matrix p = cfg.backup_P;
      if (p.size() == 0) {
        const Matrix q = cfg.backup_Q.size() ? cfg.backup_Q : Matrix(Matrix::Identity(2, 2));
        p = math::solve_lyapunov(sc->linear.A - sc->linear.B * k, q);
      }
      sc->hb = make_quadratic_barrier(cfg.gamma, p);
      sc->policy = make_saturated_linear_policy(k, cfg.u_max, cfg.domain_radius);

      const auto gain_cert = certify_linear_backup_gain(p, cfg.gamma, sc->linear.A, sc->linear.B, k, cfg.eb);
      cert.push_back(leq("backup gain robust invariance", "2 eb sqrt(lmin(P)/gamma) ||PBK|| <= lmin(Q)",
                         gain_cert.rhs, gain_cert.lambda_min_Q));
      cert.push_back(leq("backup input within bounds", "sqrt(gamma)||K P^-1/2|| + ||K|| eb <= u_max",
                         no_saturation_peak(k, p, cfg.gamma, cfg.eb), cfg.u_max));
      const double x1_peak = cfg.gamma * p.inverse()(0, 0);
      cert.push_back(leq("backup set inside safe set", "gamma (P^-1)_11 <= x_max^2", x1_peak, cfg.x_max * cfg.x_max));
    } else {
      sc->sys = make_spacecraft(cfg.inertia);
      const double kb = cfg.backup_gain(0, 0);
      sc->h = make_quadratic_barrier(cfg.omega_max * cfg.omega_max, Matrix::Identity(3, 3));
      sc->hb = make_quadratic_barrier(cfg.gamma, 0.5 * cfg.inertia);
      sc->policy = make_spacecraft_policy(cfg.inertia, kb, cfg.domain_radius);
      double floor = std::numeric_limits<double>::infinity();
      try {
        floor = spacecraft_gain_floor(cfg.inertia, cfg.gamma, cfg.eb, cfg.omega_max);
      } catch (const std::domain_error&) {
      }
      cert.push_back(leq("backup gain floor", "K_b floor <= K_b", floor, kb));
      cert.push_back(leq("backup gain saturation ceiling", "K_b <= u_max/(||J|| w_max) - w_max", kb,
                         spacecraft_gain_ceiling(cfg.inertia, cfg.u_max, cfg.omega_max)));
      const double lmin = math::symmetric_eigen_extrema(cfg.inertia).min;
      cert.push_back(leq("backup set inside safe set", "2 gamma / lmin(J) <= w_max^2", 2.0 * cfg.gamma / lmin,
                         cfg.omega_max * cfg.omega_max));
    }

    if (cfg.estimator == EstimatorKind::luenberger) {
      if (cfg.system != SystemKind::double_integrator)
        throw ConfigError("[estimator] type", "the constant-gain observer needs a linear system");
      sc->estimator = constant_gain_observer(sc->linear, cfg.observer_gain);
    } else {
      sc->estimator = std::make_unique<ExtendedKalmanEstimator>(sc->sys, RiccatiState{cfg.sigma0, cfg.W, cfg.R},
                                                                cfg.ekf_gain_bound);
    }

    double settle_time = 0.0;
    if (cfg.error_bound == ErrorBoundKind::linear) {
      const auto* obs = dynamic_cast<const ConstantGainObserver*>(sc->estimator.get());
      sc->error_profile = std::make_shared<LinearErrorBound>(obs->error_dynamics(), cfg.observer_gain, cfg.e0,
                                                             cfg.noise.vbar, cfg.eb);
      double re = 0.0;
      math::is_hurwitz(obs->error_dynamics(), &re);
      settle_time = 40.0 / -re;
    } else {
      sc->error_profile = std::make_shared<ExponentialErrorBound>(cfg.e0, cfg.beta, cfg.kappa, cfg.eb);
      settle_time = 40.0 / cfg.kappa;
    }
    // The profile must settle inside the backup-region error bound; 40 time
    // constants leave a transient below 1e-17 of e0.
    cert.push_back(leq("error bound settles below eb", "delta_x(t -> inf) <= eb", sc->error_profile->at(settle_time),
                       cfg.eb));

    switch (cfg.bound) {
      case BoundKind::linear:
        sc->bound = std::make_unique<FlowBound>(FlowBound::linear(sc->error_profile, sc->linear.A));
        break;
      case BoundKind::general: {
        const double lf = cfg.lf ? *cfg.lf : estimate_drift_lipschitz(sc->sys, cfg.domain_radius).value;
        const double lg = cfg.lg ? *cfg.lg : estimate_input_map_lipschitz(sc->sys, cfg.domain_radius);
        sc->bound = std::make_unique<FlowBound>(FlowBound::general(sc->error_profile, lf, lg, sc->policy.sup_norm));
        break;
      }
      case BoundKind::closed_loop: {
        double kcl = 0.0;
        if (cfg.kappa_cl) {
          kcl = *cfg.kappa_cl;
        } else {
          const auto cl = closed_loop_field(sc->sys, sc->policy.control, sc->policy.control_jacobian);
          std::vector<Vector> samples;
          const int n = sc->sys.n;
          const int per_axis = n <= 2 ? 41 : 15;
          std::vector<int> idx(static_cast<size_t>(n), 0);
          while (true) {
            Vector x(n);
            for (int d = 0; d < n; ++d)
              x(d) = cfg.domain_radius * (-1.0 + 2.0 * idx[static_cast<size_t>(d)] / (per_axis - 1));
            if (x.norm() <= cfg.domain_radius) samples.push_back(x);
            int d = 0;
            while (d < n && ++idx[static_cast<size_t>(d)] == per_axis) idx[static_cast<size_t>(d++)] = 0;
            if (d == n) break;
          }
          kcl = one_sided_lipschitz_estimate(cl.jacobian, samples);
        }
        sc->bound = std::make_unique<FlowBound>(FlowBound::closed_loop(sc->error_profile, kcl,
                                                                       sc->estimator->gain_norm_bound(),
                                                                       sc->sys.measure_lipschitz, cfg.noise.vbar,
                                                                       cfg.delta / 4.0));
        break;
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", e.what());
  }
  return sc;
}

}  // namespace obcbf
