#include "obcbf/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace obcbf {

CoState step(const SystemModel& sys, const Estimator& est, const NoiseSource& noise, const Barrier* h,
             const CoState& start, const Vector& u, double t, double dt, int substeps) {
  if (substeps < 1) throw std::invalid_argument("step: substeps must be positive");
  const int n = sys.n;
  const int ns = static_cast<int>(start.s.size());
  const auto field = [&](double tt, const Vector& z) -> Vector {
    const Vector x = z.head(n);
    const Vector xh = z.segment(n, n);
    const Vector s = z.tail(ns);
    const Vector y = sys.measure(x) + noise.sample(tt);
    Vector dz(z.size());
    dz.head(n) = sys.dynamics(x, u);
    dz.segment(n, n) = sys.dynamics(xh, u) + est.correction(tt, xh, y, s);
    if (ns > 0) dz.tail(ns) = est.internal_derivative(tt, xh, u, s);
    return dz;
  };
  Vector z(2 * n + ns);
  z << start.x, start.xhat, start.s;
  CoState out;
  out.min_h = h ? h->value(start.x) : 0.0;
  const double hstep = dt / substeps;
  for (int k = 0; k < substeps; ++k) {
    const double tk = t + k * hstep;
    z = math::rk4_step(field, tk, z, hstep);
    if (!z.allFinite()) {
      std::ostringstream msg;
      msg << "closed-loop state became non-finite";
      throw math::IntegrationError(msg.str(), tk + hstep);
    }
    if (h) out.min_h = std::min(out.min_h, h->value(z.head(n)));
  }
  out.x = z.head(n);
  out.xhat = z.segment(n, n);
  out.s = z.tail(ns);
  if (ns > 0) est.check_internal_state(out.s);
  return out;
}

SimLog run_scenario(const ScenarioConfig& cfg) {
  const auto sc = build_scenario(cfg);
  sc->require_certified();
  return run_scenario(*sc);
}

SimLog run_scenario(const Scenario& sc) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig& cfg = sc.cfg;
  SimLog log;
  log.scenario = cfg.name;
  log.filter = cfg.filter;

  ObcbfSettings settings;
  settings.h = &sc.h;
  settings.hb = &sc.hb;
  settings.bound = sc.bound.get();
  settings.rule = cfg.rule;
  settings.rule_b = cfg.rule_b;
  settings.alpha = cfg.alpha;
  settings.alpha_b = cfg.alpha_b;
  settings.zero_rate = cfg.zero_rate;
  settings.robust = cfg.robust;
  SafetyFilter filter(sc.sys, sc.policy, settings, sc.box, cfg.horizon, cfg.delta, cfg.flow_substeps, cfg.filter);
  NoiseSource noise(cfg.noise);

  CoState state{cfg.x0, cfg.xhat0, sc.estimator->initial_internal_state(), 0.0};
  const int steps = static_cast<int>(std::llround(cfg.t_final / cfg.control_period));
  log.steps.reserve(static_cast<size_t>(steps));

  SimSummary& sum = log.summary;
  sum.min_h = std::numeric_limits<double>::infinity();
  sum.min_h_logged = sum.min_h;
  sum.min_tightened_margin = sum.min_h;

  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.control_period;
    StepRecord rec;
    rec.t = t;
    rec.x = state.x;
    rec.xhat = state.xhat;
    rec.y = sc.sys.measure(state.x) + noise.sample(t);
    rec.kp = sc.primary(t);
    const Matrix gain = sc.estimator->gain(state.s);
    rec.gain_norm = math::spectral_norm(gain);
    rec.delta_x = sc.error_profile->at(t);

    Robustness robust{gain, sc.sys.measure_lipschitz, rec.delta_x, cfg.noise.vbar};
    const FilterVerdict v = filter.safe_control(state.xhat, t, rec.kp, robust);
    if (v.mode == FilterMode::backup_fallback) {
      std::ostringstream msg;
      msg << "t=" << t << " backup fallback: " << v.diagnostic;
      log.events.push_back(msg.str());
    }
    rec.u = v.input;
    rec.mode = v.mode;
    rec.margins = v.margins;
    rec.tightened_margin = v.tightened_margin;
    rec.kkt_residual = v.kkt_residual;
    rec.h = sc.h.value(state.x);
    rec.hb = sc.hb.value(state.x);
    rec.e_norm = (state.x - state.xhat).norm();

    sum.min_h_logged = std::min(sum.min_h_logged, rec.h);
    sum.min_h = std::min(sum.min_h, rec.h);
    if (rec.delta_x > 0.0) sum.max_error_ratio = std::max(sum.max_error_ratio, rec.e_norm / rec.delta_x);
    const Vector excess = (rec.u - sc.box.upper).cwiseMax(sc.box.lower - rec.u).cwiseMax(0.0);
    sum.max_input_excess = std::max(sum.max_input_excess, excess.maxCoeff());
    if (rec.tightened_margin.size())
      sum.min_tightened_margin = std::min(sum.min_tightened_margin, rec.tightened_margin.minCoeff());
    sum.max_kkt_residual = std::max(sum.max_kkt_residual, rec.kkt_residual);
    sum.max_gain_norm = std::max(sum.max_gain_norm, rec.gain_norm);

    try {
      state = step(sc.sys, *sc.estimator, noise, &sc.h, state, rec.u, t, cfg.control_period, cfg.substeps);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "t=" << t << " simulation aborted: " << e.what();
      log.events.push_back(msg.str());
      log.steps.push_back(std::move(rec));
      sum.min_h = -std::numeric_limits<double>::infinity();
      break;
    }
    sum.min_h = std::min(sum.min_h, state.min_h);
    log.steps.push_back(std::move(rec));
  }
  sum.steps = static_cast<int>(log.steps.size());
  sum.fallback_count = filter.fallback_count();
  sum.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

bool MonitorReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const MonitorVerdict& v) { return v.pass; });
}

const MonitorVerdict& MonitorReport::get(const std::string& name) const {
  for (const auto& v : verdicts)
    if (v.name == name) return v;
  throw std::out_of_range("no monitor named " + name);
}

MonitorReport monitor(const SimLog& log, const Scenario& sc) {
  MonitorReport r;
  const SimSummary& s = log.summary;
  const bool complete = s.steps == static_cast<int>(std::llround(sc.cfg.t_final / sc.cfg.control_period));

  r.verdicts.push_back({"safety", complete && s.min_h >= -1e-9, s.min_h, -1e-9,
                        complete ? "min h(x) over the run" : "run aborted early"});
  double ratio = s.max_error_ratio;
  for (const auto& rec : log.steps)
    if (rec.delta_x > 0.0) ratio = std::max(ratio, rec.e_norm / rec.delta_x);
  r.verdicts.push_back({"error_bound", ratio <= 1.0, ratio, 1.0, "max ||e_x|| / delta_x"});
  r.verdicts.push_back({"input_bounds", s.max_input_excess == 0.0, s.max_input_excess, 0.0,
                        "largest distance of u outside the box"});

  MonitorVerdict member{"tightened_membership", true, 0.0, -1e-6, "min h(phi) - eps over qp steps"};
  if (log.filter == FilterKind::none) {
    member.detail = "no filter";
  } else {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& rec : log.steps)
      if (rec.mode == FilterMode::qp && rec.tightened_margin.size())
        worst = std::min(worst, rec.tightened_margin.minCoeff());
    member.value = std::isfinite(worst) ? worst : 0.0;
    member.pass = member.value >= -1e-6;
  }
  r.verdicts.push_back(member);

  r.verdicts.push_back({"fallback", true, static_cast<double>(s.fallback_count), 0.0,
                        "backup fallback events (informational)"});
  return r;
}

}  // namespace obcbf
