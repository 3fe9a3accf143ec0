#include "obcbf/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace obcbf {
namespace {

using Clock = std::chrono::steady_clock;

Vector random_in_ball(std::mt19937_64& rng, int n, double radius, bool on_sphere = false) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector d(n);
  for (int i = 0; i < n; ++i) d(i) = gauss(rng);
  d.normalize();
  const double r = on_sphere ? radius : radius * std::pow(unit(rng), 1.0 / n);
  return r * d;
}

template <class F>
CriterionResult timed(int id, const std::string& title, F&& body) {
  const auto t0 = Clock::now();
  CriterionResult r;
  r.id = id;
  r.title = title;
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

namespace {

// Best feasible point of the grid lower + i * step (per axis) inside [lo, hi].
std::optional<Vector> grid_pass(const QpProblem& p, const Vector& lo, const Vector& hi, double step) {
  const int m = static_cast<int>(lo.size());
  const long n0 = static_cast<long>(std::floor((hi(0) - lo(0)) / step)) + 1;
  const long n1 = m == 2 ? static_cast<long>(std::floor((hi(1) - lo(1)) / step)) + 1 : 1;
  const Eigen::Index rows = p.rows.rows();
  std::optional<Vector> best;
  double best_cost = std::numeric_limits<double>::infinity();
  double u[2] = {0.0, 0.0};
  for (long i = 0; i < n0; ++i) {
    u[0] = lo(0) + static_cast<double>(i) * step;
    for (long k = 0; k < n1; ++k) {
      if (m == 2) u[1] = lo(1) + static_cast<double>(k) * step;
      double cost = 0.0;
      for (int j = 0; j < m; ++j) cost += (u[j] - p.target(j)) * (u[j] - p.target(j));
      if (cost >= best_cost) continue;
      bool ok = true;
      for (Eigen::Index r = 0; r < rows && ok; ++r) {
        double dot = 0.0;
        for (int j = 0; j < m; ++j) dot += p.rows(r, j) * u[j];
        ok = dot >= p.rhs(r);
      }
      if (ok) {
        best_cost = cost;
        best = Vector(m);
        for (int j = 0; j < m; ++j) (*best)(j) = u[j];
      }
    }
  }
  return best;
}

}  // namespace

std::optional<Vector> qp_grid_search(const QpProblem& p, double step) {
  const int m = p.box.dim();
  if (m < 1 || m > 2) throw std::invalid_argument("qp_grid_search: only m <= 2");
  auto best = grid_pass(p, p.box.lower, p.box.upper, step);
  if (!best) return best;
  // Along a sloped active row the best grid point can sit about
  // (R step^2)^(1/3) from the optimum, R being the distance to the target;
  // rescan shrinking windows around the incumbent until that drops below 1e-4.
  for (int level = 0; level < 12; ++level) {
    const double reach = (*best - p.target).norm() + step;
    const double drift = std::cbrt(reach * step * step);
    if (drift < 1e-4 && level > 0) break;
    const double half = 3.0 * drift + 3.0 * step;
    const Vector lo = (best->array() - half).max(p.box.lower.array()).matrix();
    const Vector hi = (best->array() + half).min(p.box.upper.array()).matrix();
    step = half / 500.0;
    if (auto refined = grid_pass(p, lo, hi, step);
        refined && (*refined - p.target).squaredNorm() <= (*best - p.target).squaredNorm())
      best = refined;
  }
  return best;
}

double quadratic_sup_brute_force(const Matrix& p, const Vector& phi, double radius) {
  const Vector c = p * phi;
  const auto q = [&](const Vector& d) { return d.dot(p * d) + 2.0 * c.dot(d); };
  const int n = static_cast<int>(phi.size());
  double best = 0.0;
  if (n == 2) {
    const auto at = [&](double th) { return q(radius * Vector{{std::cos(th), std::sin(th)}}); };
    const int samples = 20000;
    const double h = 2.0 * std::numbers::pi / samples;
    int arg = 0;
    for (int k = 0; k < samples; ++k)
      if (at(k * h) > at(arg * h)) arg = k;
    double lo = (arg - 1) * h, hi = (arg + 1) * h;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      (at(m1) < at(m2) ? lo : hi) = (at(m1) < at(m2) ? m1 : m2);
    }
    best = std::max({best, at(0.5 * (lo + hi)), at(arg * h)});
  } else if (n == 3) {
    const auto at = [&](double th, double ph) {
      return q(radius * Vector{{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)}});
    };
    const int nt = 300, np = 600;
    double bt = 0.0, bp = 0.0, bv = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= nt; ++i)
      for (int j = 0; j < np; ++j) {
        const double th = std::numbers::pi * i / nt, ph = 2.0 * std::numbers::pi * j / np;
        const double v = at(th, ph);
        if (v > bv) {
          bv = v;
          bt = th;
          bp = ph;
        }
      }
    double step = std::numbers::pi / nt;
    while (step > 1e-13) {
      bool moved = false;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const double v = at(bt + di * step, bp + dj * step);
          if (v > bv) {
            bv = v;
            bt += di * step;
            bp += dj * step;
            moved = true;
          }
        }
      if (!moved) step *= 0.5;
    }
    best = std::max(best, bv);
  } else {
    throw std::invalid_argument("quadratic_sup_brute_force: only 2 or 3 dimensions");
  }
  return best;
}

ContainmentStats open_loop_containment(const Scenario& sc, int pairs, double xhat_radius, unsigned seed) {
  std::mt19937_64 rng(seed);
  const SystemModel& sys = sc.sys;
  const int n = sys.n;
  const double e0 = sc.cfg.e0;
  const int intervals = grid_intervals(sc.cfg.horizon, sc.cfg.delta);
  const int sub = 8;
  const double h = sc.cfg.delta / sub;
  ContainmentStats st;
  for (int k = 0; k < pairs; ++k) {
    const Vector xhat0 = random_in_ball(rng, n, xhat_radius);
    const Vector x0 = xhat0 + random_in_ball(rng, n, e0, k % 2 == 0);
    // z = (phi_true, phi_hat); both driven by k_b(phi_hat).
    const auto field = [&](double, const Vector& z) -> Vector {
      const Vector xt = z.head(n), xe = z.tail(n);
      const Vector u = sc.policy.control(xe);
      Vector dz(2 * n);
      dz << sys.dynamics(xt, u), sys.dynamics(xe, u);
      return dz;
    };
    Vector z(2 * n);
    z << x0, xhat0;
    ++st.pairs;
    bool violated = false;
    for (int i = 0; i <= intervals; ++i) {
      const double tau = i * sc.cfg.delta;
      const double dev = (z.head(n) - z.tail(n)).norm();
      const double bound = sc.bound->evaluate(tau, 0.0);
      st.worst_ratio = std::max(st.worst_ratio, dev / bound);
      st.worst_excess = std::max(st.worst_excess, dev - bound);
      if (dev > bound + 1e-9) violated = true;
      if (i == intervals) break;
      for (int s = 0; s < sub; ++s) z = math::rk4_step(field, tau + s * h, z, h);
    }
    st.violations += violated;
  }
  return st;
}

ContainmentStats closed_loop_containment(const Scenario& sc, const FlowBound& bound, int pairs, double xhat_radius,
                                         unsigned seed) {
  std::mt19937_64 rng(seed);
  const SystemModel& sys = sc.sys;
  const Estimator& est = *sc.estimator;
  const int n = sys.n;
  const double e0 = sc.cfg.e0;
  const int intervals = grid_intervals(sc.cfg.horizon, sc.cfg.delta);
  const int sub = 8;
  const double h = sc.cfg.delta / sub;
  const Vector s0 = est.initial_internal_state();
  const int ns = static_cast<int>(s0.size());
  const auto cl = closed_loop_field(sys, sc.policy.control, sc.policy.control_jacobian);
  ContainmentStats st;
  for (int k = 0; k < pairs; ++k) {
    NoiseSpec spec = sc.cfg.noise;
    spec.seed = seed * 1000003ULL + static_cast<unsigned>(k);
    const NoiseSource noise(spec);
    const Vector xhat0 = random_in_ball(rng, n, xhat_radius);
    const Vector x0 = xhat0 + random_in_ball(rng, n, e0, k % 2 == 0);
    // z = (x, xhat_E, s, phi_hat): truth under k_b(xhat_E), corrected
    // estimate, estimator state, open-loop estimated flow.
    const auto field = [&](double tau, const Vector& z) -> Vector {
      const Vector x = z.head(n), xe = z.segment(n, n), s = z.segment(2 * n, ns), ph = z.tail(n);
      const Vector u = sc.policy.control(xe);
      const Vector y = sys.measure(x) + noise.sample(tau);
      Vector dz(z.size());
      dz.head(n) = sys.dynamics(x, u);
      dz.segment(n, n) = sys.dynamics(xe, u) + est.correction(tau, xe, y, s);
      if (ns) dz.segment(2 * n, ns) = est.internal_derivative(tau, xe, u, s);
      dz.tail(n) = cl.field(ph);
      return dz;
    };
    Vector z(3 * n + ns);
    z << x0, xhat0, s0, xhat0;
    ++st.pairs;
    bool violated = false, breach = false;
    for (int i = 0; i <= intervals; ++i) {
      const double tau = i * sc.cfg.delta;
      const double dev = (z.head(n) - z.tail(n)).norm();
      const double b = bound.evaluate(tau, 0.0);
      st.worst_ratio = std::max(st.worst_ratio, dev / b);
      st.worst_excess = std::max(st.worst_excess, dev - b);
      if (dev > b + 1e-9) violated = true;
      const double ratio = (z.head(n) - z.segment(n, n)).norm() / sc.error_profile->at(tau);
      st.worst_estimator_ratio = std::max(st.worst_estimator_ratio, ratio);
      if (ratio > 1.0) breach = true;
      if (i == intervals) break;
      for (int s = 0; s < sub; ++s) z = math::rk4_step(field, tau + s * h, z, h);
    }
    st.violations += violated;
    st.estimator_bound_breaches += breach;
  }
  return st;
}

CriterionResult accept_double_integrator() {
  return timed(1, "double-integrator reproduction", [](CriterionResult& r) {
    const auto sc = build_scenario(load_scenario(bundled_scenario("double_integrator.toml")));
    sc->require_certified();
    const SimLog log = run_scenario(*sc);
    double u_peak = 0.0;
    for (const auto& s : log.steps) u_peak = std::max(u_peak, s.u.cwiseAbs().maxCoeff());
    const auto& sum = log.summary;
    r.pass = sum.steps == 1000 && sum.min_h >= -1e-6 && sum.max_error_ratio <= 1.0 && u_peak <= 2.0 &&
             sum.fallback_count == 0 && sum.wall_time < 10.0;
    r.detail = "min h = " + fmt(sum.min_h) + ", max ||e||/delta_x = " + fmt(sum.max_error_ratio) +
               ", max |u| = " + fmt(u_peak) + ", fallbacks = " + std::to_string(sum.fallback_count) +
               ", run " + fmt(sum.wall_time) + " s";
  });
}

CriterionResult accept_spacecraft_vs_baseline() {
  return timed(2, "spacecraft O-bCBF vs vanilla baseline", [](CriterionResult& r) {
    const std::string path = bundled_scenario("spacecraft.toml");
    const auto sc = build_scenario(load_scenario(path));
    sc->require_certified();
    const SimLog ob = run_scenario(*sc);
    const auto base = build_scenario(load_scenario(path, {"filter.mode=vanilla-bcbf"}));
    const SimLog va = run_scenario(*base);
    double u_inf = 0.0;
    for (const auto& s : ob.steps) u_inf = std::max(u_inf, s.u.cwiseAbs().maxCoeff());
    const bool full = ob.summary.steps == static_cast<int>(std::llround(sc->cfg.t_final / sc->cfg.control_period));
    r.pass = full && ob.summary.min_h >= 0.0 && u_inf <= 0.03 && va.summary.min_h < 0.0 &&
             ob.summary.wall_time <= 60.0 && va.summary.wall_time <= 60.0;
    r.detail = "O-bCBF min h = " + fmt(ob.summary.min_h) + ", ||u||_inf = " + fmt(u_inf) + "; vanilla min h = " +
               fmt(va.summary.min_h) + "; runs " + fmt(ob.summary.wall_time) + " s / " + fmt(va.summary.wall_time) +
               " s";
  });
}

CriterionResult accept_certification() {
  return timed(3, "certification margins", [](CriterionResult& r) {
    const auto di = build_scenario(load_scenario(bundled_scenario("double_integrator.toml")));
    const auto sc = build_scenario(load_scenario(bundled_scenario("spacecraft.toml")));
    const auto& k = di->certificates.at(0);
    const auto& floor = sc->certificates.at(0);
    const auto& ceil = sc->certificates.at(1);
    r.pass = k.holds && floor.holds && ceil.holds;
    r.detail = "lmin(Q) - rhs = " + fmt(k.margin()) + "; K_b - floor = " + fmt(floor.margin()) +
               " (floor " + fmt(floor.lhs) + "); ceiling - K_b = " + fmt(ceil.margin()) + " (ceiling " +
               fmt(ceil.rhs) + ")";
  });
}

CriterionResult accept_flow_containment() {
  return timed(4, "flow-bound containment", [](CriterionResult& r) {
    const auto di = build_scenario(load_scenario(bundled_scenario("double_integrator.toml")));
    const auto sc = build_scenario(load_scenario(bundled_scenario("spacecraft.toml")));
    const auto lin = open_loop_containment(*di, 200, 2.0, 101);
    const auto gen = open_loop_containment(*sc, 200, sc->cfg.omega_max, 202);

    const auto cl = closed_loop_field(sc->sys, sc->policy.control, sc->policy.control_jacobian);
    std::mt19937_64 rng(303);
    std::vector<Vector> samples;
    for (int i = 0; i < 500; ++i) samples.push_back(random_in_ball(rng, 3, sc->cfg.domain_radius));
    const double kcl = one_sided_lipschitz_estimate(cl.jacobian, samples);
    const FlowBound osl = FlowBound::closed_loop(sc->error_profile, kcl, sc->estimator->gain_norm_bound(),
                                                 sc->sys.measure_lipschitz, sc->cfg.noise.vbar, sc->cfg.delta / 4.0);
    const auto clo = closed_loop_containment(*sc, osl, 200, sc->cfg.omega_max, 404);

    r.pass = lin.violations == 0 && gen.violations == 0 && clo.violations == 0 && std::abs(kcl + sc->cfg.backup_gain(0, 0)) < 1e-6;
    r.detail = "linear " + std::to_string(lin.violations) + "/200 (worst ratio " + fmt(lin.worst_ratio) +
               "), general " + std::to_string(gen.violations) + "/200 (" + fmt(gen.worst_ratio) +
               "), closed-loop " + std::to_string(clo.violations) + "/200 (" + fmt(clo.worst_ratio) +
               ", kappa_cl = " + fmt(kcl) + "; ||e|| exceeded delta_x in " + std::to_string(clo.estimator_bound_breaches) +
               " runs, max ratio " + fmt(clo.worst_estimator_ratio) + ")";
  });
}

CriterionResult accept_estimator_bound() {
  return timed(5, "estimator error bound over 50 noise seeds", [](CriterionResult& r) {
    const std::string path = bundled_scenario("double_integrator.toml");
    const auto base = build_scenario(load_scenario(path));
    const auto& cfg = base->cfg;
    const auto* obs = dynamic_cast<const ConstantGainObserver*>(base->estimator.get());
    const int steps = static_cast<int>(std::llround(cfg.t_final / cfg.control_period));
    std::vector<double> bound(static_cast<size_t>(steps));
    for (int k = 0; k < steps; ++k)
      bound[static_cast<size_t>(k)] = error_bound_linear(k * cfg.control_period, cfg.e0, obs->error_dynamics(),
                                                         cfg.observer_gain, cfg.noise.vbar);
    int failures = 0;
    double worst = 0.0;
    for (int seed = 1; seed <= 50; ++seed) {
      const auto sc = build_scenario(load_scenario(path, {"noise.seed=" + std::to_string(seed)}));
      const SimLog log = run_scenario(*sc);
      bool ok = static_cast<int>(log.steps.size()) == steps;
      for (size_t k = 0; k < log.steps.size(); ++k) {
        worst = std::max(worst, log.steps[k].e_norm / bound[k]);
        if (log.steps[k].e_norm > bound[k]) ok = false;
      }
      failures += !ok;
    }
    r.pass = failures == 0;
    r.detail = std::to_string(50 - failures) + "/50 seeds within bound, max ||e||/bound = " + fmt(worst);
  });
}

CriterionResult accept_qp_oracle() {
  return timed(6, "QP oracle equivalence", [](CriterionResult& r) {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
    int mismatches = 0, kkt_bad = 0, feasible = 0;
    double worst_dist = 0.0, worst_kkt = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int m = 1 + k % 2;
      QpProblem p;
      p.box.lower.resize(m);
      p.box.upper.resize(m);
      for (int j = 0; j < m; ++j) {
        p.box.lower(j) = -uni(0.5, 1.5);
        p.box.upper(j) = uni(0.5, 1.5);
      }
      p.target.resize(m);
      for (int j = 0; j < m; ++j) p.target(j) = uni(-3.0, 3.0);
      Vector inner(m);
      for (int j = 0; j < m; ++j) inner(j) = uni(0.8 * p.box.lower(j), 0.8 * p.box.upper(j));
      const bool make_infeasible = k % 5 == 4;
      const int rows = 1 + static_cast<int>(uni(0.0, 5.0));
      p.rows.resize(rows + (make_infeasible ? 2 : 0), m);
      p.rhs.resize(p.rows.rows());
      for (int i = 0; i < rows; ++i) {
        const Vector a = random_in_ball(rng, m, uni(0.2, 3.0), true);
        p.rows.row(i) = a.transpose();
        p.rhs(i) = a.dot(inner) - uni(0.05, 0.5) * a.norm();
      }
      if (make_infeasible) {
        const Vector a = random_in_ball(rng, m, 1.0, true);
        p.rows.row(rows) = a.transpose();
        p.rhs(rows) = a.dot(inner) + 0.3;
        p.rows.row(rows + 1) = -a.transpose();
        p.rhs(rows + 1) = -a.dot(inner) + 0.3;
      }
      const QpResult res = solve_qp(p);
      const auto grid = qp_grid_search(p, 1e-3);
      if (res.feasible != grid.has_value()) {
        ++mismatches;
        continue;
      }
      if (!res.feasible) continue;
      ++feasible;
      const double dist = (res.solution - *grid).norm();
      worst_dist = std::max(worst_dist, dist);
      worst_kkt = std::max(worst_kkt, res.kkt_residual);
      if (dist > 2e-3) ++mismatches;
      if (res.kkt_residual > 1e-6) ++kkt_bad;
    }
    r.pass = mismatches == 0 && kkt_bad == 0;
    r.detail = std::to_string(100 - mismatches) + "/100 agree with grid search (" + std::to_string(feasible) +
               " feasible), max distance " + fmt(worst_dist) + ", max KKT residual " + fmt(worst_kkt);
  });
}

CriterionResult accept_sensitivity() {
  return timed(7, "sensitivity vs finite differences", [](CriterionResult& r) {
    double worst = 0.0;
    std::mt19937_64 rng(707);
    for (const char* file : {"double_integrator.toml", "spacecraft.toml"}) {
      const auto sc = build_scenario(load_scenario(bundled_scenario(file)));
      const int n = sc->sys.n;
      const double radius = sc->cfg.system == SystemKind::spacecraft ? sc->cfg.omega_max : 2.0;
      for (int k = 0; k < 10; ++k) {
        const Vector xhat = random_in_ball(rng, n, radius);
        const auto flow = [&](const Vector& x) {
          return propagate_flow(sc->sys, sc->policy, x, sc->cfg.horizon, sc->cfg.delta, sc->cfg.flow_substeps)
              .states.back();
        };
        const Matrix phi = propagate_flow(sc->sys, sc->policy, xhat, sc->cfg.horizon, sc->cfg.delta,
                                          sc->cfg.flow_substeps)
                               .sensitivities.back();
        Matrix fd(n, n);
        const double h = 1e-6 * std::max(radius, 1e-3);
        for (int j = 0; j < n; ++j) {
          const Vector e = Vector::Unit(n, j) * h;
          fd.col(j) = (flow(xhat + e) - flow(xhat - e)) / (2.0 * h);
        }
        worst = std::max(worst, (phi - fd).norm() / phi.norm());
      }
    }
    r.pass = worst <= 1e-4;
    r.detail = "max relative error " + fmt(worst) + " over 20 points";
  });
}

CriterionResult accept_tightening() {
  return timed(8, "tightening soundness", [](CriterionResult& r) {
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const auto di = build_scenario(load_scenario(bundled_scenario("double_integrator.toml")));
    const auto sc = build_scenario(load_scenario(bundled_scenario("spacecraft.toml")));

    struct Case {
      std::string name;
      const Barrier* barrier;
      TighteningRule rule;
      double point_radius;
      double delta_max;
    };
    const Barrier linear = make_linear_barrier(Vector{{1.0, -2.0}}, 0.5);
    const Vector center{{0.3, -0.2}};
    const Barrier convex = make_general_barrier(
        [center](const Vector& x) { return (x - center).squaredNorm() - 0.25; },
        [center](const Vector& x) -> Vector { return 2.0 * (x - center); },
        [c = center.norm()](double rad) { return 2.0 * (rad + c); }, true);
    TighteningRule exact_lin{TighteningRule::Kind::exact_linear, -1.0, false};
    TighteningRule quad{TighteningRule::Kind::quadratic, -1.0, false};
    TighteningRule quad_exact{TighteningRule::Kind::quadratic, -1.0, true};
    TighteningRule convex_grad{TighteningRule::Kind::convex_gradient, -1.0, false};
    TighteningRule lip{TighteningRule::Kind::lipschitz, -1.0, false};
    const std::vector<Case> cases = {
        {"exact-linear", &linear, exact_lin, 2.0, 0.5},
        {"quadratic h (PSD)", &di->h, quad, 2.0, 0.5},
        {"quadratic h_b", &di->hb, quad, 1.0, 0.5},
        {"quadratic-exact h_b", &di->hb, quad_exact, 1.0, 0.5},
        {"quadratic-exact h (PSD)", &di->h, quad_exact, 2.0, 0.5},
        {"quadratic spacecraft h_b", &sc->hb, quad, 0.07, 0.03},
        {"quadratic-exact spacecraft h_b", &sc->hb, quad_exact, 0.07, 0.03},
        {"convex-gradient", &convex, convex_grad, 1.0, 0.4},
        {"lipschitz h", &di->h, lip, 2.0, 0.5},
        {"lipschitz spacecraft h", &sc->h, lip, 0.1, 0.03},
        {"lipschitz spacecraft h_b", &sc->hb, lip, 0.07, 0.03},
    };
    int unsound = 0, exact_mismatch = 0;
    double worst_gap = 0.0;
    std::ostringstream notes;
    for (const auto& c : cases) {
      const int n = c.barrier->kind == Barrier::Kind::quadratic_centered ? static_cast<int>(c.barrier->P.rows()) : 2;
      for (int k = 0; k < 10; ++k) {
        const Vector phi = random_in_ball(rng, n, c.point_radius);
        const double delta = c.delta_max * u01(rng);
        const double eps = tighten(c.rule, *c.barrier, phi, delta);
        double sup = 0.0;
        for (int s = 0; s < 1000; ++s) {
          const Vector d = random_in_ball(rng, n, delta, s % 2 == 0);
          sup = std::max(sup, c.barrier->value(phi) - c.barrier->value(phi + d));
        }
        if (sup > eps + 1e-12) {
          ++unsound;
          notes << ' ' << c.name;
        }
        if (c.rule.kind == TighteningRule::Kind::quadratic && c.rule.exact_quadratic) {
          const double brute = quadratic_sup_brute_force(c.barrier->P, phi, delta);
          worst_gap = std::max(worst_gap, std::abs(brute - eps));
          if (std::abs(brute - eps) > 1e-6) ++exact_mismatch;
        }
      }
    }
    r.pass = unsound == 0 && exact_mismatch == 0;
    r.detail = std::to_string(cases.size()) + " rule/barrier cases x 10 points x 1000 perturbations: " +
               std::to_string(unsound) + " unsound" + notes.str() + "; exact quadratic vs brute force max gap " +
               fmt(worst_gap);
  });
}

std::vector<CriterionResult> run_acceptance(const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (auto fn : {accept_double_integrator, accept_spacecraft_vs_baseline, accept_certification,
                  accept_flow_containment, accept_estimator_bound, accept_qp_oracle, accept_sensitivity,
                  accept_tightening}) {
    out.push_back(fn());
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ". " << r.title << ": " << r.detail << " (" << std::fixed
    << std::setprecision(1) << r.seconds << " s)";
  return s.str();
}

}  // namespace obcbf
