#include "obcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace obcbf {
namespace {

constexpr double kFeasTol = 1e-8;

struct ActiveSetOutcome {
  Vector z;
  std::vector<int> working;
  Vector lambda;
  int iterations = 0;
  bool converged = false;
};

// min 1/2 z^T H z + grad terms s.t. A z >= b from a feasible z, with H either
// the identity about `center` or zero with constant gradient `linear`.
ActiveSetOutcome active_set(const Matrix& a, const Vector& b, Vector z, bool quadratic, const Vector& center,
                            const Vector& linear) {
  const int rows = static_cast<int>(a.rows());
  const int dim = static_cast<int>(a.cols());
  ActiveSetOutcome out;
  std::vector<int> w;
  std::vector<char> in_w(static_cast<size_t>(rows), 0);
  const int max_iter = 50 * (rows + dim) + 100;

  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    const Vector g = quadratic ? Vector(z - center) : linear;
    Vector lambda;
    Vector p = -g;
    if (!w.empty()) {
      Matrix aw(dim, static_cast<int>(w.size()));
      for (size_t k = 0; k < w.size(); ++k) aw.col(static_cast<int>(k)) = a.row(w[k]).transpose();
      lambda = aw.colPivHouseholderQr().solve(g);
      p = -(g - aw * lambda);
    }

    if (p.norm() <= 1e-12 * (1.0 + g.norm())) {
      // Bland: drop the lowest-index constraint with a negative multiplier.
      int drop = -1;
      for (size_t k = 0; k < w.size(); ++k) {
        if (lambda(static_cast<int>(k)) < -1e-12 && (drop < 0 || w[k] < w[static_cast<size_t>(drop)]))
          drop = static_cast<int>(k);
      }
      if (drop < 0) {
        out.z = z;
        out.working = w;
        out.lambda = lambda.size() ? lambda : Vector(0);
        out.converged = true;
        return out;
      }
      in_w[static_cast<size_t>(w[static_cast<size_t>(drop)])] = 0;
      w.erase(w.begin() + drop);
      continue;
    }

    double alpha = quadratic ? 1.0 : std::numeric_limits<double>::infinity();
    int block = -1;
    for (int i = 0; i < rows; ++i) {
      if (in_w[static_cast<size_t>(i)]) continue;
      const double ap = a.row(i).dot(p);
      if (ap >= -1e-14 * p.norm()) continue;
      const double step = std::max(0.0, (a.row(i).dot(z) - b(i)) / -ap);
      // Strict comparison in index order keeps the lowest index on ties.
      if (step < alpha) {
        alpha = step;
        block = i;
      }
    }
    if (!std::isfinite(alpha)) break;  // unbounded; cannot happen for the bounded problems built here
    z += alpha * p;
    if (block >= 0) {
      w.push_back(block);
      in_w[static_cast<size_t>(block)] = 1;
    }
  }
  out.z = z;
  out.working = w;
  return out;
}

}  // namespace

double qp_kkt_residual(const QpProblem& p, const Vector& u, const std::vector<int>& active,
                       const Vector& multipliers) {
  const int c = static_cast<int>(p.rows.rows());
  const int m = static_cast<int>(u.size());
  const auto row = [&](int k, Vector& a, double& b) {
    a.setZero(m);
    if (k < c) {
      a = p.rows.row(k).transpose();
      b = p.rhs(k);
    } else if (k < c + m) {
      a(k - c) = 1.0;
      b = p.box.lower(k - c);
    } else {
      a(k - c - m) = -1.0;
      b = -p.box.upper(k - c - m);
    }
  };
  double res = 0.0;
  Vector stat = u - p.target;
  Vector a(m);
  double b = 0.0;
  for (size_t k = 0; k < active.size(); ++k) {
    const double lam = multipliers(static_cast<int>(k));
    row(active[k], a, b);
    stat -= lam * a;
    res = std::max(res, std::max(0.0, -lam));
    res = std::max(res, std::abs(lam * (a.dot(u) - b)));
  }
  res = std::max(res, stat.cwiseAbs().maxCoeff());
  for (int k = 0; k < c + 2 * m; ++k) {
    row(k, a, b);
    if (k < c && a.norm() < 1e-12) continue;  // dropped by the solver
    res = std::max(res, b - a.dot(u));
  }
  return res;
}

QpResult solve_qp(const QpProblem& p) {
  p.box.validate();
  const int m = p.box.dim();
  if (p.target.size() != m || p.rows.cols() != m || p.rows.rows() != p.rhs.size())
    throw std::invalid_argument("solve_qp: inconsistent problem dimensions");
  QpResult res;

  // Normalise rows; drop those without direction.
  std::vector<int> kept;
  std::vector<double> norms;
  for (int i = 0; i < p.rows.rows(); ++i) {
    const double nrm = p.rows.row(i).norm();
    if (!std::isfinite(nrm) || !std::isfinite(p.rhs(i))) {
      res.most_violated_row = i;
      res.diagnostic = "non-finite constraint row";
      res.solution = p.box.clamp(p.target);
      return res;
    }
    if (nrm < 1e-12) {
      res.dropped_rows.push_back(i);
      continue;
    }
    kept.push_back(i);
    norms.push_back(nrm);
  }
  const int c = static_cast<int>(kept.size());
  Matrix g(c, m);
  Vector b(c);
  for (int k = 0; k < c; ++k) {
    g.row(k) = p.rows.row(kept[static_cast<size_t>(k)]) / norms[static_cast<size_t>(k)];
    b(k) = p.rhs(kept[static_cast<size_t>(k)]) / norms[static_cast<size_t>(k)];
  }

  // Phase 1: min s s.t. G u + s >= b, box, s >= 0.
  Vector u = p.box.clamp(p.target);
  if (c > 0 && ((g * u - b).minCoeff() < 0.0)) {
    const int rows1 = c + 2 * m + 1;
    Matrix a1 = Matrix::Zero(rows1, m + 1);
    Vector b1(rows1);
    a1.topLeftCorner(c, m) = g;
    a1.col(m).head(c).setOnes();
    b1.head(c) = b;
    for (int j = 0; j < m; ++j) {
      a1(c + j, j) = 1.0;
      b1(c + j) = p.box.lower(j);
      a1(c + m + j, j) = -1.0;
      b1(c + m + j) = -p.box.upper(j);
    }
    a1(rows1 - 1, m) = 1.0;
    b1(rows1 - 1) = 0.0;
    Vector z(m + 1);
    z.head(m) = u;
    z(m) = std::max(0.0, (b - g * u).maxCoeff());
    const Vector e_s = Vector::Unit(m + 1, m);
    const auto lp = active_set(a1, b1, z, false, Vector(), e_s);
    res.iterations += lp.iterations;
    u = p.box.clamp(lp.z.head(m));
    const Vector viol = b - g * u;
    Eigen::Index worst = 0;
    const double slack = c > 0 ? viol.maxCoeff(&worst) : 0.0;
    res.phase1_slack = std::max(0.0, slack);
    if (!lp.converged || slack > kFeasTol) {
      res.most_violated_row = kept[static_cast<size_t>(worst)];
      std::ostringstream msg;
      msg << "infeasible: phase-1 slack " << slack << " on row " << res.most_violated_row;
      if (!lp.converged) msg << " (phase 1 hit its iteration limit)";
      res.diagnostic = msg.str();
      res.solution = u;
      return res;
    }
  }

  // Phase 2 from the feasible point, rhs relaxed by the residual phase-1 slack.
  const int rows2 = c + 2 * m;
  Matrix a2 = Matrix::Zero(rows2, m);
  Vector b2(rows2);
  a2.topRows(c) = g;
  b2.head(c) = b.cwiseMin(g * u);
  for (int j = 0; j < m; ++j) {
    a2(c + j, j) = 1.0;
    b2(c + j) = p.box.lower(j);
    a2(c + m + j, j) = -1.0;
    b2(c + m + j) = -p.box.upper(j);
  }
  const auto qp = active_set(a2, b2, u, true, p.target, Vector());
  res.iterations += qp.iterations;
  if (!qp.converged) {
    res.diagnostic = "active-set iteration limit reached";
    res.solution = p.box.clamp(qp.z);
    res.most_violated_row = -1;
    return res;
  }
  res.feasible = true;
  res.solution = p.box.clamp(qp.z);
  res.multipliers.resize(static_cast<int>(qp.working.size()));
  for (size_t k = 0; k < qp.working.size(); ++k) {
    const int w = qp.working[k];
    double lam = qp.lambda(static_cast<int>(k));
    int idx = w;
    if (w < c) {
      idx = kept[static_cast<size_t>(w)];
      lam /= norms[static_cast<size_t>(w)];
    } else {
      idx = static_cast<int>(p.rows.rows()) + (w - c);
    }
    res.active.push_back(idx);
    res.multipliers(static_cast<int>(k)) = lam;
  }
  res.kkt_residual = qp_kkt_residual(p, res.solution, res.active, res.multipliers);
  return res;
}

}  // namespace obcbf
