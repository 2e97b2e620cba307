#pragma once

#include <tuple>
#include <utility>

#include "powermod/common.hpp"

namespace powermod {

// Sparse linear program in computational standard form:
//   minimize c'x  subject to  A x = b,  x >= 0.
//
// The solver factors the normal equations A W A' as a band matrix, so rows
// must be added in time order and every column should touch a contiguous
// window of rows (staircase structure). Globally-coupled quantities such as
// a billing-cycle peak belong in the model as running-max chains, which keep
// the band narrow.
struct LpProblem {
  int m = 0;
  int n = 0;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<std::vector<std::pair<int, double>>> cols;  // (row, value)

  int add_row(double rhs) {
    b.push_back(rhs);
    return m++;
  }
  int add_col(double cost) {
    c.push_back(cost);
    cols.emplace_back();
    return n++;
  }
  void add_entry(int col, int row, double val) {
    cols[static_cast<size_t>(col)].emplace_back(row, val);
  }
};

struct LpOptions {
  double tol = 1e-10;  // relative primal/dual/gap tolerance
  int max_iter = 100;
  double regularization = 1e-12;
  double sigma_min = 0.05;   // centering floor
  int refine_passes = 2;     // iterative refinement on normal solves
  double step_guard = 3.0;   // max per-step residual growth factor
};

enum class LpStatus { Optimal, IterationLimit, Numerical };

struct LpSolution {
  LpStatus status = LpStatus::Numerical;
  std::vector<double> x;
  double objective = 0.0;
  double rel_gap = kInf;
  double primal_inf = kInf;
  double dual_inf = kInf;
  int iterations = 0;
};

namespace lpdetail {

// Symmetric positive definite band matrix, lower storage: entry (i, j) with
// 0 <= i - j <= bw lives at data[i*(bw+1) + (i-j)].
class BandMatrix {
 public:
  void reset(int m, int bw) {
    m_ = m;
    bw_ = bw;
    data_.assign(static_cast<size_t>(m) * (bw_ + 1), 0.0);
  }
  double& at(int i, int j) {  // requires j <= i, i - j <= bw
    return data_[static_cast<size_t>(i) * (bw_ + 1) + (i - j)];
  }
  double at(int i, int j) const {
    return data_[static_cast<size_t>(i) * (bw_ + 1) + (i - j)];
  }

  // In-place Cholesky with a pivot floor; returns false on non-finite input.
  bool factor(double pivot_floor) {
    for (int i = 0; i < m_; ++i) {
      const int j0 = std::max(0, i - bw_);
      for (int j = j0; j <= i; ++j) {
        double s = at(i, j);
        const int k0 = std::max(j0, j - bw_);
        for (int k = k0; k < j; ++k) s -= at(i, k) * at(j, k);
        if (j < i) {
          at(i, j) = s / at(j, j);
        } else {
          if (!std::isfinite(s)) return false;
          at(i, i) = std::sqrt(std::max(s, pivot_floor));
        }
      }
    }
    return true;
  }

  // Solves L L' x = r in place (after factor()).
  void solve(std::vector<double>& r) const {
    for (int i = 0; i < m_; ++i) {
      double s = r[static_cast<size_t>(i)];
      const int k0 = std::max(0, i - bw_);
      for (int k = k0; k < i; ++k) s -= at(i, k) * r[static_cast<size_t>(k)];
      r[static_cast<size_t>(i)] = s / at(i, i);
    }
    for (int i = m_ - 1; i >= 0; --i) {
      double s = r[static_cast<size_t>(i)];
      const int kmax = std::min(m_ - 1, i + bw_);
      for (int k = i + 1; k <= kmax; ++k)
        s -= at(k, i) * r[static_cast<size_t>(k)];
      r[static_cast<size_t>(i)] = s / at(i, i);
    }
  }

 private:
  int m_ = 0;
  int bw_ = 0;
  std::vector<double> data_;
};

// Banded normal-equation operator M = A W A' + reg I.
class NormalSolver {
 public:
  NormalSolver(const LpProblem& p, int bw) : p_(p), bw_(bw) {}

  bool factor(const std::vector<double>& w, double reg) {
    S_.reset(p_.m, bw_);
    for (int i = 0; i < p_.m; ++i) S_.at(i, i) = reg;
    for (int j = 0; j < p_.n; ++j) {
      const double wj = w[static_cast<size_t>(j)];
      if (wj == 0.0) continue;
      const auto& col = p_.cols[static_cast<size_t>(j)];
      for (size_t a = 0; a < col.size(); ++a)
        for (size_t b = 0; b <= a; ++b) {
          const int r1 = std::max(col[a].first, col[b].first);
          const int r2 = std::min(col[a].first, col[b].first);
          S_.at(r1, r2) += wj * col[a].second * col[b].second;
        }
    }
    return S_.factor(reg * 1e-4 + 1e-300);
  }

  void solve(std::vector<double>& r) const { S_.solve(r); }

  // out = (A W A') v, without the regularization term.
  void apply(const std::vector<double>& w, const std::vector<double>& v,
             std::vector<double>& out) const {
    out.assign(static_cast<size_t>(p_.m), 0.0);
    for (int j = 0; j < p_.n; ++j) {
      const double wj = w[static_cast<size_t>(j)];
      if (wj == 0.0) continue;
      const auto& col = p_.cols[static_cast<size_t>(j)];
      double dot = 0.0;
      for (auto& [r, val] : col) dot += val * v[static_cast<size_t>(r)];
      dot *= wj;
      for (auto& [r, val] : col) out[static_cast<size_t>(r)] += val * dot;
    }
  }

 private:
  const LpProblem& p_;
  int bw_;
  BandMatrix S_;
};

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace lpdetail

// Mehrotra predictor-corrector interior-point method with an active-set
// polish step that recovers vertex-exact solutions when the support guess
// verifies.
inline LpSolution solve_lp(const LpProblem& prob, const LpOptions& opt = {}) {
  using namespace lpdetail;
  const int m = prob.m, n = prob.n;
  if (m == 0 || n == 0) throw SolverError("lp: empty problem");
  for (int j = 0; j < n; ++j)
    if (prob.cols[static_cast<size_t>(j)].empty())
      throw SolverError("lp: column " + std::to_string(j) +
                        " has no constraint entries");

  // Ruiz equilibration (a few sweeps of row/column sup-norm scaling).
  std::vector<double> cs(static_cast<size_t>(n), 1.0);
  LpProblem p = prob;
  for (int sweep = 0; sweep < 4; ++sweep) {
    std::vector<double> rmax(static_cast<size_t>(m), 0.0);
    for (int j = 0; j < n; ++j)
      for (auto& [r, v] : p.cols[static_cast<size_t>(j)])
        rmax[static_cast<size_t>(r)] =
            std::max(rmax[static_cast<size_t>(r)], std::fabs(v));
    for (int i = 0; i < m; ++i) {
      const double s = rmax[static_cast<size_t>(i)] > 0.0
                           ? 1.0 / std::sqrt(rmax[static_cast<size_t>(i)])
                           : 1.0;
      p.b[static_cast<size_t>(i)] *= s;
      rmax[static_cast<size_t>(i)] = s;
    }
    for (int j = 0; j < n; ++j) {
      double cmax = 0.0;
      for (auto& [r, v] : p.cols[static_cast<size_t>(j)]) {
        v *= rmax[static_cast<size_t>(r)];
        cmax = std::max(cmax, std::fabs(v));
      }
      const double s = cmax > 0.0 ? 1.0 / std::sqrt(cmax) : 1.0;
      cs[static_cast<size_t>(j)] *= s;
      for (auto& [r, v] : p.cols[static_cast<size_t>(j)]) v *= s;
      p.c[static_cast<size_t>(j)] *= s;
    }
  }

  int bw = 0;
  for (int j = 0; j < n; ++j) {
    const auto& col = p.cols[static_cast<size_t>(j)];
    int lo = m, hi = 0;
    for (auto& [r, v] : col) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (!col.empty()) bw = std::max(bw, hi - lo);
  }
  if (static_cast<double>(m) * (bw + 1) > 8e8)
    throw SolverError("lp: normal-equation band too large (m=" +
                      std::to_string(m) + ", bw=" + std::to_string(bw) + ")");

  NormalSolver ns(p, bw);
  auto matvec_T = [&](const std::vector<double>& y, std::vector<double>& out) {
    out.assign(static_cast<size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (auto& [r, v] : p.cols[static_cast<size_t>(j)])
        s += v * y[static_cast<size_t>(r)];
      out[static_cast<size_t>(j)] = s;
    }
  };
  auto matvec = [&](const std::vector<double>& x, std::vector<double>& out) {
    out.assign(static_cast<size_t>(m), 0.0);
    for (int j = 0; j < n; ++j)
      for (auto& [r, v] : p.cols[static_cast<size_t>(j)])
        out[static_cast<size_t>(r)] += v * x[static_cast<size_t>(j)];
  };

  // Solve M u = rhs with iterative refinement against the unregularized M.
  std::vector<double> wscale(static_cast<size_t>(n), 1.0);
  auto normal_solve = [&](const std::vector<double>& rhs) {
    std::vector<double> u = rhs;
    ns.solve(u);
    std::vector<double> resid;
    for (int pass = 0; pass < opt.refine_passes; ++pass) {
      ns.apply(wscale, u, resid);
      for (int i = 0; i < m; ++i)
        resid[static_cast<size_t>(i)] =
            rhs[static_cast<size_t>(i)] - resid[static_cast<size_t>(i)];
      ns.solve(resid);
      for (int i = 0; i < m; ++i)
        u[static_cast<size_t>(i)] += resid[static_cast<size_t>(i)];
    }
    return u;
  };

  // Mehrotra starting point.
  std::vector<double> x, y, z;
  {
    double reg = opt.regularization;
    while (!ns.factor(wscale, reg)) {
      reg *= 100.0;
      if (reg > 1.0) throw SolverError("lp: cannot factor normal equations");
    }
    std::vector<double> v = normal_solve(p.b);
    matvec_T(v, x);  // x = A' (AA')^-1 b
    std::vector<double> ac;
    matvec(p.c, ac);
    y = normal_solve(ac);
    matvec_T(y, z);
    for (int j = 0; j < n; ++j)
      z[static_cast<size_t>(j)] =
          p.c[static_cast<size_t>(j)] - z[static_cast<size_t>(j)];
    double xmin = kInf, zmin = kInf;
    for (double xv : x) xmin = std::min(xmin, xv);
    for (double zv : z) zmin = std::min(zmin, zv);
    double dx = std::max(0.0, -1.5 * xmin), dz = std::max(0.0, -1.5 * zmin);
    double sx = 0.0, sz = 0.0, dot = 0.0;
    for (int j = 0; j < n; ++j) {
      sx += x[static_cast<size_t>(j)] + dx;
      sz += z[static_cast<size_t>(j)] + dz;
      dot += (x[static_cast<size_t>(j)] + dx) * (z[static_cast<size_t>(j)] + dz);
    }
    const double dx2 = dx + (sz > 1e-12 ? 0.5 * dot / sz : 1.0);
    const double dz2 = dz + (sx > 1e-12 ? 0.5 * dot / sx : 1.0);
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      x[static_cast<size_t>(j)] += dx2;
      z[static_cast<size_t>(j)] += dz2;
      if (!(x[static_cast<size_t>(j)] > 0.0) || !(z[static_cast<size_t>(j)] > 0.0) ||
          !std::isfinite(x[static_cast<size_t>(j)]) ||
          !std::isfinite(z[static_cast<size_t>(j)]))
        ok = false;
    }
    if (!ok) {
      x.assign(static_cast<size_t>(n), 1.0);
      z.assign(static_cast<size_t>(n), 1.0);
      y.assign(static_cast<size_t>(m), 0.0);
    }
  }

  const double bnorm = 1.0 + inf_norm(p.b);
  const double cnorm = 1.0 + inf_norm(p.c);
  LpSolution sol;

  auto residuals = [&](const std::vector<double>& xv, const std::vector<double>& yv,
                       const std::vector<double>& zv, double& pinf, double& dinf,
                       double& relgap, double& mu) {
    std::vector<double> axv, atyv;
    matvec(xv, axv);
    double pmax = 0.0;
    for (int i = 0; i < m; ++i)
      pmax = std::max(pmax, std::fabs(p.b[static_cast<size_t>(i)] -
                                      axv[static_cast<size_t>(i)]));
    matvec_T(yv, atyv);
    double dmax = 0.0, gap = 0.0, cobj = 0.0, bobj = 0.0;
    for (int j = 0; j < n; ++j) {
      dmax = std::max(dmax, std::fabs(p.c[static_cast<size_t>(j)] -
                                      atyv[static_cast<size_t>(j)] -
                                      zv[static_cast<size_t>(j)]));
      gap += xv[static_cast<size_t>(j)] * zv[static_cast<size_t>(j)];
      cobj += p.c[static_cast<size_t>(j)] * xv[static_cast<size_t>(j)];
    }
    for (int i = 0; i < m; ++i)
      bobj += p.b[static_cast<size_t>(i)] * yv[static_cast<size_t>(i)];
    pinf = pmax / bnorm;
    dinf = dmax / cnorm;
    relgap = std::fabs(cobj - bobj) / (1.0 + std::fabs(cobj));
    mu = gap / n;
  };

  std::vector<double> rp(static_cast<size_t>(m)), rd(static_cast<size_t>(n));
  std::vector<double> ax, aty;
  std::vector<double> best_x = x, best_y = y, best_z = z;
  double best_merit = kInf;
  int stall = 0;

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    matvec(x, ax);
    for (int i = 0; i < m; ++i)
      rp[static_cast<size_t>(i)] =
          p.b[static_cast<size_t>(i)] - ax[static_cast<size_t>(i)];
    matvec_T(y, aty);
    for (int j = 0; j < n; ++j)
      rd[static_cast<size_t>(j)] = p.c[static_cast<size_t>(j)] -
                                   aty[static_cast<size_t>(j)] -
                                   z[static_cast<size_t>(j)];
    double gap = 0.0, cobj = 0.0, bobj = 0.0;
    for (int j = 0; j < n; ++j) {
      gap += x[static_cast<size_t>(j)] * z[static_cast<size_t>(j)];
      cobj += p.c[static_cast<size_t>(j)] * x[static_cast<size_t>(j)];
    }
    for (int i = 0; i < m; ++i)
      bobj += p.b[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    const double mu = gap / n;
    sol.primal_inf = inf_norm(rp) / bnorm;
    sol.dual_inf = inf_norm(rd) / cnorm;
    sol.rel_gap = std::fabs(cobj - bobj) / (1.0 + std::fabs(cobj));
    sol.iterations = iter;
#ifdef POWERMOD_LP_TRACE
    std::fprintf(stderr, "it %d mu=%.3e pinf=%.3e dinf=%.3e gap=%.3e\n", iter,
                 mu, sol.primal_inf, sol.dual_inf, sol.rel_gap);
#endif
    const double merit = std::max({sol.primal_inf, sol.dual_inf, sol.rel_gap});
    if (merit < best_merit * 0.9999) {
      best_merit = merit;
      best_x = x;
      best_y = y;
      best_z = z;
      stall = 0;
    } else if (++stall > 12) {
      break;  // no further progress; fall back to the best iterate
    }
    if (sol.primal_inf <= opt.tol && sol.dual_inf <= opt.tol &&
        sol.rel_gap <= opt.tol) {
      sol.status = LpStatus::Optimal;
      break;
    }

    for (int j = 0; j < n; ++j)
      wscale[static_cast<size_t>(j)] = std::clamp(
          x[static_cast<size_t>(j)] / std::max(z[static_cast<size_t>(j)], 1e-300),
          1e-14, 1e14);
    double reg = opt.regularization * (1.0 + mu);
    bool factored = false;
    for (int attempt = 0; attempt < 8 && !factored; ++attempt) {
      factored = ns.factor(wscale, reg);
      if (!factored) reg *= 100.0;
    }
    if (!factored) break;

    // Affine scaling (predictor) direction.
    std::vector<double> rhs(static_cast<size_t>(m));
    {
      std::vector<double> tmp(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j)
        tmp[static_cast<size_t>(j)] =
            x[static_cast<size_t>(j)] +
            wscale[static_cast<size_t>(j)] * rd[static_cast<size_t>(j)];
      std::vector<double> atmp;
      matvec(tmp, atmp);
      for (int i = 0; i < m; ++i)
        rhs[static_cast<size_t>(i)] =
            rp[static_cast<size_t>(i)] + atmp[static_cast<size_t>(i)];
    }
    std::vector<double> dy_aff = normal_solve(rhs);
    std::vector<double> dz_aff, dx_aff(static_cast<size_t>(n));
    matvec_T(dy_aff, dz_aff);
    for (int j = 0; j < n; ++j) {
      dz_aff[static_cast<size_t>(j)] =
          rd[static_cast<size_t>(j)] - dz_aff[static_cast<size_t>(j)];
      dx_aff[static_cast<size_t>(j)] =
          (-x[static_cast<size_t>(j)] * z[static_cast<size_t>(j)] -
           x[static_cast<size_t>(j)] * dz_aff[static_cast<size_t>(j)]) /
          std::max(z[static_cast<size_t>(j)], 1e-300);
    }
    auto max_step = [&](const std::vector<double>& v,
                        const std::vector<double>& dv) {
      double a = 1.0;
      for (size_t j = 0; j < v.size(); ++j)
        if (dv[j] < 0.0) a = std::min(a, -v[j] / dv[j]);
      return a;
    };
    const double ap_aff = max_step(x, dx_aff);
    const double ad_aff = max_step(z, dz_aff);
    double mu_aff = 0.0;
    for (int j = 0; j < n; ++j)
      mu_aff +=
          (x[static_cast<size_t>(j)] + ap_aff * dx_aff[static_cast<size_t>(j)]) *
          (z[static_cast<size_t>(j)] + ad_aff * dz_aff[static_cast<size_t>(j)]);
    mu_aff /= n;
    double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3.0) : 0.0;
    sigma = std::clamp(sigma, opt.sigma_min, 1.0);

    // Corrector direction.
    {
      std::vector<double> tmp(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j) {
        const double rc =
            sigma * mu - x[static_cast<size_t>(j)] * z[static_cast<size_t>(j)] -
            dx_aff[static_cast<size_t>(j)] * dz_aff[static_cast<size_t>(j)];
        tmp[static_cast<size_t>(j)] =
            (x[static_cast<size_t>(j)] * rd[static_cast<size_t>(j)] - rc) /
            std::max(z[static_cast<size_t>(j)], 1e-300);
      }
      std::vector<double> atmp;
      matvec(tmp, atmp);
      for (int i = 0; i < m; ++i)
        rhs[static_cast<size_t>(i)] =
            rp[static_cast<size_t>(i)] + atmp[static_cast<size_t>(i)];
    }
    std::vector<double> dy = normal_solve(rhs);
    std::vector<double> dz, dx(static_cast<size_t>(n));
    matvec_T(dy, dz);
    for (int j = 0; j < n; ++j) {
      dz[static_cast<size_t>(j)] =
          rd[static_cast<size_t>(j)] - dz[static_cast<size_t>(j)];
      const double rc =
          sigma * mu - x[static_cast<size_t>(j)] * z[static_cast<size_t>(j)] -
          dx_aff[static_cast<size_t>(j)] * dz_aff[static_cast<size_t>(j)];
      dx[static_cast<size_t>(j)] =
          (rc - x[static_cast<size_t>(j)] * dz[static_cast<size_t>(j)]) /
          std::max(z[static_cast<size_t>(j)], 1e-300);
    }
    const double eta = 0.9995;
    double ap = std::min(1.0, eta * max_step(x, dx));
    double ad = std::min(1.0, eta * max_step(z, dz));

    // Shrink the step until the residual merit does not blow up; protects
    // against inaccurate late-stage directions.
    std::vector<double> xt(static_cast<size_t>(n)), zt(static_cast<size_t>(n)),
        yt(static_cast<size_t>(m));
    bool accepted = false;
    for (int shrink = 0; shrink < 16; ++shrink) {
      for (int j = 0; j < n; ++j) {
        xt[static_cast<size_t>(j)] = std::max(
            x[static_cast<size_t>(j)] + ap * dx[static_cast<size_t>(j)], 1e-300);
        zt[static_cast<size_t>(j)] = std::max(
            z[static_cast<size_t>(j)] + ad * dz[static_cast<size_t>(j)], 1e-300);
      }
      for (int i = 0; i < m; ++i)
        yt[static_cast<size_t>(i)] =
            y[static_cast<size_t>(i)] + ad * dy[static_cast<size_t>(i)];
      double tp, td, tg, tmu;
      residuals(xt, yt, zt, tp, td, tg, tmu);
      if (std::max({tp, td, tg}) <= opt.step_guard * std::max(merit, opt.tol) &&
          std::isfinite(tmu)) {
        accepted = true;
        break;
      }
      ap *= 0.5;
      ad *= 0.5;
    }
    if (!accepted) break;
    x.swap(xt);
    z.swap(zt);
    y.swap(yt);
    if (iter + 1 == opt.max_iter) sol.status = LpStatus::IterationLimit;
  }

  // Keep the best iterate seen.
  {
    double tp, td, tg, tmu;
    residuals(best_x, best_y, best_z, tp, td, tg, tmu);
    double cp, cd, cg, cmu;
    residuals(x, y, z, cp, cd, cg, cmu);
    if (std::max({tp, td, tg}) < std::max({cp, cd, cg})) {
      x = best_x;
      y = best_y;
      z = best_z;
      cp = tp;
      cd = td;
      cg = tg;
    }
    sol.primal_inf = cp;
    sol.dual_inf = cd;
    sol.rel_gap = cg;
    sol.status = (cp <= opt.tol && cd <= opt.tol && cg <= opt.tol)
                     ? LpStatus::Optimal
                     : LpStatus::IterationLimit;
  }

  // Active-set polish: guess the support from the iterate, solve the
  // equality-constrained system with the same banded machinery, keep the
  // vertex-exact point if it verifies.
  {
    std::vector<double> wpol(static_cast<size_t>(n), 0.0);
    for (int j = 0; j < n; ++j)
      if (x[static_cast<size_t>(j)] > z[static_cast<size_t>(j)])
        wpol[static_cast<size_t>(j)] = 1.0;
    if (ns.factor(wpol, 1e-12)) {
      auto masked_solve = [&](const std::vector<double>& rhs) {
        std::vector<double> u = rhs, resid;
        ns.solve(u);
        for (int pass = 0; pass < 2; ++pass) {
          ns.apply(wpol, u, resid);
          for (int i = 0; i < m; ++i)
            resid[static_cast<size_t>(i)] =
                rhs[static_cast<size_t>(i)] - resid[static_cast<size_t>(i)];
          ns.solve(resid);
          for (int i = 0; i < m; ++i)
            u[static_cast<size_t>(i)] += resid[static_cast<size_t>(i)];
        }
        return u;
      };
      std::vector<double> v = masked_solve(p.b);
      std::vector<double> xp;
      matvec_T(v, xp);
      for (int j = 0; j < n; ++j)
        xp[static_cast<size_t>(j)] = wpol[static_cast<size_t>(j)] > 0.0
                                         ? std::max(xp[static_cast<size_t>(j)], 0.0)
                                         : 0.0;
      std::vector<double> cb(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j)
        cb[static_cast<size_t>(j)] =
            wpol[static_cast<size_t>(j)] * p.c[static_cast<size_t>(j)];
      std::vector<double> acb;
      matvec(cb, acb);
      std::vector<double> yp = masked_solve(acb);
      std::vector<double> zp;
      matvec_T(yp, zp);
      bool dual_ok = true;
      for (int j = 0; j < n; ++j) {
        zp[static_cast<size_t>(j)] =
            p.c[static_cast<size_t>(j)] - zp[static_cast<size_t>(j)];
        if (zp[static_cast<size_t>(j)] < -1e-9) dual_ok = false;
      }
      double pp, pd, pg, pmu;
      residuals(xp, yp, zp, pp, pd, pg, pmu);
      if (dual_ok && pp <= std::max(sol.primal_inf, 1e-11) &&
          pg <= std::max(sol.rel_gap, 1e-12)) {
        x = xp;
        sol.primal_inf = pp;
        sol.dual_inf = pd;
        sol.rel_gap = pg;
        if (pp <= opt.tol && pg <= opt.tol) sol.status = LpStatus::Optimal;
      }
    }
  }

  // Unscale.
  sol.x.assign(static_cast<size_t>(n), 0.0);
  double obj = 0.0;
  for (int j = 0; j < n; ++j) {
    sol.x[static_cast<size_t>(j)] =
        x[static_cast<size_t>(j)] * cs[static_cast<size_t>(j)];
    obj += prob.c[static_cast<size_t>(j)] * sol.x[static_cast<size_t>(j)];
  }
  sol.objective = obj;
  return sol;
}

}  // namespace powermod
