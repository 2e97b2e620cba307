#pragma once

#include <unordered_map>

#include "powermod/lp.hpp"
#include "powermod/plan.hpp"

namespace powermod {

struct OffConfig {
  bool allow_drop = true;
  bool allow_delay = true;
  double tol = 1e-8;  // relative objective gap passed to the LP solver
};

struct OffResult {
  Plan plan;
  CostBreakdown cost;
  LpStatus lp_status = LpStatus::Optimal;
  int lp_iterations = 0;
  double lp_rel_gap = 0.0;
  std::vector<std::string> warnings;
};

namespace offdetail {

// One receding-horizon sub-problem: OFF restricted to a window of W slots,
// with residual demand entering from before the window and a running-peak
// floor on the peak variable. solve_off uses it with the whole horizon.
struct WindowSpec {
  std::vector<double> demand;  // per window slot
  std::vector<double> alpha;   // per window slot
  double slot_hours = 1.0 / 6;
  double beta = 0.0;
  ModulationModel model;
  bool allow_drop = true;
  bool allow_delay = true;
  double y_floor = 0.0;
  // initial_residual[a] = demand that entered the window already delayed by a
  // slots (a in [1, tau]); it must be admitted by window slot tau - a.
  std::vector<double> initial_residual;
  // Extra marginal peak rate charged on the part of the window peak above
  // spike_anchor (receding-horizon control uses this to price one-off peaks
  // beyond anything the predictor foresees at the full cycle rate).
  double beta_spike = 0.0;
  double spike_anchor = kInf;
};

// Window-relative controls, same (slot, age) layout as Plan.
struct WindowRaw {
  size_t W = 0;
  int tau = 0;
  std::vector<double> admit;      // W x (tau+1)
  std::vector<double> drop_fresh; // W
  double admit_at(size_t w, int age) const {
    return admit[w * static_cast<size_t>(tau + 1) + static_cast<size_t>(age)];
  }
};

struct WindowSolution {
  WindowRaw raw;
  LpSolution lp;
  double objective = 0.0;  // includes beta * y_floor
};

inline WindowSolution solve_window(const WindowSpec& ws, double tol) {
  const size_t W = ws.demand.size();
  const int tau = ws.allow_delay ? ws.model.tau : 0;
  const double dh = ws.slot_hours;
  if (W == 0) throw ValidationError("off: empty window");
  if (!ws.allow_delay)
    for (double r : ws.initial_residual)
      if (r > 0.0)
        throw ValidationError("off: residual carry requires the delay knob");

  // Origins: o in [-tau, W-1]; o < 0 denotes initial residual of age -o at
  // window start. Active slots for origin o: [max(o,0), min(o+tau, W-1)].
  const long o_lo = -static_cast<long>(std::min<size_t>(
      ws.initial_residual.empty() ? 0 : ws.initial_residual.size() - 1,
      static_cast<size_t>(tau)));
  auto origin_mass = [&](long o) {
    return o >= 0 ? ws.demand[static_cast<size_t>(o)]
                  : ws.initial_residual[static_cast<size_t>(-o)];
  };
  auto active = [&](long o) {
    if (o < 0 && origin_mass(o) <= 0.0) return false;
    return true;
  };
  auto slot_begin = [&](long o) { return static_cast<size_t>(std::max<long>(o, 0)); };
  auto slot_end = [&](long o) {
    return static_cast<size_t>(
        std::min<long>(o + tau, static_cast<long>(W) - 1));
  };

  LpProblem lp;
  // Rows in time order: per slot, the balance row of every active origin,
  // then the peak and running-max chain rows. The peak charge is modelled as
  // a chain y_w >= max(y_{w-1}, a_w^+) with beta paid on the final link, so
  // every column stays local and the normal equations stay banded.
  std::unordered_map<long, std::vector<int>> balance_rows;
  std::vector<int> peak_rows(W), chain_rows(W, -1);
  int floor_row = -1;
  for (long o = o_lo; o < static_cast<long>(W); ++o)
    if (active(o))
      balance_rows[o].assign(slot_end(o) - slot_begin(o) + 1, -1);
  for (size_t w = 0; w < W; ++w) {
    for (long o = static_cast<long>(w) - tau; o <= static_cast<long>(w); ++o) {
      if (o < o_lo || !active(o)) continue;
      if (w < slot_begin(o) || w > slot_end(o)) continue;
      const double rhs = (w == slot_begin(o)) ? origin_mass(o) : 0.0;
      balance_rows[o][w - slot_begin(o)] = lp.add_row(rhs);
    }
    peak_rows[w] = lp.add_row(0.0);
    if (w >= 1) chain_rows[w] = lp.add_row(0.0);
  }
  floor_row = lp.add_row(ws.y_floor);

  std::vector<int> y_vars(W);
  for (size_t w = 0; w < W; ++w) {
    y_vars[w] = lp.add_col(w + 1 == W ? ws.beta : 0.0);
    const int s = lp.add_col(0.0);
    lp.add_entry(s, peak_rows[w], 1.0);
    lp.add_entry(y_vars[w], peak_rows[w], -1.0);
    if (w >= 1) {
      const int g = lp.add_col(0.0);
      lp.add_entry(y_vars[w], chain_rows[w], 1.0);
      lp.add_entry(y_vars[w - 1], chain_rows[w], -1.0);
      lp.add_entry(g, chain_rows[w], -1.0);
    }
  }
  {
    const int gf = lp.add_col(0.0);
    lp.add_entry(y_vars[W - 1], floor_row, 1.0);
    lp.add_entry(gf, floor_row, -1.0);
  }
  if (ws.beta_spike > 0.0 && std::isfinite(ws.spike_anchor)) {
    // y_last - e <= anchor with e >= 0 charged at the spike rate
    const int spike_row = lp.add_row(std::max(ws.spike_anchor, 0.0));
    const int e = lp.add_col(ws.beta_spike);
    const int se = lp.add_col(0.0);
    lp.add_entry(y_vars[W - 1], spike_row, 1.0);
    lp.add_entry(e, spike_row, -1.0);
    lp.add_entry(se, spike_row, 1.0);
  }

  struct OriginVars {
    size_t begin = 0;
    int admit0 = -1;  // first admit var; admit(w) = admit0 + (w - begin)
    int r0 = -1;      // first residual var; r(w) = r0 + (w - begin - 1)
    int drop = -1;
  };
  std::unordered_map<long, OriginVars> vars;
  for (long o = o_lo; o < static_cast<long>(W); ++o) {
    if (!active(o)) continue;
    const size_t sb = slot_begin(o), se = slot_end(o);
    OriginVars ov;
    ov.begin = sb;
    for (size_t w = sb; w <= se; ++w) {
      const int age = static_cast<int>(static_cast<long>(w) - o);
      const double cost = (ws.alpha[w] + ws.model.delay_weight(age)) * dh;
      const int v = lp.add_col(cost);
      if (w == sb) ov.admit0 = v;
      lp.add_entry(v, balance_rows[o][w - sb], 1.0);
      lp.add_entry(v, peak_rows[w], 1.0);
    }
    for (size_t w = sb + 1; w <= se; ++w) {
      const int v = lp.add_col(0.0);
      if (w == sb + 1) ov.r0 = v;
      lp.add_entry(v, balance_rows[o][w - 1 - sb], 1.0);   // carried out of w-1
      lp.add_entry(v, balance_rows[o][w - sb], -1.0);      // enters slot w
    }
    if (o >= 0 && ws.allow_drop) {
      ov.drop = lp.add_col(ws.model.k_drop * dh);
      lp.add_entry(ov.drop, balance_rows[o][0], 1.0);
    }
    vars[o] = ov;
  }

  LpOptions opt;
  opt.tol = tol;
  LpSolution sol = solve_lp(lp, opt);
  // Heavily degenerate windows can stall with an excellent primal point and
  // a small residual duality gap; such points are still sound control
  // decisions, so only clearly broken solves are rejected.
  if (sol.status == LpStatus::Numerical || sol.primal_inf > 1e-4 ||
      sol.rel_gap > std::max(1e-3, 1e4 * tol))
    throw SolverError("off: LP solve failed (gap " + std::to_string(sol.rel_gap) +
                      ", primal " + std::to_string(sol.primal_inf) + ")");

  WindowSolution out;
  out.lp = sol;
  out.objective = sol.objective;  // y chain already carries the floor
  out.raw.W = W;
  out.raw.tau = ws.model.tau;
  out.raw.admit.assign(W * static_cast<size_t>(ws.model.tau + 1), 0.0);
  out.raw.drop_fresh.assign(W, 0.0);
  for (auto& [o, ov] : vars) {
    const size_t sb = slot_begin(o), se = slot_end(o);
    for (size_t w = sb; w <= se; ++w) {
      const int age = static_cast<int>(static_cast<long>(w) - o);
      out.raw.admit[w * static_cast<size_t>(ws.model.tau + 1) +
                    static_cast<size_t>(age)] =
          std::max(0.0, sol.x[static_cast<size_t>(ov.admit0 + (w - sb))]);
    }
    if (ov.drop >= 0)
      out.raw.drop_fresh[static_cast<size_t>(o)] =
          std::max(0.0, sol.x[static_cast<size_t>(ov.drop)]);
  }
  return out;
}

}  // namespace offdetail

// Reconstructs an exactly feasible plan from intended per-(origin, slot)
// admits and per-origin drops: walk each origin forward, clamp to what is
// still unserved, carry the remainder, and force-admit whatever is left at
// the deadline (or horizon end). Solver output only leaves rounding dust
// there; policy rollouts rely on the forcing for correctness.
inline Plan assemble_plan(const PowerTrace& trace, const ModulationModel& model,
                          const std::vector<double>& admit_ts,  // T x (tau+1)
                          const std::vector<double>& drop_fresh) {
  const size_t T = trace.size();
  const int tau = model.tau;
  Plan plan(T, tau);
  for (size_t i = 0; i < T; ++i) {
    double rem = trace.values[i];
    const size_t last = std::min(i + static_cast<size_t>(tau), T - 1);
    for (size_t t = i; t <= last && rem > 0.0; ++t) {
      const int age = static_cast<int>(t - i);
      if (age >= 1) plan.residual(t, age) = rem;
      double a = std::clamp(admit_ts[t * static_cast<size_t>(tau + 1) +
                                     static_cast<size_t>(age)],
                            0.0, rem);
      rem -= a;
      if (age == 0) {
        const double d = std::clamp(drop_fresh[i], 0.0, rem);
        plan.dropped(t, 0) = d;
        rem -= d;
      }
      if (t == last) {  // deadline / horizon: admit whatever is left
        a += rem;
        rem = 0.0;
      }
      plan.admitted(t, age) = a;
    }
  }
  plan.y_max = plan.realized_peak();
  return plan;
}

// Exact offline solver: the full program OFF as a linear program.
// Postponed-then-dropped variables are fixed to zero (an optimal solution
// without them always exists), which also keeps the LP smaller.
inline OffResult solve_off(const PowerTrace& trace, const Tariff& tariff,
                           const ModulationModel& model, const OffConfig& cfg = {}) {
  trace.validate();
  tariff.validate();
  model.validate();
  tariff.check_matches(trace.size());

  OffResult res;
  if (!cfg.allow_drop && !cfg.allow_delay) {
    res.plan = make_baseline_plan(trace, model.tau);
    res.cost = evaluate_cost(res.plan, trace, tariff, model);
    res.warnings.push_back("both knobs disabled; returning the baseline plan");
    return res;
  }
  if (cfg.allow_drop) {
    size_t inverted = 0;
    for (size_t t = 0; t < trace.size(); ++t)
      if (model.k_drop < tariff.alpha(t)) ++inverted;
    if (inverted > 0)
      res.warnings.push_back(
          "drop penalty is below the energy price in " + std::to_string(inverted) +
          " slot(s); dropping can dominate admission there");
  }

  offdetail::WindowSpec ws;
  ws.demand = trace.values;
  ws.alpha.resize(trace.size());
  for (size_t t = 0; t < trace.size(); ++t) ws.alpha[t] = tariff.alpha(t);
  ws.slot_hours = trace.slot_hours;
  ws.beta = tariff.peak_price;
  ws.model = model;
  ws.allow_drop = cfg.allow_drop;
  ws.allow_delay = cfg.allow_delay;

  offdetail::WindowSolution sol = offdetail::solve_window(ws, cfg.tol);
  res.plan = assemble_plan(trace, model, sol.raw.admit, sol.raw.drop_fresh);
  res.cost = evaluate_cost(res.plan, trace, tariff, model);
  res.lp_status = sol.lp.status;
  res.lp_iterations = sol.lp.iterations;
  res.lp_rel_gap = sol.lp.rel_gap;
  return res;
}

// ---------------------------------------------------------------------------
// Closed-form drop-only solver.
// ---------------------------------------------------------------------------

struct DropThreshold {
  double theta = kInf;  // +inf means never drop
  long n = 0;           // rank of the threshold among sorted demands
  bool never_drop = false;
  bool drop_all = false;  // rank exceeds the horizon: shedding beats any peak
};

// Rank of the optimal dropping threshold. With per-energy prices the slope
// comparison happens in per-slot dollars, so the denominator carries the
// slot length; the unnormalized variant matches formulations that fold the
// slot length into the prices.
inline long drop_rank(double beta, double alpha, double k_drop, double slot_hours,
                      bool delta_normalized = true) {
  if (!(k_drop > alpha))
    throw ValidationError(
        "drop threshold: requires k_drop > alpha (drop penalty must exceed the "
        "flat energy price)");
  if (beta <= 0.0) return 0;
  const double denom = (k_drop - alpha) * (delta_normalized ? slot_hours : 1.0);
  const double q = beta / denom;
  const double qr = std::round(q);
  if (std::fabs(q - qr) <= 1e-9 * std::max(1.0, std::fabs(q)))
    return static_cast<long>(qr);
  return static_cast<long>(std::ceil(q));
}

struct DropOnlyResult {
  DropThreshold threshold;
  Plan plan;
  CostBreakdown cost;
};

// Drop-only optimum in O(T log T): admit min(p_t, theta), drop the excess,
// where theta is the n-th largest demand. When the rank exceeds the horizon
// the peak charge outweighs serving any demand at all and the optimum sheds
// everything (theta = 0).
inline DropOnlyResult solve_drop_only(const PowerTrace& trace, double alpha_flat,
                                      double beta, double k_drop,
                                      bool delta_normalized = true) {
  trace.validate();
  const size_t T = trace.size();
  DropOnlyResult out;
  out.threshold.n = drop_rank(beta, alpha_flat, k_drop, trace.slot_hours,
                              delta_normalized);

  if (out.threshold.n <= 0) {
    out.threshold.theta = kInf;
    out.threshold.never_drop = true;
  } else if (static_cast<size_t>(out.threshold.n) > T) {
    out.threshold.theta = 0.0;
    out.threshold.drop_all = true;
  } else {
    std::vector<double> sorted = trace.values;
    std::nth_element(sorted.begin(),
                     sorted.begin() + (out.threshold.n - 1), sorted.end(),
                     std::greater<double>());
    out.threshold.theta = sorted[static_cast<size_t>(out.threshold.n - 1)];
  }

  out.plan = Plan(T, 0);
  const double theta = out.threshold.theta;
  for (size_t t = 0; t < T; ++t) {
    const double p = trace.values[t];
    const double a = std::min(p, theta);
    out.plan.admitted(t, 0) = a;
    out.plan.dropped(t, 0) = p - a;
  }
  out.plan.y_max = out.plan.realized_peak();
  ModulationModel m = ModulationModel::make(k_drop, 0.0, 2, 0);
  out.cost = evaluate_cost(out.plan, trace, Tariff::flat(alpha_flat, beta), m);
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle on a discretized control grid (micro-instances only).
// ---------------------------------------------------------------------------

struct OracleResult {
  Plan plan;
  CostBreakdown cost;
  double lipschitz_bound = 0.0;  // rounding gap vs. the continuous optimum
  double grid_step = 0.0;
};

// Dynamic program over (residual ages, running peak) with every quantity a
// multiple of the grid step, so the search is exhaustive over grid plans.
// Requires trace values on the grid. Guards refuse instances whose state
// space would blow up.
inline OracleResult oracle_bruteforce(const PowerTrace& trace, const Tariff& tariff,
                                      const ModulationModel& model, int grid_levels,
                                      bool allow_drop = true, bool allow_delay = true,
                                      double ops_budget = 2e9) {
  trace.validate();
  tariff.check_matches(trace.size());
  const size_t T = trace.size();
  const int tau = allow_delay ? model.tau : 0;
  if (T > 8 || tau > 2)
    throw SolverError("oracle: instance too large (requires T <= 8, tau <= 2)");
  if (grid_levels < 2) throw ValidationError("oracle: need at least 2 grid levels");

  const double vmax = trace.max_value();
  OracleResult out;
  if (vmax <= 0.0) {
    out.plan = Plan(T, model.tau);
    out.cost = evaluate_cost(out.plan, trace, tariff, model);
    return out;
  }
  const double s = vmax / (grid_levels - 1);
  out.grid_step = s;
  std::vector<long> units(T);
  for (size_t t = 0; t < T; ++t) {
    units[t] = std::lround(trace.values[t] / s);
    if (std::fabs(units[t] * s - trace.values[t]) > 1e-9 * std::max(1.0, vmax))
      throw ValidationError("oracle: trace values must lie on the control grid");
  }
  const long L = grid_levels;
  const long ymax_u = static_cast<long>(tau + 1) * (L - 1);
  double states = static_cast<double>(ymax_u + 1);
  for (int a = 0; a < tau; ++a) states *= L;
  const double controls =
      (allow_drop ? 0.5 * L * L : L) * (tau >= 2 ? L : 1.0);
  if (static_cast<double>(T) * states * controls > ops_budget)
    throw SolverError("oracle: state-control space exceeds the ops budget");

  struct Entry {
    double cost = kInf;
    uint64_t prev = 0;
    uint32_t ctrl = 0;
  };
  auto pack = [&](long y, long u1, long u2) {
    return (static_cast<uint64_t>(y) * L + static_cast<uint64_t>(u1)) * L +
           static_cast<uint64_t>(u2);
  };
  auto unpack = [&](uint64_t k, long& y, long& u1, long& u2) {
    u2 = static_cast<long>(k % L);
    k /= static_cast<uint64_t>(L);
    u1 = static_cast<long>(k % L);
    y = static_cast<long>(k / static_cast<uint64_t>(L));
  };

  const double dh = trace.slot_hours;
  std::vector<std::unordered_map<uint64_t, Entry>> dp(T + 1);
  dp[0][pack(0, 0, 0)] = Entry{0.0, 0, 0};

  for (size_t t = 0; t < T; ++t) {
    const double alpha = tariff.alpha(t);
    const bool last = (t + 1 == T);
    for (auto& [key, ent] : dp[t]) {
      long y, u1, u2;
      unpack(key, y, u1, u2);
      // u1 = residual of age 1, u2 = age 2 (deadline when tau == 2).
      const long due = (tau == 2) ? u2 : (tau == 1 ? u1 : 0);
      const long j1_hi = (tau == 2) ? u1 : 0;
      const long j1_lo = (tau == 2 && last) ? u1 : 0;  // horizon drain
      for (long j1 = j1_lo; j1 <= j1_hi; ++j1) {
        const long P = units[t];
        for (long ia = 0; ia <= P; ++ia) {
          const long dmax = allow_drop ? P - ia : 0;
          for (long id = 0; id <= dmax; ++id) {
            const long iw = P - ia - id;
            if (iw > 0 && (tau == 0 || last)) continue;
            if (iw < 0) continue;
            const long adm = ia + due + (tau == 2 ? j1 : 0);
            const long ny = std::max(y, adm);
            double c = ent.cost +
                       dh * s *
                           (alpha * static_cast<double>(adm) +
                            model.k_drop * static_cast<double>(id) +
                            model.delay_weight(tau) * static_cast<double>(due) *
                                (tau > 0 ? 1.0 : 0.0) +
                            (tau == 2 ? model.delay_weight(1) *
                                            static_cast<double>(j1)
                                      : 0.0));
            const long nu1 = iw;
            const long nu2 = (tau == 2) ? u1 - j1 : 0;
            const uint64_t nk = pack(ny, nu1, nu2);
            auto& slot = dp[t + 1][nk];
            if (c < slot.cost) {
              slot.cost = c;
              slot.prev = key;
              slot.ctrl = static_cast<uint32_t>(ia) |
                          (static_cast<uint32_t>(id) << 10) |
                          (static_cast<uint32_t>(j1) << 20);
            }
          }
        }
      }
    }
  }

  double best = kInf;
  uint64_t best_key = 0;
  for (auto& [key, ent] : dp[T]) {
    long y, u1, u2;
    unpack(key, y, u1, u2);
    const double c = ent.cost + tariff.peak_price * static_cast<double>(y) * s;
    if (c < best) {
      best = c;
      best_key = key;
    }
  }
  if (!std::isfinite(best)) throw SolverError("oracle: no feasible grid plan");

  // Backtrack into intended controls, then assemble the exact plan.
  std::vector<double> admit_ts(T * static_cast<size_t>(model.tau + 1), 0.0);
  std::vector<double> drop_fresh(T, 0.0);
  uint64_t key = best_key;
  for (size_t t = T; t-- > 0;) {
    const Entry& ent = dp[t + 1][key];
    const long ia = static_cast<long>(ent.ctrl & 0x3ff);
    const long id = static_cast<long>((ent.ctrl >> 10) & 0x3ff);
    const long j1 = static_cast<long>((ent.ctrl >> 20) & 0x3ff);
    long py, pu1, pu2;
    unpack(ent.prev, py, pu1, pu2);
    const long due = (tau == 2) ? pu2 : (tau == 1 ? pu1 : 0);
    admit_ts[t * static_cast<size_t>(model.tau + 1)] = ia * s;
    if (tau >= 1 && t >= 1) {
      const int due_age = tau;
      if (due > 0)
        admit_ts[t * static_cast<size_t>(model.tau + 1) +
                 static_cast<size_t>(due_age)] = due * s;
      if (tau == 2 && j1 > 0)
        admit_ts[t * static_cast<size_t>(model.tau + 1) + 1] = j1 * s;
    }
    drop_fresh[t] = id * s;
    key = ent.prev;
  }
  out.plan = assemble_plan(trace, model, admit_ts, drop_fresh);
  out.cost = evaluate_cost(out.plan, trace, tariff, model);

  const double unit_rate =
      tariff.peak_price +
      static_cast<double>(T) * dh *
          (tariff.max_alpha() + model.k_drop + model.delay_weight(tau));
  out.lipschitz_bound = (tau + 2) * s * unit_rate;
  return out;
}

}  // namespace powermod
