#pragma once

#include <random>

#include <json.hpp>

#include "powermod/plan.hpp"
#include "powermod/workloads.hpp"

namespace powermod {

// ---------------------------------------------------------------------------
// Discrete stochastic models for demand and price processes. One structure
// serves both: per-slot distributions over a finite support (independent
// across slots, possibly time-of-day varying) or a stationary first-order
// conditional table over a common level set.
// ---------------------------------------------------------------------------

struct DiscreteDist {
  std::vector<double> support;
  std::vector<double> prob;

  void validate() const {
    if (support.empty() || support.size() != prob.size())
      throw ValidationError("distribution: support/prob size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < prob.size(); ++i) {
      if (prob[i] < 0.0) throw ValidationError("distribution: negative probability");
      if (!std::isfinite(support[i]) || support[i] < 0.0)
        throw ValidationError("distribution: support must be finite and >= 0");
      s += prob[i];
    }
    if (std::fabs(s - 1.0) > 1e-9)
      throw ValidationError("distribution: probabilities sum to " + std::to_string(s));
  }
  double mean() const {
    double m = 0.0;
    for (size_t i = 0; i < support.size(); ++i) m += support[i] * prob[i];
    return m;
  }
  double max_support() const {
    return *std::max_element(support.begin(), support.end());
  }
};

struct DiscreteProcess {
  enum class Mode { StageIndependent, Markov };
  Mode mode = Mode::StageIndependent;
  size_t horizon = 0;

  // stage-independent: per-slot index into shared distributions
  std::vector<DiscreteDist> dists;
  std::vector<int> slot_dist;

  // markov: stationary conditional table over a common level set
  std::vector<double> levels;
  std::vector<std::vector<double>> transition;  // [from][to]
  std::vector<double> initial;

  void validate() const {
    if (horizon == 0) throw ValidationError("process: zero horizon");
    if (mode == Mode::StageIndependent) {
      if (dists.empty() || slot_dist.size() != horizon)
        throw ValidationError("process: per-slot distribution index missing");
      for (const auto& d : dists) d.validate();
      for (int ix : slot_dist)
        if (ix < 0 || static_cast<size_t>(ix) >= dists.size())
          throw ValidationError("process: bad distribution index");
    } else {
      if (levels.empty() || transition.size() != levels.size() ||
          initial.size() != levels.size())
        throw ValidationError("process: bad conditional table shape");
      auto check_row = [&](const std::vector<double>& row) {
        if (row.size() != levels.size())
          throw ValidationError("process: ragged conditional table");
        double s = 0.0;
        for (double p : row) {
          if (p < 0.0) throw ValidationError("process: negative probability");
          s += p;
        }
        if (std::fabs(s - 1.0) > 1e-9)
          throw ValidationError("process: conditional row sums to " + std::to_string(s));
      };
      for (const auto& row : transition) check_row(row);
      check_row(initial);
    }
  }

  const DiscreteDist& dist_at(size_t t) const {
    return dists[static_cast<size_t>(slot_dist[t])];
  }
  double max_support() const {
    double m = 0.0;
    if (mode == Mode::StageIndependent) {
      for (const auto& d : dists) m = std::max(m, d.max_support());
    } else {
      m = *std::max_element(levels.begin(), levels.end());
    }
    return m;
  }
  double mean_at(size_t t) const {
    if (mode == Mode::StageIndependent) return dist_at(t).mean();
    double m = 0.0;  // unconditional mean is not tracked for markov mode
    for (size_t i = 0; i < levels.size(); ++i) m += levels[i] * initial[i];
    return m;
  }

  // ---- builders -----------------------------------------------------------

  static DiscreteProcess point_mass(const std::vector<double>& values) {
    DiscreteProcess p;
    p.mode = Mode::StageIndependent;
    p.horizon = values.size();
    p.slot_dist.resize(values.size());
    for (size_t t = 0; t < values.size(); ++t) {
      DiscreteDist d;
      d.support = {values[t]};
      d.prob = {1.0};
      // dedupe equal consecutive values cheaply: exact-value reuse
      int found = -1;
      for (size_t k = 0; k < p.dists.size(); ++k)
        if (p.dists[k].support[0] == values[t]) {
          found = static_cast<int>(k);
          break;
        }
      if (found < 0) {
        p.dists.push_back(std::move(d));
        found = static_cast<int>(p.dists.size() - 1);
      }
      p.slot_dist[t] = found;
    }
    p.validate();
    return p;
  }

  static DiscreteProcess iid(DiscreteDist d, size_t T) {
    DiscreteProcess p;
    p.mode = Mode::StageIndependent;
    p.horizon = T;
    p.dists = {std::move(d)};
    p.slot_dist.assign(T, 0);
    p.validate();
    return p;
  }

  static DiscreteProcess markov(std::vector<double> levels,
                                std::vector<std::vector<double>> transition,
                                std::vector<double> initial, size_t T) {
    DiscreteProcess p;
    p.mode = Mode::Markov;
    p.horizon = T;
    p.levels = std::move(levels);
    p.transition = std::move(transition);
    p.initial = std::move(initial);
    p.validate();
    return p;
  }

  // Gaussian noise around a per-slot-of-day mean, discretized onto a uniform
  // grid by integrating the density over the cells (tails absorbed at the
  // ends). sigma == 0 snaps to the nearest grid point.
  static DiscreteProcess time_of_day(const std::vector<double>& profile,
                                     double sigma, double grid_max,
                                     int grid_levels, size_t T) {
    if (grid_levels < 2) throw ValidationError("time_of_day model: need >= 2 levels");
    const std::vector<double> grid = linspace(0.0, grid_max, grid_levels);
    DiscreteProcess p;
    p.mode = Mode::StageIndependent;
    p.horizon = T;
    p.slot_dist.resize(T);
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    for (size_t k = 0; k < profile.size(); ++k) {
      DiscreteDist d;
      d.support = grid;
      d.prob.assign(grid.size(), 0.0);
      if (sigma <= 0.0) {
        d.prob[nearest_index(grid, profile[k])] = 1.0;
      } else {
        for (size_t i = 0; i < grid.size(); ++i) {
          const double lo = i == 0 ? -kInf : 0.5 * (grid[i - 1] + grid[i]);
          const double hi =
              i + 1 == grid.size() ? kInf : 0.5 * (grid[i] + grid[i + 1]);
          const double plo = std::isinf(lo) ? 0.0 : cdf((lo - profile[k]) / sigma);
          const double phi = std::isinf(hi) ? 1.0 : cdf((hi - profile[k]) / sigma);
          d.prob[i] = std::max(phi - plo, 0.0);
        }
        double s = std::accumulate(d.prob.begin(), d.prob.end(), 0.0);
        for (auto& q : d.prob) q /= s;
      }
      p.dists.push_back(std::move(d));
    }
    for (size_t t = 0; t < T; ++t)
      p.slot_dist[t] = static_cast<int>(t % profile.size());
    p.validate();
    return p;
  }

  // Draws the slot-t value for a stage-independent process.
  double sample(std::mt19937_64& rng, size_t t, int* level_idx = nullptr) const {
    if (mode != Mode::StageIndependent)
      throw ValidationError("process: per-slot sampling needs mode stage_independent");
    const DiscreteDist& d = dist_at(t);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng), acc = 0.0;
    for (size_t i = 0; i < d.prob.size(); ++i) {
      acc += d.prob[i];
      if (x <= acc || i + 1 == d.prob.size()) {
        if (level_idx) *level_idx = static_cast<int>(i);
        return d.support[i];
      }
    }
    return d.support.back();
  }
};

using DemandModel = DiscreteProcess;
using PriceModel = DiscreteProcess;

inline PriceModel flat_price_model(double alpha, size_t T) {
  return DiscreteProcess::point_mass(std::vector<double>(T, alpha));
}

// ---- JSON serialization ----------------------------------------------------

inline nlohmann::json process_to_json(const DiscreteProcess& p) {
  nlohmann::json j;
  j["mode"] = p.mode == DiscreteProcess::Mode::StageIndependent
                  ? "stage_independent"
                  : "markov";
  j["T"] = p.horizon;
  if (p.mode == DiscreteProcess::Mode::StageIndependent) {
    j["dists"] = nlohmann::json::array();
    for (const auto& d : p.dists)
      j["dists"].push_back({{"support", d.support}, {"prob", d.prob}});
    j["slot_dist"] = p.slot_dist;
  } else {
    j["levels"] = p.levels;
    j["transition"] = p.transition;
    j["initial"] = p.initial;
  }
  return j;
}

inline DiscreteProcess process_from_json(const nlohmann::json& j) {
  DiscreteProcess p;
  const std::string mode = j.at("mode").get<std::string>();
  p.horizon = j.at("T").get<size_t>();
  if (mode == "stage_independent") {
    p.mode = DiscreteProcess::Mode::StageIndependent;
    for (const auto& dj : j.at("dists")) {
      DiscreteDist d;
      d.support = dj.at("support").get<std::vector<double>>();
      d.prob = dj.at("prob").get<std::vector<double>>();
      p.dists.push_back(std::move(d));
    }
    p.slot_dist = j.at("slot_dist").get<std::vector<int>>();
  } else if (mode == "markov") {
    p.mode = DiscreteProcess::Mode::Markov;
    p.levels = j.at("levels").get<std::vector<double>>();
    p.transition = j.at("transition").get<std::vector<std::vector<double>>>();
    p.initial = j.at("initial").get<std::vector<double>>();
  } else {
    throw ValidationError("process json: unknown mode '" + mode + "'");
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Policy tables. Value functions are stored per stage and state; controls
// are re-derived on demand by re-running the one-stage optimization against
// the stored values, so the same code drives induction, table queries, and
// rollouts.
// ---------------------------------------------------------------------------

struct GridSpec {
  int y_levels = 21;
  double y_max_kw = -1.0;  // auto: demand max (+ pool cap for the pooled state)
  int r_levels = 21;       // pooled-residual / per-age residual grid
  double r_max_kw = -1.0;  // auto: tau * demand max (pooled), demand max (full)
  int mu_points = 101;     // fraction grid for the dropping policy
  double state_budget = 1e6;
};

struct PolicyTable {
  enum class Kind : uint8_t { Full = 0, Lin = 1, Drop = 2 };
  Kind kind = Kind::Drop;
  size_t T = 0;
  double slot_hours = 1.0 / 6;
  double beta = 0.0;
  double k_drop = 0.0;
  double k_delay = 0.0;
  int delay_exponent = 2;
  int tau = 0;
  bool allow_drop = true;

  std::vector<double> y_grid;
  std::vector<double> r_grid;   // pooled residual (lin) or per-age grid (full)
  std::vector<double> mu_grid;  // drop variant

  DemandModel demand;
  PriceModel price;

  // drop: phi[t * Y + yi]
  std::vector<double> drop_phi;
  // values: stage-major; layout per kind (see index helpers below)
  std::vector<double> value;

  double value_at_start = 0.0;

  size_t Y() const { return y_grid.size(); }
  size_t R() const { return std::max<size_t>(r_grid.size(), 1); }
  // full variant: residual state = tau digits base R
  size_t full_states() const {
    size_t s = 1;
    for (int a = 0; a < tau; ++a) s *= R();
    return s;
  }
  size_t cond_p() const {
    return demand.mode == DiscreteProcess::Mode::Markov ? demand.levels.size() : 1;
  }
  size_t cond_a() const {
    return price.mode == DiscreteProcess::Mode::Markov ? price.levels.size() : 1;
  }

  size_t drop_value_index(size_t t, size_t yi) const { return t * Y() + yi; }
  size_t lin_value_index(size_t t, size_t yi, size_t ri) const {
    return (t * Y() + yi) * R() + ri;
  }
  size_t full_value_index(size_t t, size_t cp, size_t ca, size_t rstate,
                          size_t yi) const {
    return (((t * cond_p() + cp) * cond_a() + ca) * full_states() + rstate) * Y() +
           yi;
  }

  // Linear interpolation of a y-slice of the value table; clamps outside the
  // grid (out-of-grid peaks look no worse than the grid edge, which is the
  // coverage limitation surfaced by rollout warnings).
  double interp_y(const double* slice, size_t stride, double y) const {
    const auto& g = y_grid;
    if (y <= g.front()) return slice[0];
    if (y >= g.back()) return slice[(g.size() - 1) * stride];
    const size_t hi =
        static_cast<size_t>(std::upper_bound(g.begin(), g.end(), y) - g.begin());
    const size_t lo = hi - 1;
    const double w = (y - g[lo]) / (g[hi] - g[lo]);
    return (1.0 - w) * slice[lo * stride] + w * slice[hi * stride];
  }

  void save(const std::string& path) const;
  static PolicyTable load(const std::string& path);
};

namespace sdpdetail {

inline std::vector<double> auto_y_grid(const GridSpec& g, double cap) {
  const double hi = g.y_max_kw > 0.0 ? g.y_max_kw : cap;
  return linspace(0.0, std::max(hi, 1e-9), g.y_levels);
}
inline std::vector<double> auto_r_grid(const GridSpec& g, double cap) {
  const double hi = g.r_max_kw > 0.0 ? g.r_max_kw : cap;
  return linspace(0.0, std::max(hi, 1e-9), g.r_levels);
}

// Realized-stage weights: distribution of (p, alpha) at slot t for the
// stage-independent case.
struct StageDist {
  const std::vector<double>* p_sup;
  const std::vector<double>* p_prob;
  const std::vector<double>* a_sup;
  const std::vector<double>* a_prob;
};

inline StageDist stage_dist(const DemandModel& dm, const PriceModel& pm,
                            size_t t) {
  StageDist s;
  s.p_sup = &dm.dist_at(t).support;
  s.p_prob = &dm.dist_at(t).prob;
  s.a_sup = &pm.dist_at(t).support;
  s.a_prob = &pm.dist_at(t).prob;
  return s;
}

}  // namespace sdpdetail

// ---------------------------------------------------------------------------
// Dropping-only program over the running peak. The policy is the fraction
// of the incoming demand to admit, chosen per (slot, y) to minimize the
// expected stage cost plus cost-to-go, with the expectation over the demand
// taken inside the minimization; the chosen fraction is then applied to
// whatever demand realizes. Requires demands independent across slots.
// ---------------------------------------------------------------------------

inline PolicyTable solve_sdp_drop(const DemandModel& dm, const PriceModel& pm,
                                  double beta, double k_drop,
                                  const GridSpec& grids = {}) {
  dm.validate();
  pm.validate();
  if (dm.mode == DiscreteProcess::Mode::Markov ||
      pm.mode == DiscreteProcess::Mode::Markov)
    throw ValidationError(
        "sdp_drop: requires stage-independent demands (threshold policy "
        "structure does not cover conditional models)");
  if (dm.horizon != pm.horizon)
    throw ValidationError("sdp_drop: demand/price horizons differ");

  PolicyTable tbl;
  tbl.kind = PolicyTable::Kind::Drop;
  tbl.T = dm.horizon;
  tbl.beta = beta;
  tbl.k_drop = k_drop;
  tbl.tau = 0;
  tbl.demand = dm;
  tbl.price = pm;
  tbl.y_grid = sdpdetail::auto_y_grid(grids, dm.max_support());
  tbl.mu_grid = linspace(0.0, 1.0, grids.mu_points);
  const size_t Y = tbl.Y();
  tbl.value.assign((tbl.T + 1) * Y, 0.0);
  tbl.drop_phi.assign(tbl.T * Y, 0.0);
  const double dh = tbl.slot_hours;

  for (size_t yi = 0; yi < Y; ++yi)
    tbl.value[tbl.drop_value_index(tbl.T, yi)] = beta * tbl.y_grid[yi];

  for (size_t t = tbl.T; t-- > 0;) {
    const auto sd = sdpdetail::stage_dist(dm, pm, t);
    double alpha_mean = 0.0;
    for (size_t ai = 0; ai < sd.a_sup->size(); ++ai)
      alpha_mean += (*sd.a_sup)[ai] * (*sd.a_prob)[ai];
    const double* vnext = &tbl.value[tbl.drop_value_index(t + 1, 0)];
    for (size_t yi = 0; yi < Y; ++yi) {
      const double y = tbl.y_grid[yi];
      double best = kInf;
      double best_mu = 0.0;
      for (double mu : tbl.mu_grid) {
        double g = 0.0;
        for (size_t pi = 0; pi < sd.p_sup->size(); ++pi) {
          const double p = (*sd.p_sup)[pi];
          const double pr = (*sd.p_prob)[pi];
          if (pr == 0.0) continue;
          const double admitted = mu * p;
          g += pr * (dh * (alpha_mean * admitted + k_drop * (p - admitted)) +
                     tbl.interp_y(vnext, 1, std::max(y, admitted)));
        }
        if (g < best - 1e-15 * std::max(1.0, std::fabs(best))) {
          best = g;
          best_mu = mu;
        }
      }
      tbl.drop_phi[t * Y + yi] = best_mu;
      tbl.value[tbl.drop_value_index(t, yi)] = best;
    }
  }
  tbl.value_at_start = tbl.value[tbl.drop_value_index(0, 0)];
  return tbl;
}

// ---------------------------------------------------------------------------
// Pooled-residual program over (y, r): the delay penalty is charged once per
// unit admitted out of the pool, so residual age does not need tracking.
// Observe-then-act: stage controls are chosen after (p, alpha) realize.
// ---------------------------------------------------------------------------

struct LinStageControl {
  double cost = kInf;
  double admit_total = 0.0;  // A = fresh admit + pool admit
  double carry = 0.0;        // C = postponed fresh + pool not admitted
  double admit_pool = 0.0;   // portion of A drawn from the pool
  bool feasible = false;
};

// One-stage minimization for the pooled program at (y, r) with realized
// (p, alpha). Enumerates total admission A on the y-grid and carried pool C
// on the r-grid; for fixed (A, C) the dropped amount is pinned and the
// delay charge is minimized by drawing from the pool as little as possible.
inline LinStageControl lin_stage_best(const PolicyTable& tbl, size_t t, double y,
                                      double r, double p, double alpha) {
  const size_t Y = tbl.Y(), R = tbl.R();
  const double* vnext = &tbl.value[tbl.lin_value_index(t + 1, 0, 0)];
  const double dh = tbl.slot_hours;
  const bool last = (t + 1 == tbl.T);
  LinStageControl best;
  auto consider = [&](double A, double C, size_t ci, double dropped) {
    // admit out of the pool as little as the split constraints allow
    const double apool = std::max({0.0, A - p, r - C});
    if (apool > std::min(r, A) + 1e-9) return;
    double cost = dh * (alpha * A + tbl.k_drop * std::max(dropped, 0.0) +
                        tbl.k_delay * apool);
    cost += tbl.interp_y(vnext + ci, R, std::max(y, A));
    if (cost < best.cost) {
      best.cost = cost;
      best.admit_total = A;
      best.carry = C;
      best.admit_pool = apool;
      best.feasible = true;
    }
  };
  for (size_t ai = 0; ai < Y; ++ai) {
    const double A = tbl.y_grid[ai];
    if (A > p + r + 1e-9) break;
    if (tbl.allow_drop) {
      for (size_t ci = 0; ci < R; ++ci) {
        const double C = tbl.r_grid.empty() ? 0.0 : tbl.r_grid[ci];
        if (last && C > 0.0) break;  // horizon drain
        const double dropped = p + r - A - C;
        if (dropped < -1e-9) break;  // C too large; larger C only worse
        consider(A, C, ci, std::max(dropped, 0.0));
      }
    } else {
      // nothing may be dropped: the carry is pinned at p + r - A; the pool
      // state is tracked at the nearest grid point
      const double C = std::max(p + r - A, 0.0);
      if (last && C > 1e-9) continue;
      if (C > tbl.r_grid.back() + 1e-9) continue;  // cap: cannot carry that much
      consider(A, C, nearest_index(tbl.r_grid, C), 0.0);
    }
  }
  return best;
}

inline PolicyTable solve_sdp_lin(const DemandModel& dm, const PriceModel& pm,
                                 double beta, const ModulationModel& model,
                                 const GridSpec& grids = {},
                                 bool allow_drop = true) {
  dm.validate();
  pm.validate();
  if (dm.mode == DiscreteProcess::Mode::Markov ||
      pm.mode == DiscreteProcess::Mode::Markov)
    throw ValidationError("sdp_lin: requires stage-independent models");
  if (dm.horizon != pm.horizon)
    throw ValidationError("sdp_lin: demand/price horizons differ");

  PolicyTable tbl;
  tbl.kind = PolicyTable::Kind::Lin;
  tbl.T = dm.horizon;
  tbl.beta = beta;
  tbl.k_drop = model.k_drop;
  tbl.k_delay = model.k_delay;
  tbl.delay_exponent = model.delay_exponent;
  tbl.tau = model.tau;
  tbl.allow_drop = allow_drop;
  tbl.demand = dm;
  tbl.price = pm;
  const double pmax = dm.max_support();
  const double rcap = model.tau > 0 ? std::min<double>(model.tau, 2) * pmax : 0.0;
  tbl.r_grid = model.tau > 0 ? sdpdetail::auto_r_grid(grids, rcap)
                             : std::vector<double>{0.0};
  tbl.y_grid = sdpdetail::auto_y_grid(grids, pmax + tbl.r_grid.back());
  const size_t Y = tbl.Y(), R = tbl.R();
  if (static_cast<double>(Y) * R > grids.state_budget)
    throw SolverError("sdp_lin: state budget exceeded");
  tbl.value.assign((tbl.T + 1) * Y * R, 0.0);
  for (size_t yi = 0; yi < Y; ++yi)
    for (size_t ri = 0; ri < R; ++ri)
      tbl.value[tbl.lin_value_index(tbl.T, yi, ri)] = beta * tbl.y_grid[yi];

  for (size_t t = tbl.T; t-- > 0;) {
    const auto sd = sdpdetail::stage_dist(dm, pm, t);
    for (size_t yi = 0; yi < Y; ++yi) {
      for (size_t ri = 0; ri < R; ++ri) {
        double v = 0.0;
        for (size_t pi = 0; pi < sd.p_sup->size(); ++pi) {
          const double ppr = (*sd.p_prob)[pi];
          if (ppr == 0.0) continue;
          for (size_t aj = 0; aj < sd.a_sup->size(); ++aj) {
            const double apr = (*sd.a_prob)[aj];
            if (apr == 0.0) continue;
            const auto ctl =
                lin_stage_best(tbl, t, tbl.y_grid[yi], tbl.r_grid[ri],
                               (*sd.p_sup)[pi], (*sd.a_sup)[aj]);
            if (!ctl.feasible)
              throw SolverError("sdp_lin: no feasible stage control (grid caps "
                                "too tight for the horizon drain)");
            v += ppr * apr * ctl.cost;
          }
        }
        tbl.value[tbl.lin_value_index(t, yi, ri)] = v;
      }
    }
  }
  tbl.value_at_start = tbl.value[tbl.lin_value_index(0, 0, 0)];
  return tbl;
}

// ---------------------------------------------------------------------------
// Full program over (per-age residuals, y). Observe-then-act with controls
// enumerated on the residual grid, so stage constraints hold exactly on the
// grid. Supports stage-independent and first-order conditional models.
// ---------------------------------------------------------------------------

struct FullStageControl {
  double cost = kInf;
  double admit_fresh = 0.0;
  double postpone_fresh = 0.0;
  double drop_fresh = 0.0;
  std::vector<double> admit_age;  // indexed 1..tau
  bool feasible = false;
};

namespace sdpdetail {

// Decodes the residual state digits (oldest age = highest digit not needed;
// digit k holds age k+1's grid index).
inline void decode_rstate(size_t rstate, size_t R, int tau, size_t* digits) {
  for (int a = 0; a < tau; ++a) {
    digits[a] = rstate % R;
    rstate /= R;
  }
}
inline size_t encode_rstate(const size_t* digits, size_t R, int tau) {
  size_t s = 0;
  for (int a = tau; a-- > 0;) s = s * R + digits[a];
  return s;
}

}  // namespace sdpdetail

// One-stage minimization for the full program. Residual and fresh splits are
// enumerated as grid indices; age tau must be admitted, and everything must
// be admitted at the final slot.
inline FullStageControl full_stage_best(const PolicyTable& tbl, size_t t,
                                        size_t next_cp, size_t next_ca,
                                        const size_t* rdigits, double y,
                                        size_t p_idx, double p, double alpha) {
  const size_t Y = tbl.Y(), R = tbl.R(), S = tbl.full_states();
  const int tau = tbl.tau;
  const bool last = (t + 1 == tbl.T);
  const double dh = tbl.slot_hours;
  const double* vnext =
      &tbl.value[tbl.full_value_index(t + 1, next_cp, next_ca, 0, 0)];
  (void)p_idx;

  // grid step for control amounts (r_grid is uniform)
  const double step = R > 1 ? tbl.r_grid[1] - tbl.r_grid[0] : 1.0;
  const long P = R > 1 ? std::lround(std::min(p, tbl.r_grid.back()) / step)
                       : 0;  // fresh units (clamped to grid coverage)

  FullStageControl best;
  best.admit_age.assign(static_cast<size_t>(tau) + 1, 0.0);

  // residual admits: ages 1..tau-1 free, age tau forced; all forced at T-1
  std::vector<long> u(static_cast<size_t>(tau) + 1, 0);
  for (int a = 1; a <= tau; ++a) u[static_cast<size_t>(a)] =
      static_cast<long>(rdigits[a - 1]);

  std::vector<long> j(static_cast<size_t>(tau) + 1, 0);
  std::vector<size_t> nd(static_cast<size_t>(std::max(tau, 1)), 0);

  // iterate over free residual-admit combinations via mixed-radix counting
  std::vector<long> lo(static_cast<size_t>(tau) + 1, 0),
      hi(static_cast<size_t>(tau) + 1, 0);
  for (int a = 1; a <= tau; ++a) {
    const bool forced = (a == tau) || last;
    lo[static_cast<size_t>(a)] = forced ? u[static_cast<size_t>(a)] : 0;
    hi[static_cast<size_t>(a)] = u[static_cast<size_t>(a)];
  }
  for (int a = 1; a <= tau; ++a) j[static_cast<size_t>(a)] = lo[static_cast<size_t>(a)];

  while (true) {
    long jsum = 0;
    double delay_cost = 0.0;
    for (int a = 1; a <= tau; ++a) {
      jsum += j[static_cast<size_t>(a)];
      delay_cost += tbl.k_delay *
                    std::pow(static_cast<double>(a), tbl.delay_exponent) *
                    static_cast<double>(j[static_cast<size_t>(a)]) * step;
    }
    // fresh split
    for (long ia = 0; ia <= P; ++ia) {
      const long wmax = (tau >= 1 && !last) ? P - ia : 0;
      for (long iw = 0; iw <= wmax; ++iw) {
        const long id = P - ia - iw;
        if (!tbl.allow_drop && id != 0) continue;
        const double A = (static_cast<double>(ia + jsum)) * step;
        double cost =
            dh * (alpha * A + tbl.k_drop * static_cast<double>(id) * step +
                  delay_cost);
        // next residual state
        for (int a = 0; a < tau; ++a) {
          if (a == 0)
            nd[0] = static_cast<size_t>(iw);
          else
            nd[static_cast<size_t>(a)] = static_cast<size_t>(
                u[static_cast<size_t>(a)] - j[static_cast<size_t>(a)]);
        }
        const size_t ns =
            tau > 0 ? sdpdetail::encode_rstate(nd.data(), R, tau) : 0;
        cost += tbl.interp_y(vnext + ns * Y, 1, std::max(y, A));
        if (cost < best.cost) {
          best.cost = cost;
          best.admit_fresh = static_cast<double>(ia) * step;
          best.postpone_fresh = static_cast<double>(iw) * step;
          best.drop_fresh = static_cast<double>(id) * step;
          for (int a = 1; a <= tau; ++a)
            best.admit_age[static_cast<size_t>(a)] =
                static_cast<double>(j[static_cast<size_t>(a)]) * step;
          best.feasible = true;
        }
      }
    }
    // increment mixed radix over free ages
    int a = 1;
    for (; a <= tau; ++a) {
      if (j[static_cast<size_t>(a)] < hi[static_cast<size_t>(a)] &&
          lo[static_cast<size_t>(a)] != hi[static_cast<size_t>(a)]) {
        ++j[static_cast<size_t>(a)];
        break;
      }
      j[static_cast<size_t>(a)] = lo[static_cast<size_t>(a)];
    }
    if (a > tau) break;
  }
  (void)S;
  return best;
}

inline PolicyTable solve_sdp_full(const DemandModel& dm, const PriceModel& pm,
                                  double beta, const ModulationModel& model,
                                  const GridSpec& grids = {},
                                  bool allow_drop = true) {
  dm.validate();
  pm.validate();
  if (dm.horizon != pm.horizon)
    throw ValidationError("sdp_full: demand/price horizons differ");

  PolicyTable tbl;
  tbl.kind = PolicyTable::Kind::Full;
  tbl.T = dm.horizon;
  tbl.beta = beta;
  tbl.k_drop = model.k_drop;
  tbl.k_delay = model.k_delay;
  tbl.delay_exponent = model.delay_exponent;
  tbl.tau = model.tau;
  tbl.allow_drop = allow_drop;
  tbl.demand = dm;
  tbl.price = pm;
  const double pmax = dm.max_support();
  tbl.r_grid = sdpdetail::auto_r_grid(grids, pmax);
  tbl.y_grid = sdpdetail::auto_y_grid(
      grids, pmax * static_cast<double>(model.tau + 1));
  // controls are enumerated on the residual grid, so demand levels must sit
  // on it for the stage constraints to hold exactly
  if (tbl.r_grid.size() >= 2) {
    const double step = tbl.r_grid[1] - tbl.r_grid[0];
    auto check = [&](const std::vector<double>& sup) {
      for (double v : sup) {
        const double snapped = std::round(v / step) * step;
        if (std::fabs(snapped - v) > 1e-6 * std::max(1.0, v) ||
            v > tbl.r_grid.back() + 1e-9)
          throw ValidationError(
              "sdp_full: demand support must lie on the residual grid");
      }
    };
    if (dm.mode == DiscreteProcess::Mode::Markov) {
      check(dm.levels);
    } else {
      for (const auto& d : dm.dists) check(d.support);
    }
  }
  const size_t Y = tbl.Y(), R = tbl.R(), S = tbl.full_states();
  const size_t CP = tbl.cond_p(), CA = tbl.cond_a();
  if (static_cast<double>(Y) * S * CP * CA > grids.state_budget)
    throw SolverError(
        "sdp_full: state budget exceeded; the backward induction scales as "
        "O(R * Lp^(2*(tau+2)) * La * T) and needs the pooled or drop-only "
        "approximation at this size");
  tbl.value.assign((tbl.T + 1) * CP * CA * S * Y, 0.0);
  for (size_t cp = 0; cp < CP; ++cp)
    for (size_t ca = 0; ca < CA; ++ca)
      for (size_t s = 0; s < S; ++s)
        for (size_t yi = 0; yi < Y; ++yi)
          tbl.value[tbl.full_value_index(tbl.T, cp, ca, s, yi)] =
              beta * tbl.y_grid[yi];

  const bool dm_markov = dm.mode == DiscreteProcess::Mode::Markov;
  const bool pm_markov = pm.mode == DiscreteProcess::Mode::Markov;
  std::vector<size_t> rdigits(static_cast<size_t>(std::max(tbl.tau, 1)), 0);

  for (size_t t = tbl.T; t-- > 0;) {
    for (size_t cp = 0; cp < CP; ++cp) {
      const std::vector<double>& psup = dm_markov ? dm.levels : dm.dist_at(t).support;
      const std::vector<double>& pprob =
          dm_markov ? (t == 0 ? dm.initial : dm.transition[cp])
                    : dm.dist_at(t).prob;
      for (size_t ca = 0; ca < CA; ++ca) {
        const std::vector<double>& asup =
            pm_markov ? pm.levels : pm.dist_at(t).support;
        const std::vector<double>& aprob =
            pm_markov ? (t == 0 ? pm.initial : pm.transition[ca])
                      : pm.dist_at(t).prob;
        for (size_t s = 0; s < S; ++s) {
          sdpdetail::decode_rstate(s, R, tbl.tau, rdigits.data());
          for (size_t yi = 0; yi < Y; ++yi) {
            double v = 0.0;
            for (size_t pi = 0; pi < psup.size(); ++pi) {
              if (pprob[pi] == 0.0) continue;
              for (size_t aj = 0; aj < asup.size(); ++aj) {
                if (aprob[aj] == 0.0) continue;
                const size_t ncp = dm_markov ? pi : 0;
                const size_t nca = pm_markov ? aj : 0;
                auto ctl = full_stage_best(tbl, t, ncp, nca, rdigits.data(),
                                           tbl.y_grid[yi], pi, psup[pi],
                                           asup[aj]);
                if (!ctl.feasible)
                  throw SolverError("sdp_full: no feasible stage control");
                v += pprob[pi] * aprob[aj] * ctl.cost;
              }
            }
            tbl.value[tbl.full_value_index(t, cp, ca, s, yi)] = v;
          }
        }
      }
    }
  }
  tbl.value_at_start = tbl.value[tbl.full_value_index(0, 0, 0, 0, 0)];
  return tbl;
}

// ---------------------------------------------------------------------------
// Rollout: apply a computed policy to a realized trajectory, observing each
// slot's demand and price, acting on the true values, and enforcing the
// deadline and horizon-drain constraints that the approximate state models
// do not track. Lookups beyond the grids clamp and are counted.
// ---------------------------------------------------------------------------

struct RolloutResult {
  Plan plan;
  CostBreakdown cost;
  size_t clamped_lookups = 0;
  std::vector<std::string> warnings;
};

inline RolloutResult rollout_policy(const PolicyTable& tbl, const PowerTrace& trace,
                                    const Tariff& tariff,
                                    const ModulationModel& model) {
  trace.validate();
  tariff.check_matches(trace.size());
  if (trace.size() != tbl.T)
    throw ValidationError("rollout: trace length does not match the table horizon");
  if (tbl.kind != PolicyTable::Kind::Drop && model.tau != tbl.tau)
    throw ValidationError("rollout: model tau does not match the table");

  const size_t T = trace.size();
  const int tau = model.tau;
  Plan plan(T, tau);
  std::vector<double> res(static_cast<size_t>(tau) + 1, 0.0);
  double y_run = 0.0;
  RolloutResult out;

  const double p_cover = tbl.demand.max_support();
  for (size_t t = 0; t < T; ++t) {
    const double p = trace.values[t];
    const double alpha = tariff.alpha(t);
    if (p > p_cover * (1.0 + 1e-9)) ++out.clamped_lookups;

    double a0 = 0.0, w0 = 0.0, d0 = 0.0;
    std::vector<double> aage(static_cast<size_t>(tau) + 1, 0.0);

    if (tbl.kind == PolicyTable::Kind::Drop) {
      const size_t yi = nearest_index(tbl.y_grid, y_run);
      const double f = std::min(tbl.drop_phi[t * tbl.Y() + yi], 1.0);
      a0 = f * p;
      d0 = p - a0;
    } else if (tbl.kind == PolicyTable::Kind::Lin) {
      double rsum = 0.0;
      for (int a = 1; a <= tau; ++a) rsum += res[static_cast<size_t>(a)];
      auto ctl = lin_stage_best(tbl, t, std::min(y_run, tbl.y_grid.back()),
                                std::min(rsum, tbl.r_grid.back()), p, alpha);
      if (!ctl.feasible) {  // cap overflow: admit everything due, drop nothing
        ctl.admit_total = p + rsum;
        ctl.admit_pool = rsum;
        ctl.carry = 0.0;
        ++out.clamped_lookups;
      }
      // scale the pool draw to the true pool
      double apool = std::min(ctl.admit_pool, rsum);
      double afresh = std::clamp(ctl.admit_total - ctl.admit_pool, 0.0, p);
      double carry_fresh = std::clamp(
          ctl.carry - (rsum - apool), 0.0, p - afresh);
      a0 = afresh;
      w0 = carry_fresh;
      d0 = tbl.allow_drop ? p - a0 - w0 : 0.0;
      if (!tbl.allow_drop) w0 = p - a0;
      // FIFO assignment of the pool draw, oldest first
      for (int a = tau; a >= 1 && apool > 0.0; --a) {
        const double take = std::min(apool, res[static_cast<size_t>(a)]);
        aage[static_cast<size_t>(a)] = take;
        apool -= take;
      }
    } else {  // Full
      const std::vector<double>& psup =
          tbl.demand.mode == DiscreteProcess::Mode::Markov
              ? tbl.demand.levels
              : tbl.demand.dist_at(t).support;
      const std::vector<double>& asup =
          tbl.price.mode == DiscreteProcess::Mode::Markov
              ? tbl.price.levels
              : tbl.price.dist_at(t).support;
      const size_t pi = nearest_index(psup, p);
      const size_t aj = nearest_index(asup, alpha);
      const size_t ncp = tbl.demand.mode == DiscreteProcess::Mode::Markov ? pi : 0;
      const size_t nca = tbl.price.mode == DiscreteProcess::Mode::Markov ? aj : 0;
      std::vector<size_t> rdig(static_cast<size_t>(std::max(tau, 1)), 0);
      for (int a = 1; a <= tau; ++a)
        rdig[static_cast<size_t>(a - 1)] =
            nearest_index(tbl.r_grid, res[static_cast<size_t>(a)]);
      auto ctl = full_stage_best(tbl, t, ncp, nca, rdig.data(),
                                 std::min(y_run, tbl.y_grid.back()), pi,
                                 psup[pi], asup[aj]);
      if (!ctl.feasible) {
        ctl.admit_fresh = psup[pi];
        ctl.postpone_fresh = 0.0;
        ctl.drop_fresh = 0.0;
        ctl.admit_age.assign(static_cast<size_t>(tau) + 1, 0.0);
        ++out.clamped_lookups;
      }
      // apply the snapped controls as fractions of the true quantities
      const double psnap = psup[pi];
      double fa = 1.0, fw = 0.0;
      if (psnap > 0.0) {
        fa = std::clamp(ctl.admit_fresh / psnap, 0.0, 1.0);
        fw = std::clamp(ctl.postpone_fresh / psnap, 0.0, 1.0 - fa);
      }
      a0 = fa * p;
      w0 = fw * p;
      d0 = tbl.allow_drop ? p - a0 - w0 : 0.0;
      if (!tbl.allow_drop) w0 = p - a0;
      for (int a = 1; a <= tau; ++a) {
        const double avail = res[static_cast<size_t>(a)];
        if (avail <= 0.0) continue;
        const double snapped = tbl.r_grid[rdig[static_cast<size_t>(a - 1)]];
        const double frac =
            snapped > 0.0
                ? std::clamp(ctl.admit_age[static_cast<size_t>(a)] / snapped,
                             0.0, 1.0)
                : 0.0;
        aage[static_cast<size_t>(a)] = frac * avail;
      }
    }

    // deadline and horizon-drain enforcement on the true state
    if (tau >= 1) aage[static_cast<size_t>(tau)] = res[static_cast<size_t>(tau)];
    if (tau == 0 || t + 1 == T) {
      a0 = p - d0;
      w0 = 0.0;
      if (t + 1 == T)
        for (int a = 1; a <= tau; ++a)
          aage[static_cast<size_t>(a)] = res[static_cast<size_t>(a)];
    }

    plan.admitted(t, 0) = a0;
    plan.dropped(t, 0) = d0;
    std::vector<double> next(static_cast<size_t>(tau) + 1, 0.0);
    for (int a = 1; a <= tau; ++a) {
      const double avail = res[static_cast<size_t>(a)];
      plan.residual(t, a) = avail;
      plan.admitted(t, a) = aage[static_cast<size_t>(a)];
      if (a < tau && t + 1 < T)
        next[static_cast<size_t>(a) + 1] = avail - aage[static_cast<size_t>(a)];
    }
    if (tau >= 1 && t + 1 < T) next[1] = w0;
    res = std::move(next);
    y_run = std::max(y_run, plan.admitted_total(t));
  }

  plan.y_max = plan.realized_peak();
  out.plan = plan;
  out.cost = evaluate_cost(plan, trace, tariff, model);
  if (out.clamped_lookups > 0)
    out.warnings.push_back("grid coverage: " +
                           std::to_string(out.clamped_lookups) +
                           " lookups clamped to the table grids");
  return out;
}

// ---------------------------------------------------------------------------
// Versioned binary serialization of policy tables.
// ---------------------------------------------------------------------------

namespace sdpdetail {

inline void put_u64(std::ostream& o, uint64_t v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline uint64_t get_u64(std::istream& i) {
  uint64_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
inline void put_f64(std::ostream& o, double v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline double get_f64(std::istream& i) {
  double v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
inline void put_vec(std::ostream& o, const std::vector<double>& v) {
  put_u64(o, v.size());
  o.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline std::vector<double> get_vec(std::istream& i) {
  std::vector<double> v(get_u64(i));
  i.read(reinterpret_cast<char*>(v.data()),
         static_cast<std::streamsize>(v.size() * sizeof(double)));
  return v;
}
inline void put_ivec(std::ostream& o, const std::vector<int>& v) {
  put_u64(o, v.size());
  for (int x : v) put_u64(o, static_cast<uint64_t>(x));
}
inline std::vector<int> get_ivec(std::istream& i) {
  std::vector<int> v(get_u64(i));
  for (auto& x : v) x = static_cast<int>(get_u64(i));
  return v;
}

inline void put_process(std::ostream& o, const DiscreteProcess& p) {
  put_u64(o, p.mode == DiscreteProcess::Mode::Markov ? 1 : 0);
  put_u64(o, p.horizon);
  put_u64(o, p.dists.size());
  for (const auto& d : p.dists) {
    put_vec(o, d.support);
    put_vec(o, d.prob);
  }
  put_ivec(o, p.slot_dist);
  put_vec(o, p.levels);
  put_u64(o, p.transition.size());
  for (const auto& row : p.transition) put_vec(o, row);
  put_vec(o, p.initial);
}
inline DiscreteProcess get_process(std::istream& i) {
  DiscreteProcess p;
  p.mode = get_u64(i) == 1 ? DiscreteProcess::Mode::Markov
                           : DiscreteProcess::Mode::StageIndependent;
  p.horizon = get_u64(i);
  p.dists.resize(get_u64(i));
  for (auto& d : p.dists) {
    d.support = get_vec(i);
    d.prob = get_vec(i);
  }
  p.slot_dist = get_ivec(i);
  p.levels = get_vec(i);
  p.transition.resize(get_u64(i));
  for (auto& row : p.transition) row = get_vec(i);
  p.initial = get_vec(i);
  return p;
}

constexpr uint64_t kTableMagic = 0x504d505431ull;  // "PMPT1"

}  // namespace sdpdetail

inline void PolicyTable::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("policy table: cannot write " + path);
  using namespace sdpdetail;
  put_u64(f, kTableMagic);
  put_u64(f, static_cast<uint64_t>(kind));
  put_u64(f, T);
  put_f64(f, slot_hours);
  put_f64(f, beta);
  put_f64(f, k_drop);
  put_f64(f, k_delay);
  put_u64(f, static_cast<uint64_t>(delay_exponent));
  put_u64(f, static_cast<uint64_t>(tau));
  put_u64(f, allow_drop ? 1 : 0);
  put_vec(f, y_grid);
  put_vec(f, r_grid);
  put_vec(f, mu_grid);
  put_process(f, demand);
  put_process(f, price);
  put_vec(f, drop_phi);
  put_vec(f, value);
  put_f64(f, value_at_start);
}

inline PolicyTable PolicyTable::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("policy table: cannot open " + path);
  using namespace sdpdetail;
  if (get_u64(f) != kTableMagic)
    throw ValidationError("policy table: bad magic (not a policy table file)");
  PolicyTable t;
  t.kind = static_cast<Kind>(get_u64(f));
  t.T = get_u64(f);
  t.slot_hours = get_f64(f);
  t.beta = get_f64(f);
  t.k_drop = get_f64(f);
  t.k_delay = get_f64(f);
  t.delay_exponent = static_cast<int>(get_u64(f));
  t.tau = static_cast<int>(get_u64(f));
  t.allow_drop = get_u64(f) == 1;
  t.y_grid = get_vec(f);
  t.r_grid = get_vec(f);
  t.mu_grid = get_vec(f);
  t.demand = get_process(f);
  t.price = get_process(f);
  t.drop_phi = get_vec(f);
  t.value = get_vec(f);
  t.value_at_start = get_f64(f);
  if (!f) throw ValidationError("policy table: truncated file");
  return t;
}

}  // namespace powermod
