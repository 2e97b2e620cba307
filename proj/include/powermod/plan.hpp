#pragma once

#include <fstream>
#include <istream>
#include <ostream>

#include "powermod/trace.hpp"

namespace powermod {

// Full decision-variable assignment for one billing cycle.
//
// Slots and origins are 0-based. Entries are indexed by (slot t, age), where
// age = t - origin, 0 <= age <= tau. residual(t, age) is the demand from
// origin t - age still unserved at the start of slot t (age >= 1).
struct Plan {
  size_t T = 0;
  int tau = 0;
  std::vector<double> admitted_;  // T x (tau+1)
  std::vector<double> dropped_;   // T x (tau+1)
  std::vector<double> residual_;  // T x (tau+1), age-0 column unused
  double y_max = 0.0;

  Plan() = default;
  Plan(size_t T_, int tau_) : T(T_), tau(tau_) {
    const size_t n = T * static_cast<size_t>(tau + 1);
    admitted_.assign(n, 0.0);
    dropped_.assign(n, 0.0);
    residual_.assign(n, 0.0);
  }

  size_t idx(size_t t, int age) const {
    return t * static_cast<size_t>(tau + 1) + static_cast<size_t>(age);
  }
  double& admitted(size_t t, int age) { return admitted_[idx(t, age)]; }
  double& dropped(size_t t, int age) { return dropped_[idx(t, age)]; }
  double& residual(size_t t, int age) { return residual_[idx(t, age)]; }
  double admitted(size_t t, int age) const { return admitted_[idx(t, age)]; }
  double dropped(size_t t, int age) const { return dropped_[idx(t, age)]; }
  double residual(size_t t, int age) const { return residual_[idx(t, age)]; }

  // Total demand admitted during slot t (a_t^+).
  double admitted_total(size_t t) const {
    double s = 0.0;
    for (int a = 0; a <= tau; ++a) s += admitted(t, a);
    return s;
  }
  double dropped_total() const {
    return std::accumulate(dropped_.begin(), dropped_.end(), 0.0);
  }
  // Demand that was postponed at its origin and dropped later. An optimal
  // plan can always avoid this, so solvers keep it at zero; the field exists
  // so arbitrary plans can be checked.
  double postponed_then_dropped_total() const {
    double s = 0.0;
    for (size_t t = 0; t < T; ++t)
      for (int a = 1; a <= tau; ++a) s += dropped(t, a);
    return s;
  }
  double realized_peak() const {
    double m = 0.0;
    for (size_t t = 0; t < T; ++t) m = std::max(m, admitted_total(t));
    return m;
  }
};

inline Plan make_baseline_plan(const PowerTrace& trace, int tau) {
  Plan p(trace.size(), tau);
  for (size_t t = 0; t < trace.size(); ++t) p.admitted(t, 0) = trace.values[t];
  p.y_max = trace.max_value();
  return p;
}

struct FeasibilityReport {
  bool feasible = true;
  std::string violated;       // id of the first violated constraint
  double magnitude = 0.0;     // residual of the violated constraint (kW)
  long slot = -1;
  long origin = -1;
  std::string message;
};

// Checks a plan against the flow, deadline, horizon-drain, peak-dominance and
// non-negativity constraints. Equality constraints use tolerance eps (kW).
// A dimension mismatch is a structural error, not an infeasibility.
inline FeasibilityReport check_feasible(const Plan& plan, const PowerTrace& trace,
                                        const ModulationModel& model,
                                        double eps = 1e-6) {
  if (plan.T != trace.size() || plan.tau != model.tau)
    throw ValidationError(
        "plan dimensions (T=" + std::to_string(plan.T) +
        ", tau=" + std::to_string(plan.tau) + ") do not match trace/model (T=" +
        std::to_string(trace.size()) + ", tau=" + std::to_string(model.tau) + ")");

  const size_t T = plan.T;
  const int tau = plan.tau;
  auto fail = [](const std::string& id, double mag, long t, long i,
                 const std::string& msg) {
    FeasibilityReport r;
    r.feasible = false;
    r.violated = id;
    r.magnitude = mag;
    r.slot = t;
    r.origin = i;
    r.message = msg;
    return r;
  };

  for (size_t t = 0; t < T; ++t) {
    for (int a = 0; a <= tau; ++a) {
      const long origin = static_cast<long>(t) - a;
      const double av = plan.admitted(t, a);
      const double dv = plan.dropped(t, a);
      const double rv = plan.residual(t, a);
      if (av < -eps || dv < -eps || rv < -eps)
        return fail("eq6:nonneg", std::min({av, dv, rv}), static_cast<long>(t),
                    origin, "negative decision variable");
      if (origin < 0 && (av > eps || dv > eps || rv > eps))
        return fail("structural:pre-horizon", std::max({av, dv, rv}),
                    static_cast<long>(t), origin,
                    "nonzero entry for origin before slot 0");
    }
  }

  for (size_t t = 0; t < T; ++t) {
    // Eq.1 (and Eq.4 at the last slot): fresh demand balance.
    {
      const double carry =
          (t + 1 < T && tau >= 1) ? plan.residual(t + 1, 1) : 0.0;
      const double res = trace.values[t] - plan.admitted(t, 0) -
                         plan.dropped(t, 0) - carry;
      if (std::fabs(res) > eps) {
        const char* id = (t + 1 == T) ? "eq4:horizon-drain" : "eq1:flow";
        return fail(id, res, static_cast<long>(t), static_cast<long>(t),
                    "fresh demand not balanced");
      }
    }
    // Eq.2 / Eq.3 / Eq.4: residual balance per origin.
    for (int a = 1; a <= tau; ++a) {
      const long origin = static_cast<long>(t) - a;
      if (origin < 0) continue;
      const bool carry_exists = (a + 1 <= tau) && (t + 1 < T);
      const double carry = carry_exists ? plan.residual(t + 1, a + 1) : 0.0;
      const double res = plan.residual(t, a) - plan.admitted(t, a) -
                         plan.dropped(t, a) - carry;
      if (std::fabs(res) > eps) {
        const char* id = (a == tau)      ? "eq3:deadline"
                         : (t + 1 == T)  ? "eq4:horizon-drain"
                                         : "eq2:flow";
        return fail(id, res, static_cast<long>(t), origin,
                    "residual demand not balanced");
      }
    }
    // Eq.5: peak dominance.
    const double at = plan.admitted_total(t);
    if (plan.y_max < at - eps)
      return fail("eq5:peak", at - plan.y_max, static_cast<long>(t), -1,
                  "admitted total exceeds y_max");
  }
  if (plan.y_max < -eps)
    return fail("eq6:nonneg", plan.y_max, -1, -1, "negative y_max");

  // Unreachable residuals at slot 0 (no origin can precede it) were covered
  // by the structural scan above.
  FeasibilityReport ok;
  ok.feasible = true;
  return ok;
}

class InfeasiblePlanError : public std::runtime_error {
 public:
  explicit InfeasiblePlanError(FeasibilityReport r)
      : std::runtime_error("plan infeasible: " + r.violated + " at slot " +
                           std::to_string(r.slot) + " (origin " +
                           std::to_string(r.origin) + "), residual " +
                           std::to_string(r.magnitude) + " kW"),
        report(std::move(r)) {}
  FeasibilityReport report;
};

struct CostBreakdown {
  double energy_cost = 0.0;
  double peak_cost = 0.0;
  double drop_loss = 0.0;
  double delay_loss = 0.0;
  double total = 0.0;
  double baseline_total = 0.0;
  double savings_pct = 0.0;
  bool baseline_zero = false;  // savings undefined, reported as 0
};

// Cost of the admit-everything plan (y_max = max p_t, no drops or delays).
inline double baseline_cost(const PowerTrace& trace, const Tariff& tariff) {
  tariff.check_matches(trace.size());
  const double dh = trace.slot_hours;
  double energy = 0.0;
  for (size_t t = 0; t < trace.size(); ++t)
    energy += tariff.alpha(t) * trace.values[t] * dh;
  return energy + tariff.peak_price * trace.max_value();
}

// Exact cost of a feasible plan under the stated objective:
//   beta*y_max + sum_t [ alpha_t*a_t^+ + k_drop*d + k_delay*age^e*a ] * slot_hours
inline CostBreakdown evaluate_cost(const Plan& plan, const PowerTrace& trace,
                                   const Tariff& tariff,
                                   const ModulationModel& model,
                                   double eps = 1e-6) {
  tariff.check_matches(trace.size());
  FeasibilityReport rep = check_feasible(plan, trace, model, eps);
  if (!rep.feasible) throw InfeasiblePlanError(std::move(rep));

  const double dh = trace.slot_hours;
  CostBreakdown c;
  for (size_t t = 0; t < plan.T; ++t) {
    c.energy_cost += tariff.alpha(t) * plan.admitted_total(t) * dh;
    for (int a = 0; a <= plan.tau; ++a) {
      c.drop_loss += model.k_drop * plan.dropped(t, a) * dh;
      if (a >= 1) c.delay_loss += model.delay_weight(a) * plan.admitted(t, a) * dh;
    }
  }
  c.peak_cost = tariff.peak_price * plan.y_max;
  c.total = c.energy_cost + c.peak_cost + c.drop_loss + c.delay_loss;
  c.baseline_total = baseline_cost(trace, tariff);
  if (c.baseline_total > 0.0) {
    c.savings_pct = 100.0 * (c.baseline_total - c.total) / c.baseline_total;
  } else {
    c.savings_pct = 0.0;
    c.baseline_zero = true;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Plan CSV: one row per (slot, origin) pair in h+(t), columns
// t,origin_i,admitted_kw,dropped_kw,residual_kw.
// ---------------------------------------------------------------------------

inline void write_plan_csv(std::ostream& out, const Plan& plan) {
  out << "t,origin_i,admitted_kw,dropped_kw,residual_kw\n";
  char buf[160];
  for (size_t t = 0; t < plan.T; ++t) {
    for (int a = std::min<int>(plan.tau, static_cast<int>(t)); a >= 0; --a) {
      const long origin = static_cast<long>(t) - a;
      std::snprintf(buf, sizeof(buf), "%zu,%ld,%.12g,%.12g,%.12g\n", t, origin,
                    plan.admitted(t, a), plan.dropped(t, a),
                    a >= 1 ? plan.residual(t, a) : 0.0);
      out << buf;
    }
  }
}

inline void write_plan_csv_file(const std::string& path, const Plan& plan) {
  std::ofstream f(path);
  if (!f) throw ValidationError("plan csv: cannot write " + path);
  write_plan_csv(f, plan);
}

inline Plan read_plan_csv(std::istream& in, size_t T, int tau) {
  std::string line;
  if (!std::getline(in, line) ||
      std::string(trim(line)) != "t,origin_i,admitted_kw,dropped_kw,residual_kw")
    throw ValidationError("plan csv: bad header");
  Plan plan(T, tau);
  while (std::getline(in, line)) {
    const auto tl = trim(line);
    if (tl.empty()) continue;
    auto f = split_csv_line(tl);
    if (f.size() != 5) throw ValidationError("plan csv: expected 5 fields");
    const long t = parse_long_strict(trim(f[0]), "plan csv");
    const long origin = parse_long_strict(trim(f[1]), "plan csv");
    if (t < 0 || t >= static_cast<long>(T))
      throw ValidationError("plan csv: slot out of range");
    const int age = static_cast<int>(t - origin);
    if (age < 0 || age > tau)
      throw ValidationError("plan csv: origin outside the delay window");
    plan.admitted(static_cast<size_t>(t), age) =
        parse_double_strict(trim(f[2]), "plan csv");
    plan.dropped(static_cast<size_t>(t), age) =
        parse_double_strict(trim(f[3]), "plan csv");
    if (age >= 1)
      plan.residual(static_cast<size_t>(t), age) =
          parse_double_strict(trim(f[4]), "plan csv");
  }
  plan.y_max = plan.realized_peak();
  return plan;
}

}  // namespace powermod
