// Shared helpers and independent oracles for the test suites. Everything in
// here recomputes results from first principles so the checks stay decoupled
// from the library's solver paths.
#pragma once

#include <random>

#include "powermod/plan.hpp"
#include "powermod/trace.hpp"

namespace pmtest {

using powermod::ModulationModel;
using powermod::Plan;
using powermod::PowerTrace;
using powermod::Tariff;

inline PowerTrace random_trace(std::mt19937_64& rng, size_t T, double pmax,
                               double slot_hours = 1.0 / 6, double zero_frac = 0.1) {
  std::uniform_real_distribution<double> u(0.0, pmax);
  std::uniform_real_distribution<double> z(0.0, 1.0);
  std::vector<double> v(T);
  for (auto& x : v) x = (z(rng) < zero_frac) ? 0.0 : u(rng);
  if (T > 0 && v[0] == 0.0) v[0] = u(rng);  // avoid the all-zero corner
  return PowerTrace::make(std::move(v), slot_hours, pmax);
}

// Random feasible plan built by construction: split each origin's mass over
// its allowed slots plus drops, tracking residuals exactly.
inline Plan random_feasible_plan(std::mt19937_64& rng, const PowerTrace& trace,
                                 int tau, bool postponed_drops = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const size_t T = trace.size();
  Plan plan(T, tau);
  for (size_t i = 0; i < T; ++i) {
    double rem = trace.values[i];
    const size_t last = std::min(i + static_cast<size_t>(tau), T - 1);
    for (size_t t = i; t <= last; ++t) {
      const int age = static_cast<int>(t - i);
      if (age >= 1) plan.residual(t, age) = rem;
      if (t == last) {
        // final split between admit and (optionally) drop
        const double a = (age == 0 || postponed_drops) ? u(rng) * rem : rem;
        plan.admitted(t, age) = a;
        plan.dropped(t, age) = rem - a;
        rem = 0.0;
      } else {
        double a = u(rng) * rem;
        double d = (age == 0 || postponed_drops) ? u(rng) * (rem - a) : 0.0;
        plan.admitted(t, age) = a;
        plan.dropped(t, age) = d;
        rem -= a + d;
      }
    }
  }
  plan.y_max = plan.realized_peak();
  return plan;
}

// Exhaustive drop-only oracle: the optimal threshold is a breakpoint of the
// piecewise-linear objective, so scanning {p_t} plus the shed-everything
// candidate 0 is exact. Candidates are scanned in descending order with
// strict improvement, which resolves ties toward the larger threshold.
struct ThresholdOracle {
  double theta = 0.0;
  double total = 0.0;
};

inline ThresholdOracle exhaustive_threshold(const PowerTrace& trace, double alpha,
                                            double beta, double k_drop) {
  std::vector<double> cand = trace.values;
  cand.push_back(0.0);
  std::sort(cand.begin(), cand.end(), std::greater<double>());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  const double dh = trace.slot_hours;
  ThresholdOracle best;
  bool first = true;
  for (double th : cand) {
    double admitted = 0.0, dropped = 0.0, peak = 0.0;
    for (double p : trace.values) {
      const double a = std::min(p, th);
      admitted += a;
      dropped += p - a;
      peak = std::max(peak, a);
    }
    const double total =
        beta * peak + dh * (alpha * admitted + k_drop * dropped);
    if (first || total < best.total - 1e-15 * std::max(1.0, best.total)) {
      best.theta = th;
      best.total = total;
      first = false;
    }
  }
  return best;
}

// Drop-only offline admitted total for a demand prefix, recomputed from the
// sorted prefix (used by the online-algorithm dominance and gap checks).
inline double prefix_offline_theta(const std::vector<double>& prefix, long n) {
  if (n <= 0) return powermod::kInf;
  if (static_cast<long>(prefix.size()) < n) return 0.0;
  std::vector<double> s = prefix;
  std::nth_element(s.begin(), s.begin() + (n - 1), s.end(), std::greater<double>());
  return s[static_cast<size_t>(n - 1)];
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  const double ma = powermod::mean_of(a), mb = powermod::mean_of(b);
  double sab = 0.0, sa = 0.0, sb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    sa += (a[i] - ma) * (a[i] - ma);
    sb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(sa * sb);
}

}  // namespace pmtest
