#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include "powermod/common.hpp"

namespace powermod {

// Per-slot average power demand (kW) over one billing cycle.
struct PowerTrace {
  std::vector<double> values;   // kW, one entry per control window
  double slot_hours = 1.0 / 6;  // window length in hours
  double p_max = 0.0;           // declared maximum power (kW)

  size_t size() const { return values.size(); }

  static PowerTrace make(std::vector<double> values, double slot_hours,
                         std::optional<double> p_max = std::nullopt) {
    PowerTrace t;
    t.values = std::move(values);
    t.slot_hours = slot_hours;
    double vmax = 0.0;
    for (double v : t.values) vmax = std::max(vmax, v);
    t.p_max = p_max.value_or(vmax);
    t.validate();
    return t;
  }

  void validate() const {
    if (values.empty()) throw ValidationError("trace: empty");
    if (!(slot_hours > 0.0)) throw ValidationError("trace: slot_hours must be > 0");
    if (!(p_max >= 0.0) || !std::isfinite(p_max))
      throw ValidationError("trace: bad p_max");
    for (size_t t = 0; t < values.size(); ++t) {
      const double v = values[t];
      if (!std::isfinite(v) || v < 0.0 || v > p_max + 1e-9 * std::max(1.0, p_max))
        throw ValidationError("trace: value out of [0, p_max] at slot " +
                              std::to_string(t));
    }
  }

  double max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
  double total_power() const {
    return std::accumulate(values.begin(), values.end(), 0.0);
  }
};

// Energy + peak prices for one billing cycle. A flat energy price is stored
// as a single entry and broadcast to every slot.
struct Tariff {
  std::vector<double> energy_prices;  // $/kWh, length 1 or T
  double peak_price = 0.0;            // $/kW per billing cycle

  static Tariff flat(double alpha, double beta) {
    Tariff t;
    t.energy_prices = {alpha};
    t.peak_price = beta;
    t.validate();
    return t;
  }
  static Tariff time_varying(std::vector<double> alphas, double beta) {
    Tariff t;
    t.energy_prices = std::move(alphas);
    t.peak_price = beta;
    t.validate();
    return t;
  }

  bool is_flat() const { return energy_prices.size() == 1; }
  double alpha(size_t t) const {
    return is_flat() ? energy_prices[0] : energy_prices[t];
  }
  double max_alpha() const {
    return *std::max_element(energy_prices.begin(), energy_prices.end());
  }
  double mean_alpha() const { return mean_of(energy_prices); }

  void validate() const {
    if (energy_prices.empty()) throw ValidationError("tariff: no energy prices");
    if (!(peak_price >= 0.0) || !std::isfinite(peak_price))
      throw ValidationError("tariff: peak price must be >= 0");
    for (double a : energy_prices)
      if (!std::isfinite(a) || a < 0.0)
        throw ValidationError("tariff: energy prices must be >= 0");
  }
  void check_matches(size_t T) const {
    if (!is_flat() && energy_prices.size() != T)
      throw ValidationError("tariff: price series length " +
                            std::to_string(energy_prices.size()) +
                            " does not match trace length " + std::to_string(T));
  }
};

// Penalty model for the two modulation knobs. Losses are charged per unit
// energy, so every loss term in the objective carries the slot length in
// hours. Delay loss for admitting x kW that has waited m slots is
// k_delay * m^exponent * x * slot_hours.
struct ModulationModel {
  double k_drop = 0.0;   // $/kWh dropped
  double k_delay = 0.0;  // $/kWh per slot-of-delay (raised to the exponent)
  int delay_exponent = 2;
  int tau = 0;  // maximum delay in slots

  static ModulationModel make(double k_drop, double k_delay, int delay_exponent,
                              int tau) {
    ModulationModel m;
    m.k_drop = k_drop;
    m.k_delay = k_delay;
    m.delay_exponent = delay_exponent;
    m.tau = tau;
    m.validate();
    return m;
  }

  void validate() const {
    if (!(k_drop >= 0.0)) throw ValidationError("model: k_drop must be >= 0");
    if (!(k_delay >= 0.0)) throw ValidationError("model: k_delay must be >= 0");
    if (delay_exponent != 1 && delay_exponent != 2)
      throw ValidationError("model: delay exponent must be 1 or 2");
    if (tau < 0) throw ValidationError("model: tau must be >= 0");
  }

  // Weight multiplying admitted power that has waited m slots.
  double delay_weight(int m) const {
    const double mm = static_cast<double>(m);
    return k_delay * (delay_exponent == 1 ? mm : mm * mm);
  }
};

struct WorkloadStats {
  double par = 1.0;      // peak-to-average ratio
  double p70 = 0.0;      // fraction of slots above 70% of the trace maximum
  double mean_kw = 0.0;
  double max_kw = 0.0;
  bool all_zero = false;
};

inline WorkloadStats workload_stats(const PowerTrace& trace) {
  trace.validate();
  WorkloadStats s;
  s.mean_kw = mean_of(trace.values);
  s.max_kw = trace.max_value();
  if (s.max_kw <= 0.0) {
    s.all_zero = true;
    s.par = 1.0;  // convention for the degenerate all-zero trace
    s.p70 = 0.0;
    return s;
  }
  s.par = s.max_kw / s.mean_kw;
  size_t above = 0;
  for (double v : trace.values)
    if (v > 0.7 * s.max_kw) ++above;
  s.p70 = static_cast<double>(above) / static_cast<double>(trace.size());
  return s;
}

// ---------------------------------------------------------------------------
// CSV formats. Traces: header "slot,power_kw". Prices: "slot,price_per_kwh".
// Slot indices must be 0-based and contiguous; gaps, negatives and NaN are
// rejected.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> read_indexed_series(std::istream& in,
                                               const std::string& header,
                                               const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(what + ": empty file");
  if (std::string(trim(line)) != header)
    throw ValidationError(what + ": expected header '" + header + "', got '" +
                          std::string(trim(line)) + "'");
  std::vector<double> vals;
  size_t expected = 0;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty()) continue;
    auto fields = split_csv_line(t);
    if (fields.size() != 2)
      throw ValidationError(what + ": expected 2 fields per row, got " +
                            std::to_string(fields.size()));
    const long slot = parse_long_strict(trim(fields[0]), what);
    if (slot != static_cast<long>(expected))
      throw ValidationError(what + ": slot indices must be 0-based contiguous; "
                            "expected " + std::to_string(expected) + ", got " +
                            std::to_string(slot));
    const double v = parse_double_strict(trim(fields[1]), what);
    if (v < 0.0) throw ValidationError(what + ": negative value at slot " +
                                       std::to_string(slot));
    vals.push_back(v);
    ++expected;
  }
  if (vals.empty()) throw ValidationError(what + ": no data rows");
  return vals;
}

}  // namespace detail

inline PowerTrace read_trace_csv(std::istream& in, double slot_hours,
                                 std::optional<double> p_max = std::nullopt) {
  return PowerTrace::make(
      detail::read_indexed_series(in, "slot,power_kw", "trace csv"), slot_hours,
      p_max);
}

inline PowerTrace read_trace_csv_file(const std::string& path, double slot_hours,
                                      std::optional<double> p_max = std::nullopt) {
  std::ifstream f(path);
  if (!f) throw ValidationError("trace csv: cannot open " + path);
  return read_trace_csv(f, slot_hours, p_max);
}

inline void write_trace_csv(std::ostream& out, const PowerTrace& trace) {
  out << "slot,power_kw\n";
  char buf[64];
  for (size_t t = 0; t < trace.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", t, trace.values[t]);
    out << buf;
  }
}

inline void write_trace_csv_file(const std::string& path, const PowerTrace& trace) {
  std::ofstream f(path);
  if (!f) throw ValidationError("trace csv: cannot write " + path);
  write_trace_csv(f, trace);
}

inline std::vector<double> read_price_csv(std::istream& in) {
  return detail::read_indexed_series(in, "slot,price_per_kwh", "price csv");
}

inline std::vector<double> read_price_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("price csv: cannot open " + path);
  return read_price_csv(f);
}

inline void write_price_csv(std::ostream& out, const std::vector<double>& prices) {
  out << "slot,price_per_kwh\n";
  char buf[64];
  for (size_t t = 0; t < prices.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", t, prices[t]);
    out << buf;
  }
}

}  // namespace powermod
