#pragma once

#include <random>

#include "powermod/trace.hpp"

namespace powermod {

// Deterministic standard normal from explicit uniforms, so generated traces
// are bit-reproducible across standard libraries.
inline double standard_normal(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
  const double u1 = u(rng);
  const double u2 = u(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct SurgeSpec {
  int day = 15;            // 1-based day of the cycle
  int duration_slots = 18; // 3 hours at 10-minute slots
  double magnitude_kw = 0.0;
  int start_slot_in_day = -1;  // -1: at the profile's peak slot
};

struct GeneratorSpec {
  std::vector<double> profile;  // per-slot-of-day mean (kW)
  double noise_sigma = 0.0;     // kW
  int days = 30;
  double peak_target = 0.0;     // declared p_max; values are clipped to it
  std::optional<SurgeSpec> surge;
  uint64_t seed = 0;
  double slot_hours = 1.0 / 6;
};

inline size_t slots_per_day(double slot_hours) {
  const double spd = 24.0 / slot_hours;
  const double r = std::round(spd);
  if (std::fabs(spd - r) > 1e-9)
    throw ValidationError("slot length does not divide a day");
  return static_cast<size_t>(r);
}

inline PowerTrace generate(const GeneratorSpec& spec) {
  if (spec.profile.empty()) throw ValidationError("generator: empty profile");
  if (spec.days < 1) throw ValidationError("generator: days must be >= 1");
  if (spec.noise_sigma < 0) throw ValidationError("generator: negative sigma");
  const size_t spd = slots_per_day(spec.slot_hours);
  if (spec.profile.size() != spd)
    throw ValidationError("generator: profile length " +
                          std::to_string(spec.profile.size()) +
                          " does not match slots per day " + std::to_string(spd));
  double pmax_profile = 0.0;
  for (double v : spec.profile) {
    if (v < 0.0 || !std::isfinite(v))
      throw ValidationError("generator: profile values must be >= 0");
    pmax_profile = std::max(pmax_profile, v);
  }
  if (spec.peak_target < pmax_profile)
    throw ValidationError("generator: peak_target below the profile maximum");

  long surge_begin = -1, surge_end = -1;
  double surge_kw = 0.0;
  if (spec.surge) {
    const SurgeSpec& s = *spec.surge;
    if (s.day < 1 || s.day > spec.days)
      throw ValidationError("generator: surge day outside the cycle");
    long start = s.start_slot_in_day;
    if (start < 0) {
      start = static_cast<long>(
          std::max_element(spec.profile.begin(), spec.profile.end()) -
          spec.profile.begin());
    }
    surge_begin = static_cast<long>(s.day - 1) * static_cast<long>(spd) + start;
    surge_end = surge_begin + s.duration_slots;
    surge_kw = s.magnitude_kw;
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<double> values(static_cast<size_t>(spec.days) * spd);
  for (size_t t = 0; t < values.size(); ++t) {
    double v = spec.profile[t % spd];
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * standard_normal(rng);
    if (static_cast<long>(t) >= surge_begin && static_cast<long>(t) < surge_end)
      v += surge_kw;
    values[t] = std::clamp(v, 0.0, spec.peak_target);
  }
  return PowerTrace::make(std::move(values), spec.slot_hours, spec.peak_target);
}

// Named presets standing in for the evaluation workloads: a wide-peaked
// shallow diurnal shape, two progressively deeper diurnal shapes, and the
// last one plus an unpredictable surge. Calibrated qualitatively: PAR rises
// and P70 falls across the list, peaks 3 MW (5.022 MW with the surge).
inline GeneratorSpec make_preset(const std::string& name, uint64_t seed = 1) {
  const size_t spd = 144;
  auto shape = [&](double base, double amp, int power) {
    std::vector<double> prof(spd);
    for (size_t k = 0; k < spd; ++k) {
      const double x = 2.0 * M_PI * (static_cast<double>(k) / spd - 0.354);
      double s = std::sin(x);
      if (power > 1) s = std::pow(std::max(s, 0.0), power);
      prof[k] = 3000.0 * (base + amp * s);
    }
    return prof;
  };
  GeneratorSpec spec;
  spec.days = 30;
  spec.seed = seed;
  spec.peak_target = 3000.0;
  if (name == "google_like") {
    spec.profile = shape(0.78, 0.12, 1);
    spec.noise_sigma = 40.0;
  } else if (name == "facebook_like") {
    spec.profile = shape(0.55, 0.28, 1);
    spec.noise_sigma = 80.0;
  } else if (name == "mediaserver_like") {
    spec.profile = shape(0.25, 0.65, 4);
    spec.noise_sigma = 80.0;
  } else if (name == "synthetic_like") {
    spec.profile = shape(0.25, 0.65, 4);
    spec.noise_sigma = 80.0;
    spec.peak_target = 5022.0;
    SurgeSpec surge;
    surge.day = 15;
    surge.duration_slots = 18;
    surge.magnitude_kw = 5022.0;  // clipped at the peak target
    spec.surge = surge;
  } else {
    throw ValidationError("unknown workload preset '" + name + "'");
  }
  return spec;
}

inline std::vector<std::string> preset_names() {
  return {"google_like", "facebook_like", "mediaserver_like", "synthetic_like"};
}

// Surge-free twin of a preset (used to train demand models that have not
// seen the flash crowd).
inline GeneratorSpec without_surge(GeneratorSpec spec) {
  spec.surge.reset();
  return spec;
}

struct TimeOfDayProfile {
  std::vector<double> profile;  // per slot-of-day mean
  double residual_sigma = 0.0;
};

inline TimeOfDayProfile extract_time_of_day(const PowerTrace& trace) {
  const size_t spd = slots_per_day(trace.slot_hours);
  if (trace.size() % spd != 0)
    throw ValidationError("time-of-day extraction requires whole days (" +
                          std::to_string(trace.size()) + " slots, " +
                          std::to_string(spd) + " per day)");
  const size_t days = trace.size() / spd;
  TimeOfDayProfile out;
  out.profile.assign(spd, 0.0);
  for (size_t t = 0; t < trace.size(); ++t)
    out.profile[t % spd] += trace.values[t];
  for (auto& v : out.profile) v /= static_cast<double>(days);
  double ss = 0.0;
  for (size_t t = 0; t < trace.size(); ++t) {
    const double r = trace.values[t] - out.profile[t % spd];
    ss += r * r;
  }
  out.residual_sigma = std::sqrt(ss / static_cast<double>(trace.size()));
  return out;
}

enum class CorrelationSign { Positive, Negative };

// Energy prices affinely tied to the demand level; correlation with the
// trace is exactly +1 or -1.
inline Tariff correlated_prices(const PowerTrace& trace, double alpha_min,
                                double alpha_max, CorrelationSign sign,
                                double beta = 0.0) {
  if (!(alpha_min >= 0.0) || !(alpha_max >= alpha_min))
    throw ValidationError("correlated prices: need 0 <= alpha_min <= alpha_max");
  const double pmax = *std::max_element(trace.values.begin(), trace.values.end());
  const double pmin = *std::min_element(trace.values.begin(), trace.values.end());
  if (!(pmax > pmin))
    throw ValidationError("correlated prices: constant trace has no spread");
  std::vector<double> alphas(trace.size());
  for (size_t t = 0; t < trace.size(); ++t) {
    const double frac = sign == CorrelationSign::Positive
                            ? (trace.values[t] - pmin) / (pmax - pmin)
                            : (pmax - trace.values[t]) / (pmax - pmin);
    alphas[t] = frac * (alpha_max - alpha_min) + alpha_min;
  }
  return Tariff::time_varying(std::move(alphas), beta);
}

// Holds each hourly price for the slots it covers (price feeds are hourly,
// control windows are finer).
inline std::vector<double> expand_hourly_prices(const std::vector<double>& hourly,
                                                double slot_hours) {
  const double per = 1.0 / slot_hours;
  const double r = std::round(per);
  if (std::fabs(per - r) > 1e-9 || r < 1)
    throw ValidationError("hourly expansion needs an integer number of slots per hour");
  std::vector<double> out;
  out.reserve(hourly.size() * static_cast<size_t>(r));
  for (double p : hourly)
    for (long k = 0; k < static_cast<long>(r); ++k) out.push_back(p);
  return out;
}

}  // namespace powermod
