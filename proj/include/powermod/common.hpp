#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace powermod {

// Thrown when an input file or argument fails structural validation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a numerical solver cannot produce a usable answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool nearly_equal(double a, double b, double abs_tol = 1e-9,
                         double rel_tol = 1e-9) {
  return std::fabs(a - b) <=
         std::max(abs_tol, rel_tol * std::max(std::fabs(a), std::fabs(b)));
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw ValidationError("linspace: need at least one point");
  std::vector<double> v(static_cast<size_t>(n));
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = lo + step * i;
  v.back() = hi;
  return v;
}

// Index of the grid point nearest to x (grid must be sorted ascending).
inline size_t nearest_index(const std::vector<double>& grid, double x) {
  auto it = std::lower_bound(grid.begin(), grid.end(), x);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  size_t hi = static_cast<size_t>(it - grid.begin());
  return (x - grid[hi - 1] <= grid[hi] - x) ? hi - 1 : hi;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Strict number parsing: the whole token must be a finite number.
inline double parse_double_strict(std::string_view tok, const std::string& what) {
  std::string s(tok);
  if (s.empty()) throw ValidationError(what + ": empty numeric field");
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(x))
    throw ValidationError(what + ": bad numeric field '" + s + "'");
  return x;
}

inline long parse_long_strict(std::string_view tok, const std::string& what) {
  std::string s(tok);
  if (s.empty()) throw ValidationError(what + ": empty integer field");
  char* end = nullptr;
  errno = 0;
  const long x = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw ValidationError(what + ": bad integer field '" + s + "'");
  return x;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace powermod
