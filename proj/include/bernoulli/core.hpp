#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bernoulli {

/// Error raised on violated preconditions and bad inputs. The CLI maps it to
/// exit code 1; solver non-convergence uses SolveFailure instead.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class SolveFailure : public std::runtime_error {
 public:
  SolveFailure(const std::string& msg, double residual)
      : std::runtime_error(msg), residual(residual) {}
  double residual = 0.0;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double sq(double x) { return x * x; }

/// Neumaier compensated accumulator. Energies are compared across solvers at
/// 1e-8 relative, so plain left-to-right sums over 1e5 terms are not enough.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// All randomness (move ordering, test generators) flows from one seed.
using Rng = std::mt19937_64;

/// Fixed 17-significant-digit formatting; CSV bodies must be byte-identical
/// across reruns with the same config and seed.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_slope: need >= 2 points");
  double n = static_cast<double>(x.size());
  KahanSum sx, sy, sxx, sxy;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx.add(x[k]);
    sy.add(y[k]);
    sxx.add(x[k] * x[k]);
    sxy.add(x[k] * y[k]);
  }
  double den = n * sxx.value() - sq(sx.value());
  require(std::abs(den) > 0, "fit_slope: degenerate abscissae");
  return (n * sxy.value() - sx.value() * sy.value()) / den;
}

}  // namespace bernoulli
