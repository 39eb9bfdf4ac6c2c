#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Log-space special functions underlying every distribution in this library:
// log-gamma, digamma, unsigned Stirling numbers of the first kind, and a
// stable log-sum-exp.  All functions are pure; StirlingTable is immutable
// after construction and safe for concurrent reads.

namespace multidir {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ln Gamma(x) for x > 0.  The argument is shifted above 8 with
// lnG(x) = lnG(x+1) - ln x, then the Stirling series is applied.
inline double log_gamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw std::domain_error("log_gamma: requires finite x > 0, got " +
                            std::to_string(x));
  }
  double shift = 0.0;
  while (x < 8.0) {
    shift += std::log(x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Coefficients B_2k / (2k (2k-1)) of the asymptotic series.
  const double series =
      inv *
      (1.0 / 12.0 +
       inv2 * (-1.0 / 360.0 +
               inv2 * (1.0 / 1260.0 +
                       inv2 * (-1.0 / 1680.0 +
                               inv2 * (1.0 / 1188.0 +
                                       inv2 * (-691.0 / 360360.0 +
                                               inv2 * (1.0 / 156.0)))))));
  constexpr double half_log_two_pi = 0.91893853320467274178;
  return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - shift;
}

// Psi(x) = d/dx ln Gamma(x) for x > 0, via the recurrence
// Psi(x) = Psi(x+1) - 1/x below 10 and the asymptotic series above.
inline double digamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw std::domain_error("digamma: requires finite x > 0, got " +
                            std::to_string(x));
  }
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Psi(x) ~ ln x - 1/(2x) - sum_k B_2k / (2k x^2k).
  const double tail =
      inv2 *
      (1.0 / 12.0 +
       inv2 * (-1.0 / 120.0 +
               inv2 * (1.0 / 252.0 +
                       inv2 * (-1.0 / 240.0 +
                               inv2 * (1.0 / 132.0 +
                                       inv2 * (-691.0 / 32760.0 +
                                               inv2 * (1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 * inv - tail;
}

// ln(exp(a) + exp(b)) without overflow; -inf acts as an absorbing zero.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// ln sum_i exp(v_i) for a non-empty sequence; exactly -inf when every
// element is -inf.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("log_sum_exp: empty input");
  }
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf || !std::isfinite(hi)) return hi;
  double total = 0.0;
  for (double v : values) total += std::exp(v - hi);
  return hi + std::log(total);
}

// Triangular table of ln s(n, m) where s(n, m) is the unsigned Stirling
// number of the first kind: the number of permutations of n elements with
// m cycles.  Everything is stored in log space; raw s(n, m) overflows
// doubles near n = 170.
//
// Argument order is (n, m) with n = draws first and m = tables second,
// matching the triangle recurrence s(n+1, m) = n s(n, m) + s(n, m-1).
class StirlingTable {
 public:
  static constexpr int kDefaultCap = 10000;

  explicit StirlingTable(int n_max, int cap = kDefaultCap) : n_max_(n_max) {
    if (n_max < 0) {
      throw std::invalid_argument("StirlingTable: n_max must be >= 0");
    }
    if (n_max > cap) {
      throw std::length_error("StirlingTable: n_max " + std::to_string(n_max) +
                              " exceeds cap " + std::to_string(cap));
    }
    const std::size_t cells =
        static_cast<std::size_t>(n_max + 1) * static_cast<std::size_t>(n_max + 2) / 2;
    entries_.assign(cells, kNegInf);
    at(0, 0) = 0.0;
    for (int n = 1; n <= n_max_; ++n) {
      const double log_nm1 = std::log(static_cast<double>(n - 1));
      for (int m = 1; m <= n; ++m) {
        const double grow = (m <= n - 1) ? log_nm1 + at(n - 1, m) : kNegInf;
        at(n, m) = log_add_exp(grow, at(n - 1, m - 1));
      }
    }
  }

  // ln s(n, m); returns -inf for m > n (no such permutation exists).
  double log_stirling(int n, int m) const {
    if (n < 0 || m < 0 || n > n_max_) {
      throw std::out_of_range("StirlingTable: query (" + std::to_string(n) +
                              ", " + std::to_string(m) + ") outside table of size " +
                              std::to_string(n_max_));
    }
    if (m > n) return kNegInf;
    return entries_[offset(n) + static_cast<std::size_t>(m)];
  }

  int n_max() const { return n_max_; }

 private:
  static std::size_t offset(int n) {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2;
  }
  double& at(int n, int m) { return entries_[offset(n) + static_cast<std::size_t>(m)]; }

  int n_max_ = 0;
  std::vector<double> entries_;
};

inline StirlingTable build_stirling_table(int n_max,
                                          int cap = StirlingTable::kDefaultCap) {
  return StirlingTable(n_max, cap);
}

}  // namespace multidir
