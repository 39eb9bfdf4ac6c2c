#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "multidir/random.hpp"
#include "multidir/special_functions.hpp"

// Plain Dirichlet-multinomial machinery: marginals, posteriors, aggregation,
// the table-count distribution with its expectation, and samplers.  The
// marginal convention is sequence-level throughout: no multinomial
// coefficient, i.e. the probability of one ordered sample with the given
// counts.

namespace multidir {

class DirichletParams {
 public:
  explicit DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.empty()) {
      throw std::invalid_argument("DirichletParams: need at least one component");
    }
    for (double a : alpha_) {
      if (!std::isfinite(a) || a <= 0.0) {
        throw std::domain_error("DirichletParams: components must be finite and > 0");
      }
    }
  }

  const std::vector<double>& alpha() const { return alpha_; }
  std::size_t dim() const { return alpha_.size(); }
  double sum() const { return std::accumulate(alpha_.begin(), alpha_.end(), 0.0); }

 private:
  std::vector<double> alpha_;
};

class CountVector {
 public:
  explicit CountVector(std::vector<int> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) {
      throw std::invalid_argument("CountVector: need at least one component");
    }
    for (int c : counts_) {
      if (c < 0) throw std::domain_error("CountVector: counts must be >= 0");
    }
  }

  const std::vector<int>& counts() const { return counts_; }
  std::size_t dim() const { return counts_.size(); }
  int total() const { return std::accumulate(counts_.begin(), counts_.end(), 0); }

 private:
  std::vector<int> counts_;
};

class SimplexVector {
 public:
  explicit SimplexVector(std::vector<double> theta) : theta_(std::move(theta)) {
    if (theta_.empty()) {
      throw std::invalid_argument("SimplexVector: need at least one component");
    }
    double total = 0.0;
    for (double t : theta_) {
      if (!std::isfinite(t) || t < 0.0) {
        throw std::domain_error("SimplexVector: components must be finite and >= 0");
      }
      total += t;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::domain_error("SimplexVector: components must sum to 1, got " +
                              std::to_string(total));
    }
  }

  const std::vector<double>& theta() const { return theta_; }
  std::size_t dim() const { return theta_.size(); }

 private:
  std::vector<double> theta_;
};

namespace detail {

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

// ln( Gamma(a + n) / Gamma(a) ), the log rising factorial.  Small n is
// evaluated as an explicit sum of logs, which is cheaper and slightly more
// accurate than differencing two log-gammas.
inline double log_rising(double a, int n) {
  if (n < 0) throw std::domain_error("log_rising: n must be >= 0");
  if (!std::isfinite(a) || a <= 0.0) {
    throw std::domain_error("log_rising: a must be finite and > 0");
  }
  if (n == 0) return 0.0;
  if (n <= 32) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::log(a + static_cast<double>(i));
    return acc;
  }
  return log_gamma(a + static_cast<double>(n)) - log_gamma(a);
}

// ln p(n | alpha): the sequence-level Dirichlet-multinomial marginal.
inline double dm_log_marginal(const DirichletParams& prior, const CountVector& data) {
  detail::require_same_dim(prior.dim(), data.dim(), "dm_log_marginal");
  double value = -log_rising(prior.sum(), data.total());
  for (std::size_t k = 0; k < prior.dim(); ++k) {
    value += log_rising(prior.alpha()[k], data.counts()[k]);
  }
  return value;
}

inline DirichletParams dm_posterior(const DirichletParams& prior,
                                    const CountVector& data) {
  detail::require_same_dim(prior.dim(), data.dim(), "dm_posterior");
  std::vector<double> post(prior.dim());
  for (std::size_t k = 0; k < prior.dim(); ++k) {
    post[k] = prior.alpha()[k] + static_cast<double>(data.counts()[k]);
  }
  return DirichletParams(std::move(post));
}

using Partition = std::vector<std::vector<std::size_t>>;

// Sums parameters over the blocks of a partition of {0..K-1}; the result is
// the parameter vector of the aggregated Dirichlet.
inline DirichletParams aggregate(const DirichletParams& params,
                                 const Partition& blocks) {
  std::vector<char> seen(params.dim(), 0);
  std::vector<double> merged;
  merged.reserve(blocks.size());
  for (const auto& block : blocks) {
    if (block.empty()) {
      throw std::invalid_argument("aggregate: empty block");
    }
    double total = 0.0;
    for (std::size_t idx : block) {
      if (idx >= params.dim()) {
        throw std::invalid_argument("aggregate: index out of range");
      }
      if (seen[idx]) {
        throw std::invalid_argument("aggregate: duplicated index " + std::to_string(idx));
      }
      seen[idx] = 1;
      total += params.alpha()[idx];
    }
    merged.push_back(total);
  }
  for (std::size_t k = 0; k < params.dim(); ++k) {
    if (!seen[k]) {
      throw std::invalid_argument("aggregate: index " + std::to_string(k) +
                                  " missing from partition");
    }
  }
  return DirichletParams(std::move(merged));
}

// One draw from Dir(alpha) via normalized gamma variates.
inline SimplexVector sample_dirichlet(const DirichletParams& params, Rng& rng) {
  std::vector<double> draw(params.dim());
  for (;;) {
    double total = 0.0;
    for (std::size_t k = 0; k < params.dim(); ++k) {
      draw[k] = rng.gamma(params.alpha()[k]);
      total += draw[k];
    }
    if (total > 0.0) {
      for (double& v : draw) v /= total;
      return SimplexVector(std::move(draw));
    }
  }
}

// ln p(m | n, alpha) for the table-count (Chinese restaurant) distribution:
// ln s(n, m) + m ln alpha - ln(alpha^(n)), where alpha^(n) is the rising
// factorial.  p(0 | 0, alpha) = 1.
inline double table_count_log_pmf(const StirlingTable& table, double alpha, int n,
                                  int m) {
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw std::domain_error("table_count_log_pmf: alpha must be > 0");
  }
  if (n < 0 || m < 0 || m > n) {
    throw std::domain_error("table_count_log_pmf: need 0 <= m <= n");
  }
  if (n == 0) return 0.0;
  return table.log_stirling(n, m) + static_cast<double>(m) * std::log(alpha) -
         log_rising(alpha, n);
}

// E[m] = alpha (Psi(alpha + n) - Psi(alpha)); 0 when n = 0 and within
// [min(1, n), n] otherwise.
inline double expected_tables(double alpha, int n) {
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw std::domain_error("expected_tables: alpha must be > 0");
  }
  if (n < 0) throw std::domain_error("expected_tables: n must be >= 0");
  return alpha * (digamma(alpha + static_cast<double>(n)) - digamma(alpha));
}

// Table-count draw as a sum of independent Bernoulli(alpha / (alpha + i - 1))
// indicators, one per customer; O(n) and needs no Stirling table.
inline int sample_table_count_crt(double alpha, int n, Rng& rng) {
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw std::domain_error("sample_table_count_crt: alpha must be > 0");
  }
  if (n < 0) throw std::domain_error("sample_table_count_crt: n must be >= 0");
  int tables = 0;
  for (int i = 1; i <= n; ++i) {
    if (rng.bernoulli(alpha / (alpha + static_cast<double>(i - 1)))) ++tables;
  }
  return tables;
}

// Table-count draw by inverse cdf over the exact pmf; usable whenever n fits
// the Stirling table and cross-checked against the Bernoulli construction.
inline int sample_table_count_by_inversion(const StirlingTable& table, double alpha,
                                           int n, Rng& rng) {
  if (n == 0) return 0;
  const double u = rng.uniform();
  double cum = 0.0;
  for (int m = 1; m <= n; ++m) {
    cum += std::exp(table_count_log_pmf(table, alpha, n, m));
    if (u < cum) return m;
  }
  return n;
}

// ln Dir(theta | gamma).  Components with gamma_k = 1 contribute no theta
// term, so boundary zeros stay finite under the uniform prior.
inline double log_dirichlet_pdf(const SimplexVector& theta,
                                std::span<const double> gamma) {
  detail::require_same_dim(theta.dim(), gamma.size(), "log_dirichlet_pdf");
  double gamma_sum = 0.0;
  double value = 0.0;
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (!(gamma[k] > 0.0)) {
      throw std::domain_error("log_dirichlet_pdf: gamma must be > 0");
    }
    gamma_sum += gamma[k];
    value -= log_gamma(gamma[k]);
    if (gamma[k] != 1.0) {
      value += (gamma[k] - 1.0) * std::log(theta.theta()[k]);
    }
  }
  return value + log_gamma(gamma_sum);
}

}  // namespace multidir
