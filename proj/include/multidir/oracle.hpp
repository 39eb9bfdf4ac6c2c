#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "multidir/matrix.hpp"
#include "multidir/multi_dirichlet.hpp"
#include "multidir/random.hpp"
#include "multidir/special_functions.hpp"

// Independent ground truth for the Multi-Dirichlet formulas: exhaustive
// enumeration of auxiliary configurations and a direct urn simulator.  Every
// weight here is rebuilt from explicit log products (rising factorials and
// factorials written out as sums of logs) rather than the closed forms in
// multi_dirichlet, so a bug in the main code path cannot validate itself.
// Only special_functions and the seeded Rng are shared.

namespace multidir {

struct EnumerationBudget {
  int max_total_count = 8;
  int max_parents = 3;
  int max_categories = 3;
  double max_configurations = 1e7;
};

namespace oracle_detail {

// log n! as an explicit sum of logs; n stays tiny inside the budget.
inline double log_factorial(int n) {
  double acc = 0.0;
  for (int i = 2; i <= n; ++i) acc += std::log(static_cast<double>(i));
  return acc;
}

// ln( a (a+1) ... (a+n-1) ) as an explicit product.
inline double log_rising_product(double a, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::log(a + static_cast<double>(i));
  return acc;
}

// Number of weak compositions of n into parts parts: C(n + parts - 1, parts - 1).
inline double composition_count(int n, int parts) {
  double value = 1.0;
  for (int i = 1; i < parts; ++i) {
    value *= static_cast<double>(n + i) / static_cast<double>(i);
  }
  return value;
}

}  // namespace oracle_detail

// Streams every J x K nonnegative integer matrix whose column sums match the
// given counts, odometer-style, without materializing the list.
class CompositionEnumerator {
 public:
  CompositionEnumerator(const CountVector& data, std::size_t n_parents,
                        const EnumerationBudget& budget = {})
      : data_(data.counts()), current_(n_parents, data.dim(), 0) {
    if (n_parents == 0) {
      throw std::invalid_argument("CompositionEnumerator: need at least one parent");
    }
    if (static_cast<int>(n_parents) > budget.max_parents ||
        static_cast<int>(data.dim()) > budget.max_categories ||
        data.total() > budget.max_total_count) {
      throw std::length_error("CompositionEnumerator: case exceeds enumeration budget");
    }
    double total = 1.0;
    for (int n_k : data_) {
      total *= oracle_detail::composition_count(n_k, static_cast<int>(n_parents));
    }
    if (total > budget.max_configurations) {
      throw std::length_error("CompositionEnumerator: too many configurations");
    }
    total_compositions_ = total;
    for (std::size_t k = 0; k < data_.size(); ++k) {
      current_(0, k) = data_[k];
    }
  }

  // Total number of matrices the stream will yield.
  double total_compositions() const { return total_compositions_; }

  // Copies the current matrix and advances; returns false once exhausted.
  bool next(Matrix<int>& out) {
    if (done_) return false;
    out = current_;
    for (std::size_t k = 0; k < data_.size(); ++k) {
      if (advance_column(k)) return true;
      reset_column(k);
    }
    done_ = true;
    return true;
  }

 private:
  // Next weak composition of column k in place; false when the column wraps.
  bool advance_column(std::size_t k) {
    const std::size_t rows = current_.rows();
    std::size_t i = 0;
    while (i + 1 < rows && current_(i, k) == 0) ++i;
    if (i + 1 == rows) return false;
    const int value = current_(i, k);
    current_(i, k) = 0;
    current_(0, k) = value - 1;
    current_(i + 1, k) += 1;
    return true;
  }

  void reset_column(std::size_t k) {
    for (std::size_t j = 0; j < current_.rows(); ++j) current_(j, k) = 0;
    current_(0, k) = data_[k];
  }

  std::vector<int> data_;
  Matrix<int> current_;
  double total_compositions_ = 0.0;
  bool done_ = false;
};

// Stream of every parent-count split of the given data across n_parents
// rows, each yielded exactly once.
inline CompositionEnumerator enumerate_parent_count_compositions(
    const CountVector& data, std::size_t n_parents,
    const EnumerationBudget& budget = {}) {
  return CompositionEnumerator(data, n_parents, budget);
}

namespace oracle_detail {

// First-principles weight of one parent split: the normalizer times, per
// category, the multinomial coefficient and the parent rising factorials.
inline double split_log_weight(const MDPrior& md, const CountVector& data,
                               const Matrix<int>& split) {
  double alpha_total = 0.0;
  for (double a : md.parents().data()) alpha_total += a;
  double value = -log_rising_product(alpha_total, data.total());
  for (std::size_t k = 0; k < data.dim(); ++k) {
    value += log_factorial(data.counts()[k]);
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      value -= log_factorial(split(j, k));
      value += log_rising_product(md.parents()(j, k), split(j, k));
    }
  }
  return value;
}

// First-principles weight of one (split, tables) configuration, with the
// parent rising factorials replaced by Stirling-weighted table terms.
inline double split_tables_log_weight(const StirlingTable& table, const MDPrior& md,
                                      const CountVector& data,
                                      const Matrix<int>& split,
                                      const Matrix<int>& tables) {
  double alpha_total = 0.0;
  for (double a : md.parents().data()) alpha_total += a;
  double value = -log_rising_product(alpha_total, data.total());
  for (std::size_t k = 0; k < data.dim(); ++k) {
    value += log_factorial(data.counts()[k]);
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      const int n = split(j, k);
      const int m = tables(j, k);
      value -= log_factorial(n);
      value += table.log_stirling(n, m);
      if (m > 0) value += static_cast<double>(m) * std::log(md.parents()(j, k));
    }
  }
  return value;
}

// Applies fn to every admissible table matrix for a fixed split, where each
// cell ranges over min(1, n'_jk) .. n'_jk.
template <typename Fn>
void for_each_table_matrix(const Matrix<int>& split, Fn&& fn) {
  Matrix<int> tables(split.rows(), split.cols(), 0);
  const std::size_t cells = split.rows() * split.cols();
  for (std::size_t idx = 0; idx < cells; ++idx) {
    tables.data()[idx] = split.data()[idx] > 0 ? 1 : 0;
  }
  for (;;) {
    fn(tables);
    std::size_t idx = 0;
    for (; idx < cells; ++idx) {
      if (split.data()[idx] == 0) continue;
      if (tables.data()[idx] < split.data()[idx]) {
        ++tables.data()[idx];
        break;
      }
      tables.data()[idx] = 1;
    }
    if (idx == cells) return;
  }
}

}  // namespace oracle_detail

// ln p(n | parents) by exhaustive logsumexp over every (n', m')
// configuration; agrees with md_log_marginal within enumeration tolerance.
inline double brute_force_marginal(const MDPrior& md, const CountVector& data,
                                   const EnumerationBudget& budget = {}) {
  const StirlingTable table(data.total());
  CompositionEnumerator compositions(data, md.n_parents(), budget);
  Matrix<int> split;
  double acc = kNegInf;
  while (compositions.next(split)) {
    oracle_detail::for_each_table_matrix(split, [&](const Matrix<int>& tables) {
      acc = log_add_exp(
          acc, oracle_detail::split_tables_log_weight(table, md, data, split, tables));
    });
  }
  return acc;
}

// Same marginal through the shorter route: logsumexp over parent splits of
// the explicit Gamma-ratio weights, no table variables involved.
inline double brute_force_marginal_counts_route(const MDPrior& md,
                                                const CountVector& data,
                                                const EnumerationBudget& budget = {}) {
  CompositionEnumerator compositions(data, md.n_parents(), budget);
  Matrix<int> split;
  double acc = kNegInf;
  while (compositions.next(split)) {
    acc = log_add_exp(acc, oracle_detail::split_log_weight(md, data, split));
  }
  return acc;
}

struct ExactExpectations {
  Matrix<double> parent_counts;  // E[n'_jk]
  Matrix<double> parent_tables;  // E[m'_jk]
  std::vector<double> tables;    // E[m_k]
  double log_marginal = 0.0;
};

// Probability-weighted sums over every enumerated configuration: the ground
// truth for the closed-form expectations.
inline ExactExpectations brute_force_expectations(const MDPrior& md,
                                                  const CountVector& data,
                                                  const EnumerationBudget& budget = {}) {
  const StirlingTable table(data.total());
  const double log_z = brute_force_marginal(md, data, budget);
  ExactExpectations result{Matrix<double>(md.n_parents(), md.n_categories(), 0.0),
                           Matrix<double>(md.n_parents(), md.n_categories(), 0.0),
                           std::vector<double>(md.n_categories(), 0.0), log_z};
  CompositionEnumerator compositions(data, md.n_parents(), budget);
  Matrix<int> split;
  while (compositions.next(split)) {
    oracle_detail::for_each_table_matrix(split, [&](const Matrix<int>& tables) {
      const double w = std::exp(
          oracle_detail::split_tables_log_weight(table, md, data, split, tables) -
          log_z);
      for (std::size_t j = 0; j < md.n_parents(); ++j) {
        for (std::size_t k = 0; k < md.n_categories(); ++k) {
          result.parent_counts(j, k) += w * split(j, k);
          result.parent_tables(j, k) += w * tables(j, k);
        }
      }
      for (std::size_t k = 0; k < md.n_categories(); ++k) {
        result.tables[k] += w * tables.column_sum(k);
      }
    });
  }
  return result;
}

struct UrnStatistics {
  Matrix<double> mean_parent_counts, se_parent_counts;
  Matrix<double> mean_parent_tables, se_parent_tables;
  std::vector<double> mean_tables, se_tables;
  long reps = 0;
};

// Direct simulation of the parent-labeled urn.  When `conditioned` is given
// the per-category counts are fixed and only the table process runs; when
// absent, n_draws balls are drawn with category probability proportional to
// the current urn composition.  Reports per-cell means and standard errors.
inline UrnStatistics urn_simulate(const MDPrior& md, std::optional<CountVector> conditioned,
                                  int n_draws, long reps, Rng& rng) {
  if (reps < 100) {
    throw std::invalid_argument("urn_simulate: need reps >= 100");
  }
  if (conditioned) {
    detail::require_md_data(md, *conditioned, "urn_simulate");
  } else if (n_draws < 0) {
    throw std::invalid_argument("urn_simulate: n_draws must be >= 0");
  }
  const std::size_t n_parents = md.n_parents();
  const std::size_t n_categories = md.n_categories();
  Matrix<double> sum_counts(n_parents, n_categories, 0.0);
  Matrix<double> sum_counts_sq(n_parents, n_categories, 0.0);
  Matrix<double> sum_tables(n_parents, n_categories, 0.0);
  Matrix<double> sum_tables_sq(n_parents, n_categories, 0.0);
  std::vector<double> sum_cat(n_categories, 0.0), sum_cat_sq(n_categories, 0.0);

  std::vector<double> parent_weights(n_parents);
  std::vector<double> category_weights(n_categories);
  std::vector<int> counts_per_category(n_categories);
  Matrix<int> rep_counts(n_parents, n_categories);
  Matrix<int> rep_tables(n_parents, n_categories);
  // Table sizes and parent labels for the category being simulated.
  std::vector<int> table_size;
  std::vector<std::size_t> table_parent;

  for (long rep = 0; rep < reps; ++rep) {
    rep_counts.fill(0);
    rep_tables.fill(0);
    if (conditioned) {
      counts_per_category = conditioned->counts();
    } else {
      std::fill(counts_per_category.begin(), counts_per_category.end(), 0);
      for (std::size_t k = 0; k < n_categories; ++k) {
        category_weights[k] = md.parents().column_sum(k);
      }
      for (int i = 0; i < n_draws; ++i) {
        const std::size_t k = rng.categorical(category_weights);
        category_weights[k] += 1.0;
        ++counts_per_category[k];
      }
    }
    for (std::size_t k = 0; k < n_categories; ++k) {
      const double concentration = md.parents().column_sum(k);
      for (std::size_t j = 0; j < n_parents; ++j) {
        parent_weights[j] = md.parents()(j, k);
      }
      table_size.clear();
      table_parent.clear();
      for (int i = 0; i < counts_per_category[k]; ++i) {
        if (rng.bernoulli(concentration / (concentration + static_cast<double>(i)))) {
          const std::size_t j = rng.categorical(parent_weights);
          table_size.push_back(1);
          table_parent.push_back(j);
          ++rep_tables(j, k);
          ++rep_counts(j, k);
        } else {
          // Pick a seated customer uniformly; join that customer's table.
          int target = static_cast<int>(rng.uniform() * static_cast<double>(i));
          std::size_t t = 0;
          while (target >= table_size[t]) {
            target -= table_size[t];
            ++t;
          }
          ++table_size[t];
          ++rep_counts(table_parent[t], k);
        }
      }
    }
    for (std::size_t j = 0; j < n_parents; ++j) {
      for (std::size_t k = 0; k < n_categories; ++k) {
        const double c = rep_counts(j, k);
        const double t = rep_tables(j, k);
        sum_counts(j, k) += c;
        sum_counts_sq(j, k) += c * c;
        sum_tables(j, k) += t;
        sum_tables_sq(j, k) += t * t;
      }
    }
    for (std::size_t k = 0; k < n_categories; ++k) {
      const double m = rep_tables.column_sum(k);
      sum_cat[k] += m;
      sum_cat_sq[k] += m * m;
    }
  }

  const double n = static_cast<double>(reps);
  auto finalize = [n](double total, double total_sq) {
    const double mean = total / n;
    const double var = std::max(0.0, total_sq / n - mean * mean);
    return std::pair<double, double>(mean, std::sqrt(var / n));
  };
  UrnStatistics stats{Matrix<double>(n_parents, n_categories),
                      Matrix<double>(n_parents, n_categories),
                      Matrix<double>(n_parents, n_categories),
                      Matrix<double>(n_parents, n_categories),
                      std::vector<double>(n_categories),
                      std::vector<double>(n_categories),
                      reps};
  for (std::size_t j = 0; j < n_parents; ++j) {
    for (std::size_t k = 0; k < n_categories; ++k) {
      auto [cm, cs] = finalize(sum_counts(j, k), sum_counts_sq(j, k));
      stats.mean_parent_counts(j, k) = cm;
      stats.se_parent_counts(j, k) = cs;
      auto [tm, ts] = finalize(sum_tables(j, k), sum_tables_sq(j, k));
      stats.mean_parent_tables(j, k) = tm;
      stats.se_parent_tables(j, k) = ts;
    }
  }
  for (std::size_t k = 0; k < n_categories; ++k) {
    auto [m, s] = finalize(sum_cat[k], sum_cat_sq[k]);
    stats.mean_tables[k] = m;
    stats.se_tables[k] = s;
  }
  return stats;
}

}  // namespace multidir
