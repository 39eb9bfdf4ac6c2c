#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "multidir/dirichlet.hpp"
#include "multidir/matrix.hpp"
#include "multidir/random.hpp"
#include "multidir/special_functions.hpp"

// The Multi-Dirichlet (MD) prior: a Dirichlet prior whose k-th parameter is
// the column sum of a J x K matrix of parent parameters, together with the
// auxiliary-variable apparatus that attributes observed counts and urn
// tables to individual parents.  Parent-level probabilities are never
// materialized; the module works entirely through count statistics.

namespace multidir {

// Additive perturbation applied to expected_parent_tables; used only by the
// verification negative control and zero in normal operation.
inline double g_expected_parent_tables_fault = 0.0;

class MDPrior {
 public:
  explicit MDPrior(Matrix<double> parents) : parents_(std::move(parents)) {
    if (parents_.rows() == 0 || parents_.cols() == 0) {
      throw std::invalid_argument("MDPrior: need at least one parent and one category");
    }
    for (double a : parents_.data()) {
      if (!std::isfinite(a) || a <= 0.0) {
        throw std::domain_error("MDPrior: parameters must be finite and > 0");
      }
    }
  }

  const Matrix<double>& parents() const { return parents_; }
  std::size_t n_parents() const { return parents_.rows(); }
  std::size_t n_categories() const { return parents_.cols(); }

 private:
  Matrix<double> parents_;
};

// Latent split of each category count across parents; column k sums to the
// group's n_k.
class ParentCounts {
 public:
  explicit ParentCounts(Matrix<int> counts) : counts_(std::move(counts)) {
    for (int c : counts_.data()) {
      if (c < 0) throw std::domain_error("ParentCounts: entries must be >= 0");
    }
  }

  const Matrix<int>& counts() const { return counts_; }

 private:
  Matrix<int> counts_;
};

// Urn tables per parent and category; m'_jk is positive exactly when the
// matching parent count is.
class ParentTables {
 public:
  explicit ParentTables(Matrix<int> tables) : tables_(std::move(tables)) {
    for (int t : tables_.data()) {
      if (t < 0) throw std::domain_error("ParentTables: entries must be >= 0");
    }
  }

  const Matrix<int>& tables() const { return tables_; }

  // m_k = sum_j m'_jk.
  std::vector<int> category_totals() const {
    std::vector<int> totals(tables_.cols());
    for (std::size_t k = 0; k < tables_.cols(); ++k) {
      totals[k] = tables_.column_sum(k);
    }
    return totals;
  }

 private:
  Matrix<int> tables_;
};

namespace detail {

inline void require_md_data(const MDPrior& md, const CountVector& data,
                            const char* what) {
  if (md.n_categories() != data.dim()) {
    throw std::invalid_argument(std::string(what) + ": category dimension mismatch");
  }
}

}  // namespace detail

// Column-sum constraint sum_j n'_jk = n_k.
inline void check_split(const ParentCounts& split, const CountVector& data,
                        const char* what = "check_split") {
  if (split.counts().cols() != data.dim()) {
    throw std::invalid_argument(std::string(what) + ": category dimension mismatch");
  }
  for (std::size_t k = 0; k < data.dim(); ++k) {
    if (split.counts().column_sum(k) != data.counts()[k]) {
      throw std::invalid_argument(std::string(what) + ": column " + std::to_string(k) +
                                  " does not sum to the observed count");
    }
  }
}

// Table bounds: 0 <= m'_jk <= n'_jk with m'_jk = 0 iff n'_jk = 0.
inline void check_tables(const ParentTables& tables, const ParentCounts& split,
                         const char* what = "check_tables") {
  require_same_shape(tables.tables().rows(), tables.tables().cols(),
                     split.counts().rows(), split.counts().cols(), what);
  for (std::size_t j = 0; j < split.counts().rows(); ++j) {
    for (std::size_t k = 0; k < split.counts().cols(); ++k) {
      const int n = split.counts()(j, k);
      const int m = tables.tables()(j, k);
      if (m > n || (n > 0 && m == 0)) {
        throw std::invalid_argument(std::string(what) + ": invalid table count at (" +
                                    std::to_string(j) + ", " + std::to_string(k) + ")");
      }
    }
  }
}

// Column sums sum_j alpha_jk: the parameters of the collapsed Dirichlet.
inline DirichletParams collapse(const MDPrior& md) {
  std::vector<double> sums(md.n_categories());
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    sums[k] = md.parents().column_sum(k);
  }
  return DirichletParams(std::move(sums));
}

// ln p(n | parents): the MD marginal, identical to the collapsed
// Dirichlet-multinomial marginal.
inline double md_log_marginal(const MDPrior& md, const CountVector& data) {
  detail::require_md_data(md, data, "md_log_marginal");
  return dm_log_marginal(collapse(md), data);
}

// ln n_k! - sum_j ln n'_jk!.
inline double log_multinomial_coefficient(int total, std::span<const int> parts) {
  double value = log_gamma(static_cast<double>(total) + 1.0);
  for (int p : parts) {
    value -= log_gamma(static_cast<double>(p) + 1.0);
  }
  return value;
}

// ln p(n' | n, parents): the conditional law of the parent split.  Per
// category this is a Dirichlet-multinomial pmf over J parts, multinomial
// coefficient included; it sums to 1 over all valid splits.
inline double parent_counts_log_pmf(const MDPrior& md, const CountVector& data,
                                    const ParentCounts& split) {
  detail::require_md_data(md, data, "parent_counts_log_pmf");
  require_same_shape(split.counts().rows(), split.counts().cols(), md.n_parents(),
                     md.n_categories(), "parent_counts_log_pmf");
  check_split(split, data, "parent_counts_log_pmf");
  double value = 0.0;
  std::vector<int> column(md.n_parents());
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      column[j] = split.counts()(j, k);
    }
    value += log_multinomial_coefficient(data.counts()[k], column);
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      value += log_rising(md.parents()(j, k), column[j]);
    }
    value -= log_rising(md.parents().column_sum(k), data.counts()[k]);
  }
  return value;
}

// E[n'_jk] = alpha_jk / (sum_j' alpha_j'k) * n_k; columns sum to n_k up to
// rounding.
inline Matrix<double> expected_parent_counts(const MDPrior& md,
                                             const CountVector& data) {
  detail::require_md_data(md, data, "expected_parent_counts");
  Matrix<double> expect(md.n_parents(), md.n_categories());
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    const double column_sum = md.parents().column_sum(k);
    const double n_k = static_cast<double>(data.counts()[k]);
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      expect(j, k) = md.parents()(j, k) / column_sum * n_k;
    }
  }
  return expect;
}

// ln p(n, m | parents) for per-category table totals m_k: the group
// normalizer plus ln s(n_k, m_k) + m_k ln(sum_j alpha_jk) per category.
// Marginalizing over m recovers the MD marginal.
inline double summed_table_joint_log(const StirlingTable& table, const MDPrior& md,
                                     const CountVector& data,
                                     std::span<const int> category_tables) {
  detail::require_md_data(md, data, "summed_table_joint_log");
  if (category_tables.size() != data.dim()) {
    throw std::invalid_argument("summed_table_joint_log: table vector dimension mismatch");
  }
  const DirichletParams collapsed = collapse(md);
  double value = -log_rising(collapsed.sum(), data.total());
  for (std::size_t k = 0; k < data.dim(); ++k) {
    const int n_k = data.counts()[k];
    const int m_k = category_tables[k];
    if (m_k < 0 || m_k > n_k) {
      throw std::domain_error("summed_table_joint_log: need 0 <= m_k <= n_k");
    }
    value += table.log_stirling(n_k, m_k) +
             static_cast<double>(m_k) * std::log(collapsed.alpha()[k]);
  }
  return value;
}

// ln p(n, n', m' | parents): the fully disaggregated joint in which every
// parent parameter appears only through alpha_jk^(m'_jk).  Marginalizing
// over m' and then n' recovers the MD marginal.
inline double parent_tables_joint_log(const StirlingTable& table, const MDPrior& md,
                                      const CountVector& data,
                                      const ParentCounts& split,
                                      const ParentTables& tables) {
  detail::require_md_data(md, data, "parent_tables_joint_log");
  require_same_shape(split.counts().rows(), split.counts().cols(), md.n_parents(),
                     md.n_categories(), "parent_tables_joint_log");
  check_split(split, data, "parent_tables_joint_log");
  check_tables(tables, split, "parent_tables_joint_log");
  double value = -log_rising(collapse(md).sum(), data.total());
  std::vector<int> column(md.n_parents());
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      column[j] = split.counts()(j, k);
    }
    value += log_multinomial_coefficient(data.counts()[k], column);
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      const int m = tables.tables()(j, k);
      value += table.log_stirling(column[j], m);
      if (m > 0) {
        value += static_cast<double>(m) * std::log(md.parents()(j, k));
      }
    }
  }
  return value;
}

// E[m'_jk] = alpha_jk (Psi(A_k + n_k) - Psi(A_k)) with A_k the collapsed
// column sum; columns sum to the collapsed expected_tables.
inline Matrix<double> expected_parent_tables(const MDPrior& md,
                                             const CountVector& data) {
  detail::require_md_data(md, data, "expected_parent_tables");
  Matrix<double> expect(md.n_parents(), md.n_categories());
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    const double column_sum = md.parents().column_sum(k);
    const double gap = digamma(column_sum + static_cast<double>(data.counts()[k])) -
                       digamma(column_sum);
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      expect(j, k) = md.parents()(j, k) * gap + g_expected_parent_tables_fault;
    }
  }
  return expect;
}

// Draw of the parent split: per category, a J-color Polya urn seeded with
// the parent column and run for n_k draws.
inline ParentCounts sample_parent_counts(const MDPrior& md, const CountVector& data,
                                         Rng& rng) {
  detail::require_md_data(md, data, "sample_parent_counts");
  Matrix<int> counts(md.n_parents(), md.n_categories(), 0);
  std::vector<double> weights(md.n_parents());
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      weights[j] = md.parents()(j, k);
    }
    for (int i = 0; i < data.counts()[k]; ++i) {
      const std::size_t j = rng.categorical(weights);
      weights[j] += 1.0;
      ++counts(j, k);
    }
  }
  return ParentCounts(std::move(counts));
}

// Joint draw of (n', m'): per category a Chinese restaurant process with
// concentration A_k; each new table picks parent j with probability
// alpha_jk / A_k and customers at parent-j tables accumulate into n'_jk.
inline std::pair<ParentCounts, ParentTables> sample_parent_tables(
    const MDPrior& md, const CountVector& data, Rng& rng) {
  detail::require_md_data(md, data, "sample_parent_tables");
  Matrix<int> counts(md.n_parents(), md.n_categories(), 0);
  Matrix<int> tables(md.n_parents(), md.n_categories(), 0);
  std::vector<double> column(md.n_parents());
  std::vector<std::size_t> table_parent;
  std::vector<std::size_t> customer_table;
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    for (std::size_t j = 0; j < md.n_parents(); ++j) {
      column[j] = md.parents()(j, k);
    }
    const double concentration = md.parents().column_sum(k);
    table_parent.clear();
    customer_table.clear();
    const int n_k = data.counts()[k];
    for (int i = 0; i < n_k; ++i) {
      const double p_new = concentration / (concentration + static_cast<double>(i));
      if (rng.bernoulli(p_new)) {
        const std::size_t j = rng.categorical(column);
        customer_table.push_back(table_parent.size());
        table_parent.push_back(j);
        ++tables(j, k);
        ++counts(j, k);
      } else {
        // Joining a table with probability proportional to its size is the
        // same as joining the table of a uniformly chosen seated customer.
        const std::size_t buddy =
            static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        const std::size_t t = customer_table[std::min(buddy, customer_table.size() - 1)];
        customer_table.push_back(t);
        ++counts(table_parent[t], k);
      }
    }
  }
  return {ParentCounts(std::move(counts)), ParentTables(std::move(tables))};
}

}  // namespace multidir
