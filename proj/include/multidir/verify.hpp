#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "multidir/dirichlet.hpp"
#include "multidir/matrix.hpp"
#include "multidir/multi_dirichlet.hpp"
#include "multidir/oracle.hpp"
#include "multidir/random.hpp"
#include "multidir/special_functions.hpp"

// Self-contained verification suite: every closed form in the library is
// checked against the enumeration oracle, the urn simulator, or a classical
// identity.  Each check reports its measured error against a frozen
// tolerance; the suite is deterministic given the seed.

namespace multidir {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  long cases = 0;
  std::string note;
};

namespace verify_detail {

inline CheckResult make_result(std::string name, double measured, double tolerance,
                               long cases, std::string note = "") {
  CheckResult r;
  r.name = std::move(name);
  r.measured = measured;
  r.tolerance = tolerance;
  r.pass = measured <= tolerance;
  r.cases = cases;
  r.note = std::move(note);
  return r;
}

// All count vectors of dimension dim with total at most max_total.
inline std::vector<std::vector<int>> all_count_vectors(int dim, int max_total) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(dim, 0);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == dim) {
      out.push_back(current);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      current[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  rec(rec, 0, max_total);
  return out;
}

struct RandomCase {
  Matrix<double> parents;
  std::vector<int> counts;
};

inline RandomCase random_case(Rng& rng, const EnumerationBudget& budget) {
  const int n_parents = 1 + static_cast<int>(rng.uniform() * budget.max_parents);
  const int n_categories = 1 + static_cast<int>(rng.uniform() * budget.max_categories);
  RandomCase c{Matrix<double>(n_parents, n_categories), std::vector<int>(n_categories, 0)};
  for (double& a : c.parents.data()) a = 0.1 + 3.9 * rng.uniform();
  int remaining = budget.max_total_count;
  for (int k = 0; k < n_categories; ++k) {
    c.counts[k] = static_cast<int>(rng.uniform() * (remaining + 1));
    remaining -= c.counts[k];
  }
  return c;
}

}  // namespace verify_detail

// Checks 1-3: special-function identities.
inline std::vector<CheckResult> verify_special_functions() {
  std::vector<CheckResult> results;

  {  // Row sums: sum_m s(n, m) = n!.
    const int n_max = 50;
    const StirlingTable table(n_max);
    double worst = 0.0;
    std::vector<double> row;
    for (int n = 0; n <= n_max; ++n) {
      row.clear();
      for (int m = 0; m <= n; ++m) row.push_back(table.log_stirling(n, m));
      worst = std::max(worst, std::abs(log_sum_exp(row) -
                                       log_gamma(static_cast<double>(n) + 1.0)));
    }
    results.push_back(verify_detail::make_result("stirling_row_sums", worst, 1e-9,
                                                 n_max + 1));
  }

  {  // sum_m s(n, m) alpha^m = alpha^(n), relative error in log space.
    const StirlingTable table(20);
    double worst = 0.0;
    long cases = 0;
    std::vector<double> terms;
    for (double alpha : {0.1, 0.5, 1.0, 2.0, 10.0}) {
      for (int n = 1; n <= 20; ++n) {
        terms.clear();
        for (int m = 0; m <= n; ++m) {
          terms.push_back(table.log_stirling(n, m) + m * std::log(alpha));
        }
        const double lhs = log_sum_exp(terms);
        const double rhs = log_gamma(alpha + n) - log_gamma(alpha);
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        ++cases;
      }
    }
    results.push_back(
        verify_detail::make_result("stirling_rising_factorial_identity", worst, 1e-8,
                                   cases));
  }

  {  // Central finite difference of log_gamma matches digamma.
    double worst = 0.0;
    const double h = 1e-5;
    for (double x : {0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
      const double fd = (log_gamma(x + h) - log_gamma(x - h)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - digamma(x)));
    }
    results.push_back(
        verify_detail::make_result("digamma_is_log_gamma_derivative", worst, 1e-5, 6));
  }
  return results;
}

// Check 4: the conditional split pmf sums to one over every valid split.
inline CheckResult verify_disaggregation_normalization(const EnumerationBudget& budget,
                                                       std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  long cases = 0;
  const int max_parents = std::min(3, budget.max_parents);
  const int max_categories = std::min(3, budget.max_categories);
  const int max_total = std::min(6, budget.max_total_count);
  Matrix<int> split;
  for (int n_parents = 1; n_parents <= max_parents; ++n_parents) {
    for (int n_categories = 1; n_categories <= max_categories; ++n_categories) {
      for (const auto& counts :
           verify_detail::all_count_vectors(n_categories, max_total)) {
        Matrix<double> parents(n_parents, n_categories);
        for (double& a : parents.data()) a = 0.1 + 3.9 * rng.uniform();
        const MDPrior md(std::move(parents));
        const CountVector data(counts);
        CompositionEnumerator compositions(data, md.n_parents(), budget);
        double acc = kNegInf;
        while (compositions.next(split)) {
          acc = log_add_exp(acc, parent_counts_log_pmf(md, data, ParentCounts(split)));
        }
        worst = std::max(worst, std::abs(std::exp(acc) - 1.0));
        ++cases;
      }
    }
  }
  return verify_detail::make_result(
      "disaggregation_normalization", worst, 1e-10, cases,
      budget.max_total_count == 0 ? "vacuous: only empty count vectors in budget" : "");
}

struct EnumerationComparison {
  CheckResult marginal_table_route;
  CheckResult marginal_counts_route;
  CheckResult expected_parent_counts;
  CheckResult expected_parent_tables;
  CheckResult expected_tables;
};

// Checks 5-9: closed forms against exhaustive enumeration on a randomized
// small grid (50 cases by default).
inline EnumerationComparison verify_against_enumeration(const EnumerationBudget& budget,
                                                        std::uint64_t seed,
                                                        int n_cases = 50) {
  Rng rng(seed);
  double worst_marginal_tables = 0.0;
  double worst_marginal_counts = 0.0;
  double worst_counts = 0.0;
  double worst_tables = 0.0;
  double worst_category_tables = 0.0;
  for (int i = 0; i < n_cases; ++i) {
    const auto c = verify_detail::random_case(rng, budget);
    const MDPrior md(c.parents);
    const CountVector data(c.counts);

    const double closed = md_log_marginal(md, data);
    worst_marginal_tables =
        std::max(worst_marginal_tables,
                 std::abs(brute_force_marginal(md, data, budget) - closed));
    worst_marginal_counts =
        std::max(worst_marginal_counts,
                 std::abs(brute_force_marginal_counts_route(md, data, budget) - closed));

    const ExactExpectations exact = brute_force_expectations(md, data, budget);
    const Matrix<double> counts_closed = expected_parent_counts(md, data);
    const Matrix<double> tables_closed = expected_parent_tables(md, data);
    for (std::size_t idx = 0; idx < counts_closed.data().size(); ++idx) {
      worst_counts = std::max(
          worst_counts,
          std::abs(counts_closed.data()[idx] - exact.parent_counts.data()[idx]));
      worst_tables = std::max(
          worst_tables,
          std::abs(tables_closed.data()[idx] - exact.parent_tables.data()[idx]));
    }
    const DirichletParams collapsed = collapse(md);
    for (std::size_t k = 0; k < md.n_categories(); ++k) {
      worst_category_tables =
          std::max(worst_category_tables,
                   std::abs(expected_tables(collapsed.alpha()[k], data.counts()[k]) -
                            exact.tables[k]));
    }
  }
  const std::string note =
      budget.max_total_count == 0 ? "vacuous: only empty count vectors in budget" : "";
  EnumerationComparison out{
      verify_detail::make_result("marginal_vs_enumeration_table_route",
                                 worst_marginal_tables, 1e-9, n_cases, note),
      verify_detail::make_result("marginal_vs_enumeration_counts_route",
                                 worst_marginal_counts, 1e-9, n_cases, note),
      verify_detail::make_result("expected_parent_counts_vs_enumeration", worst_counts,
                                 1e-9, n_cases, note),
      verify_detail::make_result("expected_parent_tables_vs_enumeration", worst_tables,
                                 1e-9, n_cases, note),
      verify_detail::make_result("expected_tables_vs_enumeration",
                                 worst_category_tables, 1e-9, n_cases, note)};
  return out;
}

// Check 10: urn means against the closed forms for two fixed configurations,
// in units of the simulation standard error.
inline std::vector<CheckResult> verify_urn_statistics(std::uint64_t seed, long reps) {
  std::vector<CheckResult> results;
  {
    Rng rng(seed);
    Matrix<double> parents(2, 2, 0.7);
    const MDPrior md(std::move(parents));
    const CountVector data(std::vector<int>{5, 3});
    const UrnStatistics stats = urn_simulate(md, data, 0, reps, rng);
    const Matrix<double> closed = expected_parent_tables(md, data);
    double worst = 0.0;
    for (std::size_t idx = 0; idx < closed.data().size(); ++idx) {
      worst = std::max(worst,
                       std::abs(stats.mean_parent_tables.data()[idx] -
                                closed.data()[idx]) /
                           stats.se_parent_tables.data()[idx]);
    }
    results.push_back(verify_detail::make_result("urn_expected_parent_tables_z", worst,
                                                 3.0, reps));
  }
  {
    Rng rng(seed + 1);
    Matrix<double> parents(2, 1);
    parents(0, 0) = 1.0;
    parents(1, 0) = 3.0;
    const MDPrior md(std::move(parents));
    const CountVector data(std::vector<int>{8});
    const UrnStatistics stats = urn_simulate(md, data, 0, reps, rng);
    const Matrix<double> closed = expected_parent_counts(md, data);
    double worst = 0.0;
    for (std::size_t idx = 0; idx < closed.data().size(); ++idx) {
      worst = std::max(worst,
                       std::abs(stats.mean_parent_counts.data()[idx] -
                                closed.data()[idx]) /
                           stats.se_parent_counts.data()[idx]);
    }
    results.push_back(verify_detail::make_result("urn_expected_parent_counts_z", worst,
                                                 3.0, reps));
  }
  return results;
}

// Check 11: aggregating Dir(1,2,3) samples over the blocks {0}, {1,2}
// reproduces Dir(1,5) means and variances.
inline CheckResult verify_aggregation_moments(std::uint64_t seed, long reps) {
  Rng rng(seed);
  const DirichletParams params(std::vector<double>{1.0, 2.0, 3.0});
  const double target_mean[2] = {1.0 / 6.0, 5.0 / 6.0};
  const double target_var = 5.0 / 252.0;
  double sum[2] = {0.0, 0.0};
  double sum_sq[2] = {0.0, 0.0};
  double sum_q[2] = {0.0, 0.0};   // squared deviations from the target mean
  double sum_q2[2] = {0.0, 0.0};  // and their squares, for the variance SE
  for (long i = 0; i < reps; ++i) {
    const SimplexVector draw = sample_dirichlet(params, rng);
    const double merged[2] = {draw.theta()[0], draw.theta()[1] + draw.theta()[2]};
    for (int c = 0; c < 2; ++c) {
      sum[c] += merged[c];
      sum_sq[c] += merged[c] * merged[c];
      const double q = (merged[c] - target_mean[c]) * (merged[c] - target_mean[c]);
      sum_q[c] += q;
      sum_q2[c] += q * q;
    }
  }
  const double n = static_cast<double>(reps);
  double worst = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double mean = sum[c] / n;
    const double var = sum_sq[c] / n - mean * mean;
    const double se_mean = std::sqrt(var / n);
    const double q_mean = sum_q[c] / n;
    const double q_var = sum_q2[c] / n - q_mean * q_mean;
    const double se_var = std::sqrt(q_var / n);
    worst = std::max(worst, std::abs(mean - target_mean[c]) / se_mean);
    worst = std::max(worst, std::abs(q_mean - target_var) / se_var);
  }
  return verify_detail::make_result("aggregation_moments_z", worst, 3.0, reps);
}

// Check 12: chi-square goodness of fit of the Bernoulli-sum table sampler
// against the exact pmf at alpha = 1, n = 10 (bins 1..7 plus a merged tail;
// the 0.999 quantile of chi-square with 7 degrees of freedom is frozen).
inline CheckResult verify_crt_goodness_of_fit(std::uint64_t seed, long reps) {
  Rng rng(seed);
  const double alpha = 1.0;
  const int n = 10;
  const StirlingTable table(n);
  std::vector<long> observed(n + 1, 0);
  for (long i = 0; i < reps; ++i) {
    ++observed[sample_table_count_crt(alpha, n, rng)];
  }
  constexpr int kTailStart = 8;
  double statistic = 0.0;
  double tail_observed = 0.0;
  double tail_expected = 0.0;
  for (int m = 1; m <= n; ++m) {
    const double expected =
        static_cast<double>(reps) * std::exp(table_count_log_pmf(table, alpha, n, m));
    if (m < kTailStart) {
      statistic += (observed[m] - expected) * (observed[m] - expected) / expected;
    } else {
      tail_observed += static_cast<double>(observed[m]);
      tail_expected += expected;
    }
  }
  statistic += (tail_observed - tail_expected) * (tail_observed - tail_expected) /
               tail_expected;
  constexpr double kChiSquare999Df7 = 24.321886347856854;
  return verify_detail::make_result("crt_sampler_chi_square", statistic,
                                    kChiSquare999Df7, reps);
}

// The full suite, in report order.
inline std::vector<CheckResult> run_verification(const EnumerationBudget& budget,
                                                 std::uint64_t seed,
                                                 long urn_reps = 100000) {
  std::vector<CheckResult> results = verify_special_functions();
  results.push_back(verify_disaggregation_normalization(budget, seed));
  const EnumerationComparison comparison = verify_against_enumeration(budget, seed + 1);
  results.push_back(comparison.marginal_table_route);
  results.push_back(comparison.marginal_counts_route);
  results.push_back(comparison.expected_parent_counts);
  results.push_back(comparison.expected_parent_tables);
  results.push_back(comparison.expected_tables);
  for (CheckResult& r : verify_urn_statistics(seed + 2, urn_reps)) {
    results.push_back(std::move(r));
  }
  results.push_back(verify_aggregation_moments(seed + 3, urn_reps));
  results.push_back(verify_crt_goodness_of_fit(seed + 4, urn_reps));
  return results;
}

}  // namespace multidir
