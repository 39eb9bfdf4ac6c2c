#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "multidir/multi_dirichlet.hpp"
#include "multidir/oracle.hpp"
#include "multidir/special_functions.hpp"
#include "test_util.hpp"

using namespace multidir;

namespace {

Matrix<double> make_parents(std::vector<std::vector<double>> rows) {
  Matrix<double> m(rows.size(), rows.front().size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t k = 0; k < rows[j].size(); ++k) m(j, k) = rows[j][k];
  }
  return m;
}

// Enumerates every split matrix with the given column sums (test-local,
// recursive; independent of the oracle's odometer).
void for_each_split(const CountVector& data, std::size_t n_parents,
                    const std::function<void(const Matrix<int>&)>& fn) {
  Matrix<int> split(n_parents, data.dim(), 0);
  std::function<void(std::size_t)> columns = [&](std::size_t k) {
    if (k == data.dim()) {
      fn(split);
      return;
    }
    std::function<void(std::size_t, int)> cells = [&](std::size_t j, int remaining) {
      if (j + 1 == n_parents) {
        split(j, k) = remaining;
        columns(k + 1);
        return;
      }
      for (int v = 0; v <= remaining; ++v) {
        split(j, k) = v;
        cells(j + 1, remaining - v);
      }
    };
    cells(0, data.counts()[k]);
  };
  columns(0);
}

// Enumerates every admissible table matrix for a fixed split.
void for_each_tables(const Matrix<int>& split,
                     const std::function<void(const Matrix<int>&)>& fn) {
  Matrix<int> tables(split.rows(), split.cols(), 0);
  const std::size_t cells = split.rows() * split.cols();
  std::function<void(std::size_t)> rec = [&](std::size_t idx) {
    if (idx == cells) {
      fn(tables);
      return;
    }
    const int n = split.data()[idx];
    if (n == 0) {
      tables.data()[idx] = 0;
      rec(idx + 1);
      return;
    }
    for (int m = 1; m <= n; ++m) {
      tables.data()[idx] = m;
      rec(idx + 1);
    }
  };
  rec(0);
}

}  // namespace

TEST_CASE("MDPrior validation and collapse") {
  REQUIRE_THROWS_AS(MDPrior(Matrix<double>(0, 2)), std::invalid_argument);
  REQUIRE_THROWS_AS(MDPrior(make_parents({{1.0, 0.0}})), std::domain_error);

  const MDPrior single(make_parents({{0.4, 1.7, 2.0}}));
  REQUIRE(collapse(single).alpha() == std::vector<double>{0.4, 1.7, 2.0});

  const MDPrior halves(make_parents({{0.5, 0.5}, {0.5, 0.5}}));
  REQUIRE(collapse(halves).alpha() == std::vector<double>{1.0, 1.0});

  const MDPrior stacked(make_parents({{1, 2, 3}, {4, 5, 6}}));
  REQUIRE(collapse(stacked).alpha() == std::vector<double>{5.0, 7.0, 9.0});
}

TEST_CASE("md_log_marginal reduces to the collapsed marginal") {
  const MDPrior halves(make_parents({{0.5, 0.5}, {0.5, 0.5}}));
  REQUIRE(md_log_marginal(halves, CountVector({1, 0})) ==
          Catch::Approx(std::log(0.5)).margin(1e-14));

  // J = 1 is the plain Dirichlet-multinomial, bit for bit.
  const MDPrior single(make_parents({{1.3, 0.6}}));
  const CountVector data({3, 2});
  REQUIRE(md_log_marginal(single, data) ==
          dm_log_marginal(DirichletParams({1.3, 0.6}), data));

  const MDPrior two(make_parents({{1.0, 0.5}, {1.0, 0.5}}));
  REQUIRE(md_log_marginal(two, CountVector({1, 1})) ==
          Catch::Approx(std::log(1.0 / 6.0)).margin(1e-14));

  REQUIRE_THROWS_AS(md_log_marginal(two, CountVector({1, 1, 1})),
                    std::invalid_argument);
}

TEST_CASE("md_log_marginal depends on parents only through column sums") {
  // Swapping rows leaves the column sums bit-identical, so the marginal is
  // bit-identical as well.
  const MDPrior a(make_parents({{0.3, 1.9}, {2.2, 0.4}}));
  const MDPrior b(make_parents({{2.2, 0.4}, {0.3, 1.9}}));
  const CountVector data({3, 4});
  REQUIRE(md_log_marginal(a, data) == md_log_marginal(b, data));

  // Halving each parent into two leaves the sums exactly representable.
  const MDPrior whole(make_parents({{1.0, 0.75}}));
  const MDPrior split(make_parents({{0.5, 0.375}, {0.5, 0.375}}));
  REQUIRE(md_log_marginal(whole, data) == md_log_marginal(split, data));
}

TEST_CASE("parent_counts_log_pmf small cases") {
  {  // All-zero counts: the zero split has probability one.
    const MDPrior md(make_parents({{1.0, 2.0}, {0.5, 0.5}}));
    const CountVector data({0, 0});
    REQUIRE(parent_counts_log_pmf(md, data, ParentCounts(Matrix<int>(2, 2, 0))) == 0.0);
  }
  {  // Symmetric parents, one observation: 1/2 each way.
    const MDPrior md(make_parents({{0.8}, {0.8}}));
    const CountVector data({1});
    Matrix<int> top(2, 1, 0);
    top(0, 0) = 1;
    REQUIRE(std::exp(parent_counts_log_pmf(md, data, ParentCounts(top))) ==
            Catch::Approx(0.5).margin(1e-14));
  }
  {  // First urn draw lands on parent 1 with probability 1/4.
    const MDPrior md(make_parents({{1.0}, {3.0}}));
    const CountVector data({1});
    Matrix<int> top(2, 1, 0);
    top(0, 0) = 1;
    REQUIRE(std::exp(parent_counts_log_pmf(md, data, ParentCounts(top))) ==
            Catch::Approx(0.25).margin(1e-14));
  }
  {  // Column-sum violation.
    const MDPrior md(make_parents({{1.0}, {3.0}}));
    const CountVector data({2});
    Matrix<int> bad(2, 1, 0);
    bad(0, 0) = 1;
    REQUIRE_THROWS_AS(parent_counts_log_pmf(md, data, ParentCounts(bad)),
                      std::invalid_argument);
  }
}

TEST_CASE("parent_counts_log_pmf sums to one over all splits") {
  Rng rng(23);
  for (int n_parents = 1; n_parents <= 3; ++n_parents) {
    for (int n_categories = 1; n_categories <= 3; ++n_categories) {
      for (int rep = 0; rep < 4; ++rep) {
        Matrix<double> parents(n_parents, n_categories);
        for (double& a : parents.data()) a = 0.1 + 3.9 * rng.uniform();
        std::vector<int> counts(n_categories, 0);
        int budget = 6;
        for (int& c : counts) {
          c = static_cast<int>(rng.uniform() * (budget + 1));
          budget -= c;
        }
        const MDPrior md(std::move(parents));
        const CountVector data(counts);
        double total = 0.0;
        for_each_split(data, md.n_parents(), [&](const Matrix<int>& split) {
          total += std::exp(parent_counts_log_pmf(md, data, ParentCounts(split)));
        });
        REQUIRE(std::abs(total - 1.0) < 1e-10);
      }
    }
  }
}

TEST_CASE("expected_parent_counts closed form") {
  {  // Equal parents split evenly.
    const MDPrior md(make_parents({{1.2, 0.4}, {1.2, 0.4}}));
    const CountVector data({6, 3});
    const Matrix<double> expect = expected_parent_counts(md, data);
    REQUIRE(expect(0, 0) == Catch::Approx(3.0).margin(1e-12));
    REQUIRE(expect(1, 1) == Catch::Approx(1.5).margin(1e-12));
  }
  {  // alpha column (1, 3), n = 8: expected split (2, 6); cross-checked by
     // enumeration weighted with parent_counts_log_pmf.
    const MDPrior md(make_parents({{1.0}, {3.0}}));
    const CountVector data({8});
    const Matrix<double> expect = expected_parent_counts(md, data);
    REQUIRE(expect(0, 0) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(expect(1, 0) == Catch::Approx(6.0).margin(1e-12));
    double first_moment = 0.0;
    for_each_split(data, md.n_parents(), [&](const Matrix<int>& split) {
      first_moment +=
          split(0, 0) * std::exp(parent_counts_log_pmf(md, data, ParentCounts(split)));
    });
    REQUIRE(std::abs(first_moment - 2.0) < 1e-10);
  }
  {  // Zero counts give the zero matrix; columns always sum to n_k.
    const MDPrior md(make_parents({{0.7, 0.3}, {1.4, 2.2}, {0.5, 0.1}}));
    const Matrix<double> zero = expected_parent_counts(md, CountVector({0, 0}));
    for (double v : zero.data()) REQUIRE(v == 0.0);
    const CountVector data({5, 9});
    const Matrix<double> expect = expected_parent_counts(md, data);
    for (std::size_t k = 0; k < 2; ++k) {
      REQUIRE(std::abs(expect.column_sum(k) - data.counts()[k]) < 1e-12);
    }
  }
}

TEST_CASE("summed_table_joint_log marginalizes to the MD marginal") {
  const StirlingTable table(20);
  Rng rng(29);
  for (int rep = 0; rep < 6; ++rep) {
    const int n_categories = 1 + static_cast<int>(rng.uniform() * 3);
    Matrix<double> parents(2, n_categories);
    for (double& a : parents.data()) a = 0.2 + 2.5 * rng.uniform();
    std::vector<int> counts(n_categories);
    for (int& c : counts) c = static_cast<int>(rng.uniform() * 6);
    const MDPrior md(std::move(parents));
    const CountVector data(counts);

    std::vector<int> tables_grid(n_categories, 0);
    double acc = kNegInf;
    std::function<void(int)> rec = [&](int k) {
      if (k == n_categories) {
        acc = log_add_exp(acc, summed_table_joint_log(table, md, data, tables_grid));
        return;
      }
      for (int m = 0; m <= counts[k]; ++m) {
        tables_grid[k] = m;
        rec(k + 1);
      }
    };
    rec(0);
    REQUIRE(std::abs(acc - md_log_marginal(md, data)) < 1e-10);
  }
}

TEST_CASE("summed_table_joint_log conditionals") {
  const StirlingTable table(10);
  {  // n_k = 1 everywhere forces m_k = 1.
    const MDPrior md(make_parents({{0.9, 1.1}, {0.4, 0.6}}));
    const CountVector data({1, 1});
    const std::vector<int> forced{1, 1};
    REQUIRE(std::abs(summed_table_joint_log(table, md, data, forced) -
                     md_log_marginal(md, data)) < 1e-13);
  }
  {  // K = 1, two unit parents, n = 2: p(m=1 | n) = 1/3, p(m=2 | n) = 2/3.
    const MDPrior md(make_parents({{1.0}, {1.0}}));
    const CountVector data({2});
    const double marginal = md_log_marginal(md, data);
    const std::vector<int> one{1}, two{2};
    REQUIRE(std::exp(summed_table_joint_log(table, md, data, one) - marginal) ==
            Catch::Approx(1.0 / 3.0).margin(1e-13));
    REQUIRE(std::exp(summed_table_joint_log(table, md, data, two) - marginal) ==
            Catch::Approx(2.0 / 3.0).margin(1e-13));
    const std::vector<int> over{3};
    REQUIRE_THROWS_AS(summed_table_joint_log(table, md, data, over), std::domain_error);
  }
}

TEST_CASE("parent_tables_joint_log marginalizes to the MD marginal") {
  const StirlingTable table(10);
  const MDPrior md(make_parents({{1.0, 0.4}, {2.5, 0.8}}));
  const CountVector data({2, 1});
  double acc = kNegInf;
  for_each_split(data, md.n_parents(), [&](const Matrix<int>& split) {
    for_each_tables(split, [&](const Matrix<int>& tables) {
      acc = log_add_exp(acc, parent_tables_joint_log(table, md, data,
                                                     ParentCounts(split),
                                                     ParentTables(tables)));
    });
  });
  REQUIRE(std::abs(acc - md_log_marginal(md, data)) < 1e-10);
}

TEST_CASE("parent_tables_joint_log reductions") {
  const StirlingTable table(10);
  {  // J = 1: the split is forced and the joint equals the summed-table law.
    const MDPrior md(make_parents({{1.5, 0.7}}));
    const CountVector data({3, 2});
    Matrix<int> split(1, 2);
    split(0, 0) = 3;
    split(0, 1) = 2;
    Matrix<int> tables(1, 2);
    tables(0, 0) = 2;
    tables(0, 1) = 1;
    const std::vector<int> m{2, 1};
    REQUIRE(parent_tables_joint_log(table, md, data, ParentCounts(split),
                                    ParentTables(tables)) ==
            Catch::Approx(summed_table_joint_log(table, md, data, m)).margin(1e-13));
  }
  {  // All n'_jk in {0, 1}: the table matrix is forced to equal the split,
     // and the m'-conditional given that split is exactly one.
    const MDPrior md(make_parents({{0.6, 1.0}, {0.9, 0.3}}));
    const CountVector data({1, 1});
    Matrix<int> split(2, 2, 0);
    split(0, 0) = 1;
    split(1, 1) = 1;
    const double joint = parent_tables_joint_log(table, md, data, ParentCounts(split),
                                                 ParentTables(split));
    REQUIRE(joint == Catch::Approx(parent_counts_log_pmf(md, data, ParentCounts(split)) +
                                   md_log_marginal(md, data))
                         .margin(1e-12));
    Matrix<int> bad = split;
    bad(0, 0) = 0;  // a seated customer with no table
    REQUIRE_THROWS_AS(parent_tables_joint_log(table, md, data, ParentCounts(split),
                                              ParentTables(bad)),
                      std::invalid_argument);
  }
}

TEST_CASE("expected_parent_tables closed form") {
  {  // J = 1 reduces to expected_tables per category.
    const MDPrior md(make_parents({{1.3, 0.5}}));
    const CountVector data({4, 2});
    const Matrix<double> expect = expected_parent_tables(md, data);
    REQUIRE(expect(0, 0) == Catch::Approx(expected_tables(1.3, 4)).margin(1e-13));
    REQUIRE(expect(0, 1) == Catch::Approx(expected_tables(0.5, 2)).margin(1e-13));
  }
  {  // Symmetric parents share the single table of one observation.
    const MDPrior md(make_parents({{0.4}, {0.4}}));
    const Matrix<double> expect = expected_parent_tables(md, CountVector({1}));
    REQUIRE(expect(0, 0) == Catch::Approx(0.5).margin(1e-13));
    REQUIRE(expect(1, 0) == Catch::Approx(0.5).margin(1e-13));
  }
  {  // Unit parents, n = 2: 5/6 per parent, verified against enumeration.
    const StirlingTable table(10);
    const MDPrior md(make_parents({{1.0}, {1.0}}));
    const CountVector data({2});
    const Matrix<double> expect = expected_parent_tables(md, data);
    REQUIRE(expect(0, 0) == Catch::Approx(5.0 / 6.0).margin(1e-12));
    const double marginal = md_log_marginal(md, data);
    double first_moment = 0.0;
    for_each_split(data, md.n_parents(), [&](const Matrix<int>& split) {
      for_each_tables(split, [&](const Matrix<int>& tables) {
        first_moment += tables(0, 0) * std::exp(parent_tables_joint_log(
                                           table, md, data, ParentCounts(split),
                                           ParentTables(tables)) -
                                       marginal);
      });
    });
    REQUIRE(std::abs(first_moment - 5.0 / 6.0) < 1e-10);
  }
  {  // Column sums equal the collapsed expected_tables; the proportional and
    // digamma forms of the expectation agree.
    const MDPrior md(make_parents({{0.7, 2.1}, {1.9, 0.2}, {0.4, 1.0}}));
    const CountVector data({5, 7});
    const Matrix<double> expect = expected_parent_tables(md, data);
    const DirichletParams collapsed = collapse(md);
    for (std::size_t k = 0; k < 2; ++k) {
      const double column_total = expected_tables(collapsed.alpha()[k], data.counts()[k]);
      REQUIRE(std::abs(expect.column_sum(k) - column_total) < 1e-12);
      for (std::size_t j = 0; j < 3; ++j) {
        const double proportional =
            md.parents()(j, k) / collapsed.alpha()[k] * column_total;
        REQUIRE(std::abs(expect(j, k) - proportional) < 1e-12);
      }
    }
  }
}

TEST_CASE("expected_parent_tables fault hook shifts the result") {
  const MDPrior md(make_parents({{1.0}, {1.0}}));
  const CountVector data({2});
  const double clean = expected_parent_tables(md, data)(0, 0);
  g_expected_parent_tables_fault = 1e-3;
  const double shifted = expected_parent_tables(md, data)(0, 0);
  g_expected_parent_tables_fault = 0.0;
  REQUIRE(shifted - clean == Catch::Approx(1e-3).margin(1e-12));
}

TEST_CASE("expected values are equivariant under permutations") {
  const MDPrior md(make_parents({{0.7, 2.1, 0.3}, {1.9, 0.2, 1.1}}));
  const CountVector data({5, 2, 4});
  // Swap the two parent rows.
  const MDPrior row_swapped(make_parents({{1.9, 0.2, 1.1}, {0.7, 2.1, 0.3}}));
  // Rotate the categories left by one.
  const MDPrior col_rotated(make_parents({{2.1, 0.3, 0.7}, {0.2, 1.1, 1.9}}));
  const CountVector data_rotated({2, 4, 5});

  for (auto* fn : {&expected_parent_counts, &expected_parent_tables}) {
    const Matrix<double> base = (*fn)(md, data);
    const Matrix<double> rows = (*fn)(row_swapped, data);
    const Matrix<double> cols = (*fn)(col_rotated, data_rotated);
    for (std::size_t k = 0; k < 3; ++k) {
      REQUIRE(base(0, k) == rows(1, k));
      REQUIRE(base(1, k) == rows(0, k));
      REQUIRE(base(0, (k + 1) % 3) == cols(0, k));
      REQUIRE(base(1, (k + 1) % 3) == cols(1, k));
    }
  }
}

TEST_CASE("sample_parent_counts matches its law") {
  Rng rng(31);
  {  // No data: zero split, always.
    const MDPrior md(make_parents({{1.0, 1.0}, {1.0, 1.0}}));
    const ParentCounts split = sample_parent_counts(md, CountVector({0, 0}), rng);
    for (int v : split.counts().data()) REQUIRE(v == 0);
  }
  {  // Symmetric parents, one ball: frequency of parent 1 near 1/2.
    const MDPrior md(make_parents({{0.6}, {0.6}}));
    const CountVector data({1});
    test_util::Moments first;
    for (int i = 0; i < 100000; ++i) {
      first.add(sample_parent_counts(md, data, rng).counts()(0, 0));
    }
    REQUIRE(first.z_against(0.5) < 3.0);
  }
  {  // alpha column (1, 3), n = 8: E[n'_1] = 2.
    const MDPrior md(make_parents({{1.0}, {3.0}}));
    const CountVector data({8});
    test_util::Moments first;
    for (int i = 0; i < 100000; ++i) {
      first.add(sample_parent_counts(md, data, rng).counts()(0, 0));
    }
    REQUIRE(first.z_against(2.0) < 3.0);
  }
}

TEST_CASE("sample_parent_tables matches its law") {
  Rng rng(37);
  {  // One observation seats exactly one table at some parent.
    const MDPrior md(make_parents({{0.5, 2.0}, {1.5, 1.0}}));
    const CountVector data({1, 1});
    for (int i = 0; i < 200; ++i) {
      const auto [split, tables] = sample_parent_tables(md, data, rng);
      check_split(split, data);
      check_tables(tables, split);
      REQUIRE(tables.tables().column_sum(0) == 1);
      REQUIRE(tables.tables().column_sum(1) == 1);
    }
  }
  {  // Empirical E[m'_jk] against the closed form at J=2, K=2, alpha=0.7,
    // n=(5,3), plus the per-category totals against expected_tables.
    const MDPrior md(MDPrior(Matrix<double>(2, 2, 0.7)));
    const CountVector data({5, 3});
    const Matrix<double> closed = expected_parent_tables(md, data);
    const DirichletParams collapsed = collapse(md);
    std::vector<test_util::Moments> cells(4);
    std::vector<test_util::Moments> totals(2);
    for (int i = 0; i < 100000; ++i) {
      const auto [split, tables] = sample_parent_tables(md, data, rng);
      for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t k = 0; k < 2; ++k) {
          cells[2 * j + k].add(tables.tables()(j, k));
        }
      }
      for (std::size_t k = 0; k < 2; ++k) {
        totals[k].add(tables.tables().column_sum(k));
      }
    }
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t k = 0; k < 2; ++k) {
        REQUIRE(cells[2 * j + k].z_against(closed(j, k)) < 3.0);
      }
    }
    for (std::size_t k = 0; k < 2; ++k) {
      REQUIRE(totals[k].z_against(
                  expected_tables(collapsed.alpha()[k], data.counts()[k])) < 3.0);
    }
  }
}
