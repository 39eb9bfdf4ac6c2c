#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "multidir/dirichlet.hpp"
#include "multidir/matrix.hpp"
#include "multidir/multi_dirichlet.hpp"
#include "multidir/random.hpp"

// Reference hierarchical model: D groups of counts share one Multi-Dirichlet
// prior built from J parents, each parent factored into a simplex mean and a
// positive precision (alpha_jk = b_j beta_jk).  Inference is collapsed: only
// counts and auxiliary table statistics are tracked, with two interchangeable
// sweep schemes (sampled tables = Gibbs, expected tables = deterministic).

namespace multidir {

enum class UpdateMode { kSample, kExpectation };
enum class Scheme { kGibbs, kExpectation };

struct ParentSpec {
  SimplexVector mean;              // beta_j
  double precision;                // b_j
  std::vector<double> mean_hyper;  // gamma_j, Dirichlet hyperprior on beta_j
  double precision_shape;          // a_j, Gamma hyperprior shape
  double precision_rate;           // r_j, Gamma hyperprior rate
};

// Parent at its prior mean: beta_j = normalized gamma_j, b_j = a_j / r_j.
inline ParentSpec prior_parent(std::vector<double> mean_hyper, double shape = 1.0,
                               double rate = 1.0) {
  double total = 0.0;
  for (double g : mean_hyper) {
    if (!(g > 0.0)) throw std::domain_error("prior_parent: mean_hyper must be > 0");
    total += g;
  }
  std::vector<double> mean(mean_hyper.size());
  for (std::size_t k = 0; k < mean.size(); ++k) mean[k] = mean_hyper[k] / total;
  return ParentSpec{SimplexVector(std::move(mean)), shape / rate,
                    std::move(mean_hyper), shape, rate};
}

struct GroupData {
  CountVector counts;
  int id = 0;
};

namespace hierarchy_detail {

// Parameters can round to zero when a sampled mean component underflows;
// the floor keeps the MDPrior constructible without moving any mass that
// matters.
inline constexpr double kAlphaFloor = 1e-300;

inline Matrix<double> parent_parameters(const std::vector<ParentSpec>& parents) {
  const std::size_t n_parents = parents.size();
  const std::size_t n_categories = parents.front().mean.dim();
  Matrix<double> alpha(n_parents, n_categories);
  for (std::size_t j = 0; j < n_parents; ++j) {
    for (std::size_t k = 0; k < n_categories; ++k) {
      alpha(j, k) =
          std::max(parents[j].precision * parents[j].mean.theta()[k], kAlphaFloor);
    }
  }
  return alpha;
}

}  // namespace hierarchy_detail

// One inference problem: parents, groups, per-group auxiliary statistics and
// the cached parameter sums.  Owned by a single execution context during a
// sweep; independent chains use independent states and Rng streams.
struct ModelState {
  std::vector<ParentSpec> parents;
  std::vector<GroupData> groups;
  std::vector<Matrix<double>> group_parent_counts;  // n'_d, expected or sampled
  std::vector<Matrix<double>> group_parent_tables;  // m'_d, expected or sampled
  Matrix<double> table_totals;                      // T_jk = sum_d m'_djk
  std::vector<double> scale_aux;                    // w_d in (0,1), unused when n_d = 0
  Matrix<double> alpha;                             // cached b_j beta_jk
  int recompute_interval = 1;
  long iteration = 0;
  std::vector<double> log_joint_trace;
  bool aux_ready = false;
  bool scale_ready = false;

  ModelState(std::vector<ParentSpec> parent_specs, std::vector<GroupData> group_data,
             int recompute_every = 1)
      : parents(std::move(parent_specs)),
        groups(std::move(group_data)),
        recompute_interval(recompute_every) {
    if (parents.empty()) {
      throw std::invalid_argument("ModelState: need at least one parent");
    }
    if (recompute_interval < 1) {
      throw std::invalid_argument("ModelState: recompute interval must be >= 1");
    }
    const std::size_t n_categories = parents.front().mean.dim();
    for (const ParentSpec& p : parents) {
      if (p.mean.dim() != n_categories || p.mean_hyper.size() != n_categories) {
        throw std::invalid_argument("ModelState: parent dimension mismatch");
      }
      if (!(p.precision > 0.0) || !(p.precision_shape > 0.0) ||
          !(p.precision_rate > 0.0)) {
        throw std::domain_error("ModelState: precisions and hyperparameters must be > 0");
      }
      for (double g : p.mean_hyper) {
        if (!(g > 0.0)) throw std::domain_error("ModelState: mean_hyper must be > 0");
      }
    }
    bool any_counts = false;
    for (const GroupData& g : groups) {
      if (g.counts.dim() != n_categories) {
        throw std::invalid_argument("ModelState: group dimension mismatch");
      }
      if (g.counts.total() > 0) any_counts = true;
    }
    group_parent_counts.assign(groups.size(),
                               Matrix<double>(parents.size(), n_categories, 0.0));
    group_parent_tables.assign(groups.size(),
                               Matrix<double>(parents.size(), n_categories, 0.0));
    table_totals = Matrix<double>(parents.size(), n_categories, 0.0);
    scale_aux.assign(groups.size(), 0.0);
    aux_ready = !any_counts;
    scale_ready = !any_counts;
    refresh_parameter_cache();
  }

  std::size_t n_parents() const { return parents.size(); }
  std::size_t n_categories() const { return parents.front().mean.dim(); }
  std::size_t n_groups() const { return groups.size(); }

  // Sum of parent precisions: the collapsed total concentration.
  double total_precision() const {
    double c = 0.0;
    for (const ParentSpec& p : parents) c += p.precision;
    return c;
  }

  void refresh_parameter_cache() {
    alpha = hierarchy_detail::parent_parameters(parents);
  }

  MDPrior cached_prior() const { return MDPrior(alpha); }
};

// Fills the auxiliary statistics with their closed-form expectations under
// the cached parameters and refreshes the per-parent totals.
inline void accumulate_expected_tables(ModelState& state) {
  const MDPrior prior = state.cached_prior();
  state.table_totals.fill(0.0);
  for (std::size_t d = 0; d < state.n_groups(); ++d) {
    state.group_parent_counts[d] = expected_parent_counts(prior, state.groups[d].counts);
    state.group_parent_tables[d] = expected_parent_tables(prior, state.groups[d].counts);
    for (std::size_t i = 0; i < state.table_totals.data().size(); ++i) {
      state.table_totals.data()[i] += state.group_parent_tables[d].data()[i];
    }
  }
  state.aux_ready = true;
}

// Gibbs alternative: integer-valued (n', m') draws per group.
inline void sample_tables_sweep(ModelState& state, Rng& rng) {
  const MDPrior prior = state.cached_prior();
  state.table_totals.fill(0.0);
  for (std::size_t d = 0; d < state.n_groups(); ++d) {
    auto [split, tables] = sample_parent_tables(prior, state.groups[d].counts, rng);
    for (std::size_t i = 0; i < state.table_totals.data().size(); ++i) {
      state.group_parent_counts[d].data()[i] = split.counts().data()[i];
      state.group_parent_tables[d].data()[i] = tables.tables().data()[i];
      state.table_totals.data()[i] += state.group_parent_tables[d].data()[i];
    }
  }
  state.aux_ready = true;
}

namespace hierarchy_detail {

inline void require_aux(const ModelState& state, const char* what) {
  if (!state.aux_ready) {
    throw std::logic_error(std::string(what) + ": auxiliary statistics not populated");
  }
}

inline double clamp_unit_open(double w) {
  return std::clamp(w, 1e-300, 0.9999999999999999);
}

}  // namespace hierarchy_detail

// Mean posterior Dir(gamma_j1 + T_j1, ..., gamma_jK + T_jK) per parent,
// either sampled or set to its mean.
inline void update_parent_means(ModelState& state, Rng* rng, UpdateMode mode) {
  hierarchy_detail::require_aux(state, "update_parent_means");
  for (std::size_t j = 0; j < state.n_parents(); ++j) {
    std::vector<double> posterior(state.n_categories());
    double total = 0.0;
    for (std::size_t k = 0; k < state.n_categories(); ++k) {
      posterior[k] = state.parents[j].mean_hyper[k] + state.table_totals(j, k);
      total += posterior[k];
    }
    if (mode == UpdateMode::kSample) {
      if (rng == nullptr) {
        throw std::invalid_argument("update_parent_means: sampling requires an rng");
      }
      state.parents[j].mean = sample_dirichlet(DirichletParams(posterior), *rng);
    } else {
      for (double& q : posterior) q /= total;
      state.parents[j].mean = SimplexVector(std::move(posterior));
    }
  }
}

// Group scale variables w_d ~ Beta(c, n_d) with c the collapsed total
// concentration; groups without observations are skipped.  The marginal
// contribution Gamma(c) / Gamma(c + n_d) equals
// int_0^1 w^(c-1) (1-w)^(n_d-1) dw / Gamma(n_d), so conditioning on w turns
// every precision posterior into a Gamma law.
inline void sample_group_scale_aux(ModelState& state, Rng& rng) {
  const double c = state.total_precision();
  for (std::size_t d = 0; d < state.n_groups(); ++d) {
    const int n_d = state.groups[d].counts.total();
    if (n_d == 0) continue;
    state.scale_aux[d] =
        hierarchy_detail::clamp_unit_open(rng.beta(c, static_cast<double>(n_d)));
  }
  state.scale_ready = true;
}

// Deterministic counterpart used by the expectation scheme:
// ln w_d is replaced by E[ln w_d] = Psi(c) - Psi(c + n_d).
inline void set_expected_scale_aux(ModelState& state) {
  const double c = state.total_precision();
  for (std::size_t d = 0; d < state.n_groups(); ++d) {
    const int n_d = state.groups[d].counts.total();
    if (n_d == 0) continue;
    state.scale_aux[d] = hierarchy_detail::clamp_unit_open(
        std::exp(digamma(c) - digamma(c + static_cast<double>(n_d))));
  }
  state.scale_ready = true;
}

// Precision posterior Gamma(a_j + sum_dk m'_djk, r_j - sum_d ln w_d) per
// parent, sampled or set to its mean.
inline void update_parent_precisions(ModelState& state, Rng* rng, UpdateMode mode) {
  hierarchy_detail::require_aux(state, "update_parent_precisions");
  if (!state.scale_ready) {
    throw std::logic_error("update_parent_precisions: scale aux not populated");
  }
  double log_scale_sum = 0.0;
  for (std::size_t d = 0; d < state.n_groups(); ++d) {
    if (state.groups[d].counts.total() == 0) continue;
    log_scale_sum += std::log(state.scale_aux[d]);
  }
  if (mode == UpdateMode::kSample && rng == nullptr) {
    throw std::invalid_argument("update_parent_precisions: sampling requires an rng");
  }
  for (std::size_t j = 0; j < state.n_parents(); ++j) {
    const double shape = state.parents[j].precision_shape + state.table_totals.row_sum(j);
    const double rate = state.parents[j].precision_rate - log_scale_sum;
    state.parents[j].precision =
        (mode == UpdateMode::kSample) ? rng->gamma(shape, rate) : shape / rate;
  }
}

// Predictive weight of category k under parent j with the mean integrated
// out; identical to the expectation-mode mean update.
inline double collapsed_mean_predictive(const ModelState& state, std::size_t j,
                                        std::size_t k) {
  hierarchy_detail::require_aux(state, "collapsed_mean_predictive");
  double total = 0.0;
  for (std::size_t kk = 0; kk < state.n_categories(); ++kk) {
    total += state.parents[j].mean_hyper[kk] + state.table_totals(j, kk);
  }
  return (state.parents[j].mean_hyper[k] + state.table_totals(j, k)) / total;
}

inline double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  double value = shape * std::log(rate) - log_gamma(shape) - rate * x;
  if (shape != 1.0) value += (shape - 1.0) * std::log(x);
  return value;
}

// Sum of group marginals under the current parameters plus the parent
// hyperprior densities.
inline double log_joint(const ModelState& state) {
  const MDPrior prior(hierarchy_detail::parent_parameters(state.parents));
  double value = 0.0;
  for (const GroupData& g : state.groups) {
    value += md_log_marginal(prior, g.counts);
  }
  for (const ParentSpec& p : state.parents) {
    value += log_dirichlet_pdf(p.mean, p.mean_hyper);
    value += log_gamma_pdf(p.precision, p.precision_shape, p.precision_rate);
  }
  return value;
}

// One full update: tables -> scale aux -> precisions -> means, with the
// parameter sums recomputed every `recompute_interval` sweeps.  The
// expectation scheme consumes no randomness and is exactly reproducible.
inline void sweep(ModelState& state, Rng* rng, Scheme scheme) {
  if (state.iteration % state.recompute_interval == 0) {
    state.refresh_parameter_cache();
  }
  if (scheme == Scheme::kGibbs) {
    if (rng == nullptr) {
      throw std::invalid_argument("sweep: the gibbs scheme requires an rng");
    }
    sample_tables_sweep(state, *rng);
    sample_group_scale_aux(state, *rng);
    update_parent_precisions(state, rng, UpdateMode::kSample);
    update_parent_means(state, rng, UpdateMode::kSample);
  } else {
    accumulate_expected_tables(state);
    set_expected_scale_aux(state);
    update_parent_precisions(state, nullptr, UpdateMode::kExpectation);
    update_parent_means(state, nullptr, UpdateMode::kExpectation);
  }
  ++state.iteration;
  state.log_joint_trace.push_back(log_joint(state));
}

struct SynthesisResult {
  std::vector<GroupData> groups;
  std::vector<ParentSpec> true_parents;
  std::vector<SimplexVector> thetas;
};

// Generative harness: per group, theta_d ~ Dir(collapsed parameters) and
// counts from n_per_group draws of Mult(theta_d).
inline SynthesisResult synthesize(const std::vector<ParentSpec>& parents, int n_groups,
                                  int n_per_group, Rng& rng) {
  if (parents.empty()) throw std::invalid_argument("synthesize: need parents");
  if (n_groups < 1) throw std::invalid_argument("synthesize: need n_groups >= 1");
  if (n_per_group < 0) throw std::invalid_argument("synthesize: need n_per_group >= 0");
  const MDPrior prior(hierarchy_detail::parent_parameters(parents));
  const DirichletParams collapsed = collapse(prior);
  SynthesisResult result;
  result.true_parents = parents;
  for (int d = 0; d < n_groups; ++d) {
    SimplexVector theta = sample_dirichlet(collapsed, rng);
    std::vector<int> counts(theta.dim(), 0);
    for (int i = 0; i < n_per_group; ++i) {
      ++counts[rng.categorical(theta.theta())];
    }
    result.groups.push_back(GroupData{CountVector(std::move(counts)), d});
    result.thetas.push_back(std::move(theta));
  }
  return result;
}

}  // namespace multidir
