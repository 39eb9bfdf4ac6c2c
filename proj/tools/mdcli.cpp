// Command-line entry point for the Multi-Dirichlet toolkit: model fitting,
// closed-form expectation queries, synthetic data generation, and the
// oracle-backed verification suite.
//
// Exit codes: 0 success, 1 verification failure, 2 input parse error,
// 3 dimension mismatch, 4 invalid configuration.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "multidir/hierarchy.hpp"
#include "multidir/io.hpp"
#include "multidir/matrix.hpp"
#include "multidir/multi_dirichlet.hpp"
#include "multidir/oracle.hpp"
#include "multidir/verify.hpp"
#include "multidir/version.hpp"

using nlohmann::json;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitParseError = 2;
constexpr int kExitDimensionMismatch = 3;
constexpr int kExitInvalidConfig = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int n_parents = 0;     // J
  int n_categories = 0;  // K
  int n_groups = 0;      // D; 0 lets fit infer it from the data
  int n_per_group = 0;
  std::vector<std::vector<double>> mean_hyper;  // gamma, J rows of K
  std::vector<double> precision_shape;          // a_j
  std::vector<double> precision_rate;           // r_j
  std::string scheme = "expectation";
  int sweeps = 100;
  int burn_in = 0;
  std::optional<std::uint64_t> seed;
  int recompute_interval = 1;
  std::string data_path = "counts.csv";
  std::string out_path;  // default depends on the command
  std::string truth_path = "truth.json";
  std::optional<multidir::Matrix<double>> true_mean;  // simulate only
  std::optional<std::vector<double>> true_precision;
};

double as_positive_number(const json& value, const std::string& field) {
  if (!value.is_number()) throw ConfigError(field + " must be a number");
  const double v = value.get<double>();
  if (!(v > 0.0)) throw ConfigError(field + " must be > 0");
  return v;
}

// gamma may be a scalar, a K-vector shared by parents, or a J x K array.
std::vector<std::vector<double>> expand_mean_hyper(const json& value, int n_parents,
                                                   int n_categories) {
  std::vector<std::vector<double>> out(n_parents,
                                       std::vector<double>(n_categories, 1.0));
  if (value.is_null()) return out;
  if (value.is_number()) {
    const double v = as_positive_number(value, "gamma");
    for (auto& row : out) std::fill(row.begin(), row.end(), v);
    return out;
  }
  if (!value.is_array() || value.empty()) {
    throw ConfigError("gamma must be a number or array");
  }
  if (value.front().is_array()) {
    if (static_cast<int>(value.size()) != n_parents) {
      throw ConfigError("gamma needs one row per parent");
    }
    for (int j = 0; j < n_parents; ++j) {
      if (static_cast<int>(value[j].size()) != n_categories) {
        throw ConfigError("gamma rows need one entry per category");
      }
      for (int k = 0; k < n_categories; ++k) {
        out[j][k] = as_positive_number(value[j][k], "gamma");
      }
    }
    return out;
  }
  if (static_cast<int>(value.size()) != n_categories) {
    throw ConfigError("shared gamma needs one entry per category");
  }
  for (int k = 0; k < n_categories; ++k) {
    const double v = as_positive_number(value[k], "gamma");
    for (auto& row : out) row[k] = v;
  }
  return out;
}

// a / r may be a scalar or a J-vector.
std::vector<double> expand_per_parent(const json& value, int n_parents,
                                      const std::string& field) {
  std::vector<double> out(n_parents, 1.0);
  if (value.is_null()) return out;
  if (value.is_number()) {
    std::fill(out.begin(), out.end(), as_positive_number(value, field));
    return out;
  }
  if (!value.is_array() || static_cast<int>(value.size()) != n_parents) {
    throw ConfigError(field + " must be a number or a per-parent array");
  }
  for (int j = 0; j < n_parents; ++j) {
    out[j] = as_positive_number(value[j], field);
  }
  return out;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  RunConfig config;
  if (!doc.contains("J") || !doc.contains("K")) {
    throw ConfigError("config must set the dimensions J and K");
  }
  config.n_parents = doc["J"].get<int>();
  config.n_categories = doc["K"].get<int>();
  if (config.n_parents < 1 || config.n_categories < 1) {
    throw ConfigError("J and K must be >= 1");
  }
  config.n_groups = doc.value("D", 0);
  if (doc.contains("D") && config.n_groups < 1) throw ConfigError("D must be >= 1");
  config.n_per_group = doc.value("n_per_group", 0);
  if (config.n_per_group < 0) throw ConfigError("n_per_group must be >= 0");
  config.mean_hyper = expand_mean_hyper(doc.value("gamma", json()), config.n_parents,
                                        config.n_categories);
  config.precision_shape =
      expand_per_parent(doc.value("a", json()), config.n_parents, "a");
  config.precision_rate =
      expand_per_parent(doc.value("r", json()), config.n_parents, "r");
  config.scheme = doc.value("scheme", "expectation");
  if (config.scheme != "expectation" && config.scheme != "gibbs") {
    throw ConfigError("scheme must be 'expectation' or 'gibbs'");
  }
  config.sweeps = doc.value("sweeps", 100);
  if (config.sweeps < 0) throw ConfigError("sweeps must be >= 0");
  config.burn_in = doc.value("burn_in", 0);
  if (config.burn_in < 0) throw ConfigError("burn_in must be >= 0");
  if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
  config.recompute_interval = doc.value("recompute_interval", 1);
  if (config.recompute_interval < 1) {
    throw ConfigError("recompute_interval must be >= 1");
  }
  config.data_path = doc.value("data", config.data_path);
  config.out_path = doc.value("out", config.out_path);
  config.truth_path = doc.value("truth_out", config.truth_path);
  if (doc.contains("true_parents")) {
    const json& tp = doc["true_parents"];
    if (!tp.contains("beta") || !tp.contains("b")) {
      throw ConfigError("true_parents needs 'beta' and 'b'");
    }
    multidir::Matrix<double> beta(config.n_parents, config.n_categories);
    if (static_cast<int>(tp["beta"].size()) != config.n_parents) {
      throw ConfigError("true_parents.beta needs one row per parent");
    }
    for (int j = 0; j < config.n_parents; ++j) {
      if (static_cast<int>(tp["beta"][j].size()) != config.n_categories) {
        throw ConfigError("true_parents.beta rows need one entry per category");
      }
      for (int k = 0; k < config.n_categories; ++k) {
        beta(j, k) = tp["beta"][j][k].get<double>();
      }
    }
    std::vector<double> b(config.n_parents);
    if (static_cast<int>(tp["b"].size()) != config.n_parents) {
      throw ConfigError("true_parents.b needs one entry per parent");
    }
    for (int j = 0; j < config.n_parents; ++j) {
      b[j] = as_positive_number(tp["b"][j], "true_parents.b");
    }
    config.true_mean = std::move(beta);
    config.true_precision = std::move(b);
  }
  return config;
}

json config_echo(const RunConfig& config, const std::string& command) {
  json echo;
  echo["command"] = command;
  echo["version"] = multidir::kVersion;
  echo["J"] = config.n_parents;
  echo["K"] = config.n_categories;
  if (config.n_groups > 0) echo["D"] = config.n_groups;
  if (config.n_per_group > 0) echo["n_per_group"] = config.n_per_group;
  echo["gamma"] = config.mean_hyper;
  echo["a"] = config.precision_shape;
  echo["r"] = config.precision_rate;
  echo["scheme"] = config.scheme;
  echo["sweeps"] = config.sweeps;
  echo["burn_in"] = config.burn_in;
  if (config.seed) echo["seed"] = *config.seed;
  echo["recompute_interval"] = config.recompute_interval;
  echo["data"] = config.data_path;
  return echo;
}

json matrix_to_json(const multidir::Matrix<double>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_report(const json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  out << report.dump(2) << '\n';
}

std::vector<multidir::ParentSpec> parents_from_config(const RunConfig& config) {
  std::vector<multidir::ParentSpec> parents;
  parents.reserve(config.n_parents);
  for (int j = 0; j < config.n_parents; ++j) {
    parents.push_back(multidir::prior_parent(config.mean_hyper[j],
                                             config.precision_shape[j],
                                             config.precision_rate[j]));
  }
  return parents;
}

int cmd_fit(const RunConfig& config) {
  if (config.scheme == "gibbs" && !config.seed) {
    throw ConfigError("the gibbs scheme requires a seed");
  }
  const auto rows = multidir::read_counts_csv(config.data_path);
  if (rows.empty()) {
    throw DimensionError("no data rows in '" + config.data_path + "'");
  }
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != config.n_categories) {
      throw DimensionError("data has " + std::to_string(row.size()) +
                           " columns, config says K = " +
                           std::to_string(config.n_categories));
    }
  }
  if (config.n_groups > 0 && config.n_groups != static_cast<int>(rows.size())) {
    throw DimensionError("data has " + std::to_string(rows.size()) +
                         " groups, config says D = " + std::to_string(config.n_groups));
  }

  std::vector<multidir::GroupData> groups;
  groups.reserve(rows.size());
  for (std::size_t d = 0; d < rows.size(); ++d) {
    groups.push_back({multidir::CountVector(rows[d]), static_cast<int>(d)});
  }
  multidir::ModelState state(parents_from_config(config), std::move(groups),
                             config.recompute_interval);
  multidir::Rng rng(config.seed.value_or(0));
  const multidir::Scheme scheme = config.scheme == "gibbs"
                                      ? multidir::Scheme::kGibbs
                                      : multidir::Scheme::kExpectation;
  state.log_joint_trace.push_back(multidir::log_joint(state));
  for (int i = 0; i < config.sweeps; ++i) {
    multidir::sweep(state, &rng, scheme);
  }

  json report;
  report["config"] = config_echo(config, "fit");
  json beta = json::array();
  json precision = json::array();
  for (const auto& p : state.parents) {
    beta.push_back(p.mean.theta());
    precision.push_back(p.precision);
  }
  report["parents"] = {{"beta", beta}, {"b", precision}};
  report["log_joint_trace"] = state.log_joint_trace;
  json per_group = json::array();
  for (const auto& tables : state.group_parent_tables) {
    per_group.push_back(matrix_to_json(tables));
  }
  multidir::Matrix<double> count_totals(state.n_parents(), state.n_categories(), 0.0);
  for (const auto& counts : state.group_parent_counts) {
    for (std::size_t i = 0; i < counts.data().size(); ++i) {
      count_totals.data()[i] += counts.data()[i];
    }
  }
  report["aux_totals"] = {{"parent_tables", matrix_to_json(state.table_totals)},
                          {"parent_counts", matrix_to_json(count_totals)},
                          {"per_group_parent_tables", per_group}};
  write_report(report, config.out_path.empty() ? "report.json" : config.out_path);
  return 0;
}

int cmd_expect(const std::string& alpha_path, const std::string& counts_path,
               const std::string& out_path) {
  multidir::Matrix<double> alpha = multidir::read_matrix_csv(alpha_path);
  const auto rows = multidir::read_counts_csv(counts_path);
  if (rows.size() != 1) {
    throw multidir::ParseError("expect needs exactly one row of counts in '" +
                                   counts_path + "'",
                               static_cast<int>(rows.size()), 0);
  }
  if (rows.front().size() != alpha.cols()) {
    throw multidir::ParseError("counts dimension does not match the parameter matrix",
                               1, 0);
  }
  for (double a : alpha.data()) {
    if (!std::isfinite(a) || a <= 0.0) {
      throw multidir::ParseError("parameters in '" + alpha_path +
                                     "' must be finite and > 0",
                                 0, 0);
    }
  }
  const multidir::MDPrior md(std::move(alpha));
  const multidir::CountVector data(rows.front());

  json report;
  report["config"] = {{"command", "expect"},
                      {"version", multidir::kVersion},
                      {"J", md.n_parents()},
                      {"K", md.n_categories()},
                      {"alpha", matrix_to_json(md.parents())},
                      {"counts", data.counts()}};
  report["expected_parent_counts"] =
      matrix_to_json(multidir::expected_parent_counts(md, data));
  report["expected_parent_tables"] =
      matrix_to_json(multidir::expected_parent_tables(md, data));
  const multidir::DirichletParams collapsed = multidir::collapse(md);
  std::vector<double> tables(md.n_categories());
  for (std::size_t k = 0; k < md.n_categories(); ++k) {
    tables[k] = multidir::expected_tables(collapsed.alpha()[k], data.counts()[k]);
  }
  report["expected_tables"] = tables;
  write_report(report, out_path);
  return 0;
}

int cmd_simulate(const RunConfig& config) {
  if (!config.seed) throw ConfigError("simulate requires a seed");
  if (config.n_groups < 1) throw ConfigError("simulate requires D >= 1");
  multidir::Rng rng(*config.seed);

  std::vector<multidir::ParentSpec> parents = parents_from_config(config);
  if (config.true_mean) {
    for (int j = 0; j < config.n_parents; ++j) {
      std::vector<double> row(config.n_categories);
      for (int k = 0; k < config.n_categories; ++k) row[k] = (*config.true_mean)(j, k);
      try {
        parents[j].mean = multidir::SimplexVector(std::move(row));
      } catch (const std::exception& e) {
        throw ConfigError("true_parents.beta row " + std::to_string(j) + ": " +
                          e.what());
      }
      parents[j].precision = (*config.true_precision)[j];
    }
  } else {
    // No explicit truth: draw it from the hyperprior, deterministically in
    // the seed.
    for (auto& p : parents) {
      p.mean = multidir::sample_dirichlet(multidir::DirichletParams(p.mean_hyper), rng);
      p.precision = rng.gamma(p.precision_shape, p.precision_rate);
    }
  }

  const multidir::SynthesisResult result =
      multidir::synthesize(parents, config.n_groups, config.n_per_group, rng);
  std::vector<std::vector<int>> rows;
  rows.reserve(result.groups.size());
  for (const auto& g : result.groups) rows.push_back(g.counts.counts());
  multidir::write_counts_csv(config.out_path.empty() ? "counts.csv" : config.out_path,
                             rows);

  json truth;
  truth["config"] = config_echo(config, "simulate");
  json beta = json::array();
  json precision = json::array();
  for (const auto& p : result.true_parents) {
    beta.push_back(p.mean.theta());
    precision.push_back(p.precision);
  }
  truth["parents"] = {{"beta", beta}, {"b", precision}};
  json thetas = json::array();
  for (const auto& theta : result.thetas) thetas.push_back(theta.theta());
  truth["thetas"] = thetas;
  write_report(truth, config.truth_path);
  return 0;
}

int cmd_verify(const multidir::EnumerationBudget& budget, std::uint64_t seed,
               bool fault_inject, const std::string& out_path) {
  if (budget.max_total_count < 0 || budget.max_total_count > 10 ||
      budget.max_parents < 1 || budget.max_parents > 4 ||
      budget.max_categories < 1 || budget.max_categories > 4) {
    throw ConfigError("verification budget outside supported caps "
                      "(total <= 10, parents <= 4, categories <= 4)");
  }
  if (fault_inject) {
    multidir::g_expected_parent_tables_fault = 1e-3;
  }
  const auto checks = multidir::run_verification(budget, seed);

  json report;
  report["config"] = {{"command", "verify"},
                      {"version", multidir::kVersion},
                      {"seed", seed},
                      {"max_total_count", budget.max_total_count},
                      {"max_parents", budget.max_parents},
                      {"max_categories", budget.max_categories},
                      {"fault_inject", fault_inject}};
  json check_list = json::array();
  bool all_pass = true;
  for (const auto& c : checks) {
    json entry = {{"name", c.name},
                  {"measured", c.measured},
                  {"tolerance", c.tolerance},
                  {"pass", c.pass},
                  {"cases", c.cases}};
    if (!c.note.empty()) entry["note"] = c.note;
    check_list.push_back(std::move(entry));
    all_pass = all_pass && c.pass;
  }
  report["checks"] = check_list;
  write_report(report, out_path);
  return all_pass ? 0 : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-Dirichlet prior inference toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_flag, out_flag, alpha_flag, truth_flag;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> sweeps_flag;
  std::string scheme_flag;

  CLI::App* fit = app.add_subcommand("fit", "Fit the hierarchical model to counts");
  fit->add_option("--config", config_path, "JSON run configuration")->required();
  fit->add_option("--data", data_flag, "counts CSV, one row per group");
  fit->add_option("--out", out_flag, "report path");
  fit->add_option("--seed", seed_flag, "random seed");
  fit->add_option("--sweeps", sweeps_flag, "number of sweeps");
  fit->add_option("--scheme", scheme_flag, "gibbs or expectation");

  CLI::App* expect =
      app.add_subcommand("expect", "Closed-form expectations for one count vector");
  expect->add_option("--alpha", alpha_flag, "parent parameter CSV, J rows x K columns")
      ->required();
  expect->add_option("--data", data_flag, "counts CSV with a single row")->required();
  expect->add_option("--out", out_flag, "report path (stdout when omitted)");

  CLI::App* simulate = app.add_subcommand("simulate", "Generate synthetic group counts");
  simulate->add_option("--config", config_path, "JSON run configuration")->required();
  simulate->add_option("--out", out_flag, "counts CSV path");
  simulate->add_option("--truth", truth_flag, "ground-truth report path");
  simulate->add_option("--seed", seed_flag, "random seed");

  CLI::App* verify = app.add_subcommand("verify", "Run the oracle verification suite");
  multidir::EnumerationBudget budget;
  std::uint64_t verify_seed = 20240801;
  bool fault_inject = false;
  verify->add_option("--max-total-count", budget.max_total_count,
                     "enumeration cap on the total count per case");
  verify->add_option("--max-parents", budget.max_parents, "enumeration cap on J");
  verify->add_option("--max-categories", budget.max_categories, "enumeration cap on K");
  verify->add_option("--seed", verify_seed, "random seed for grids and simulations");
  verify->add_option("--out", out_flag, "report path (stdout when omitted)");
  verify->add_flag("--fault-inject", fault_inject,
                   "perturb the table expectations (verification testing only)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed() || simulate->parsed()) {
      RunConfig config = load_config(config_path);
      if (!data_flag.empty()) config.data_path = data_flag;
      if (!out_flag.empty()) config.out_path = out_flag;
      if (!truth_flag.empty()) config.truth_path = truth_flag;
      if (seed_flag) config.seed = *seed_flag;
      if (sweeps_flag) {
        if (*sweeps_flag < 0) throw ConfigError("sweeps must be >= 0");
        config.sweeps = *sweeps_flag;
      }
      if (!scheme_flag.empty()) {
        if (scheme_flag != "gibbs" && scheme_flag != "expectation") {
          throw ConfigError("scheme must be 'expectation' or 'gibbs'");
        }
        config.scheme = scheme_flag;
      }
      return fit->parsed() ? cmd_fit(config) : cmd_simulate(config);
    }
    if (expect->parsed()) {
      return cmd_expect(alpha_flag, data_flag, out_flag);
    }
    return cmd_verify(budget, verify_seed, fault_inject, out_flag);
  } catch (const multidir::ParseError& e) {
    std::cerr << "parse error at line " << e.line() << ", column " << e.column()
              << ": " << e.what() << '\n';
    return kExitParseError;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const DimensionError& e) {
    std::cerr << "dimension mismatch: " << e.what() << '\n';
    return kExitDimensionMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
}
