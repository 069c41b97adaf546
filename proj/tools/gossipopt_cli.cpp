// gossipopt: command-line front end for the gossip optimization experiments.
//
//   gossipopt run <config.json> [--out DIR] [--seed S] [--workers K]
//   gossipopt validate <config.json>
//   gossipopt kkt <config.json>
//   gossipopt rho <config.json>
//   gossipopt landscape <config.json> [--resolution R] [--out FILE]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gossipopt/config.hpp"
#include "gossipopt/experiment.hpp"
#include "gossipopt/flow_oracle.hpp"
#include "gossipopt/gossip.hpp"
#include "gossipopt/trace_io.hpp"

using namespace gossipopt;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string vec_str(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? ", " : "") + format_double(v(k));
  return s + ")";
}

void print_diagnostics(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    std::cerr << (d.severity == Diagnostic::Severity::error ? "error: " : "warning: ") << d.message << '\n';
  }
}

ExperimentConfig load_checked(const std::string& path) {
  ExperimentConfig cfg = load_config(path);
  const auto diags = validate_config(cfg);
  print_diagnostics(diags);
  if (has_errors(diags)) throw ConfigError("configuration rejected");
  return cfg;
}

int cmd_run(const std::string& path, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
            const std::optional<std::size_t>& workers) {
  auto doc = nlohmann::json::parse(std::ifstream(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("invalid JSON in " + path);
  if (seed) doc["master_seed"] = *seed;
  if (workers) doc["workers"] = *workers;
  if (out) doc["output_dir"] = *out;
  ExperimentConfig cfg = parse_config(doc, std::filesystem::path(path).parent_path());
  const auto diags = validate_config(cfg);
  print_diagnostics(diags);
  if (has_errors(diags)) throw ConfigError("configuration rejected");

  const AggregateResult res = run_experiment(cfg);
  const AggregatePoint& last = res.curve.back();
  std::cout << "runs: " << res.runs << "  iterations: " << last.iteration << '\n'
            << "mean disagreement: " << format_double(last.mean_disagreement) << '\n'
            << "mean objective: " << format_double(last.mean_objective) << '\n';
  if (last.mean_deviation) std::cout << "mean deviation: " << format_double(*last.mean_deviation) << '\n';
  std::cout << "mean <theta>: " << vec_str(last.mean_average) << '\n'
            << "output: " << cfg.output_dir << '\n';
  return 0;
}

int cmd_validate(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  const auto diags = validate_config(cfg);
  print_diagnostics(diags);
  if (has_errors(diags)) return kExitConfig;
  std::cout << "ok\n";
  return 0;
}

int cmd_kkt(const std::string& path) {
  const ExperimentConfig cfg = load_checked(path);
  const auto problem = make_problem(cfg, 0);
  KktSearchOptions opts;
  opts.starts = cfg.kkt_starts;
  opts.seed = cfg.master_seed;
  const KktSearchResult res = find_kkt(problem->constraint_set(), objective_of(*problem), opts);
  std::cout << "converged starts: " << res.converged_starts << " / " << opts.starts << '\n';
  for (const auto& c : res.candidates) {
    std::cout << vec_str(c.point) << "  f=" << format_double(c.value) << "  residual=" << format_double(c.residual)
              << '\n';
  }
  if (!res.diagnostic.empty()) std::cerr << "warning: " << res.diagnostic << '\n';
  return res.candidates.empty() ? kExitRuntime : 0;
}

int cmd_rho(const std::string& path) {
  const ExperimentConfig cfg = load_checked(path);
  const GossipScheme scheme = cfg.gossip_scheme();
  const Topology& topo = *cfg.topology;
  const Eigen::MatrixXd ew = expected_matrix(scheme, topo);
  const double rho = spectral_rho(scheme, topo);
  std::cout << "scheme: " << to_string(scheme.kind) << "  beta: " << format_double(scheme.beta) << '\n'
            << "agents: " << topo.agents() << "  components: " << topo.component_count() << '\n'
            << "rho: " << format_double(rho) << "  gap: " << format_double(1.0 - rho) << '\n'
            << "E[W] row-sum deviation: " << format_double((ew.rowwise().sum().array() - 1.0).abs().maxCoeff())
            << '\n'
            << "E[W] column-sum deviation: "
            << format_double((ew.colwise().sum().array() - 1.0).abs().maxCoeff()) << '\n';
  if (scheme.rarefaction) {
    for (std::size_t n : {1ul, 100ul, 10000ul}) {
      std::cout << "rho_" << n << ": " << format_double(rho_n(scheme, topo, n)) << '\n';
    }
  }
  return 0;
}

int cmd_landscape(const std::string& path, std::size_t resolution, const std::optional<std::string>& out) {
  const ExperimentConfig cfg = load_checked(path);
  if (cfg.scenario != ScenarioKind::power_allocation) throw ConfigError("landscape needs a power_allocation scenario");
  const std::string csv = landscape_csv(*cfg.channel, cfg.min_power, resolution);
  if (out) {
    write_text_file(*out, csv);
  } else {
    std::cout << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed constrained stochastic optimization over gossip networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::size_t resolution = 200;

  auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config and print diagnostics");
  validate->add_option("config", config_path)->required();
  auto* kkt = app.add_subcommand("kkt", "Multistart search for KKT points of the mean objective");
  kkt->add_option("config", config_path)->required();
  auto* rho = app.add_subcommand("rho", "Print spectral statistics of the gossip scheme");
  rho->add_option("config", config_path)->required();
  auto* landscape = app.add_subcommand("landscape", "Export the power allocation objective on a dB grid");
  landscape->add_option("config", config_path)->required();
  landscape->add_option("--resolution", resolution, "Grid points per axis")->check(CLI::Range(2, 100000));
  landscape->add_option("--out", out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out, seed, workers);
    if (*validate) return cmd_validate(config_path);
    if (*kkt) return cmd_kkt(config_path);
    if (*rho) return cmd_rho(config_path);
    if (*landscape) return cmd_landscape(config_path, resolution, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ExperimentError& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
