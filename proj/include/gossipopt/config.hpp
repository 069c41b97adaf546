#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "gossipopt/constraint_set.hpp"
#include "gossipopt/gossip.hpp"
#include "gossipopt/optimizer.hpp"
#include "gossipopt/problems.hpp"

namespace gossipopt {

/// Malformed or invalid experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { least_squares_disk, power_allocation, quadratic };

struct InitSpec {
  enum class Kind { uniform, point, agents };
  Kind kind = Kind::uniform;
  std::vector<Eigen::VectorXd> values;  // one point, or one per agent
};

struct ExperimentConfig {
  ScenarioKind scenario = ScenarioKind::least_squares_disk;
  std::size_t n_agents = 0;
  std::size_t dim = 0;

  // power allocation
  std::optional<InterferenceChannel> channel;
  std::optional<RicianFading> fading;
  bool log_scale = true;
  double min_power = PowerAllocation::kDefaultMinPower;

  // quadratic
  std::vector<QuadraticProblem::Agent> quadratic_agents;
  std::optional<ConstraintSet> quadratic_set;
  double noise_std = 0.0;

  std::optional<Eigen::VectorXd> reference;

  std::optional<Topology> topology;
  // Raw values; validate_config checks them.
  SchemeKind scheme = SchemeKind::pairwise;
  double beta = 0.5;
  std::optional<Rarefaction> rarefaction;
  double gamma0 = 0.0;
  double xi = 0.0;
  std::vector<StepSchedule::Change> step_changes;

  std::size_t iterations = 0;
  std::size_t monte_carlo_runs = 1;
  std::uint64_t master_seed = 0;
  std::size_t trace_stride = 1;
  std::size_t workers = 1;
  std::string output_dir = "out";
  InitSpec init;
  std::size_t kkt_starts = 16;

  /// Parsed document with CLI overrides applied; echoed into the manifest.
  nlohmann::json document;

  GossipScheme gossip_scheme() const { return GossipScheme{scheme, beta, rarefaction}; }
  StepSchedule step_schedule() const { return StepSchedule(gamma0, xi, step_changes); }
};

/// Structural parsing; relative file references resolve against base_dir.
/// Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& document, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

ConstraintSet parse_constraint_set(const nlohmann::json& spec);
Topology parse_topology(const nlohmann::json& spec, std::size_t n_agents);
InterferenceChannel parse_channel(const nlohmann::json& spec);

struct Diagnostic {
  enum class Severity { warning, error };
  Severity severity = Severity::error;
  std::string message;
};

/// Empty iff the configuration satisfies every step, gossip and connectivity
/// requirement. Errors make the configuration unusable; warnings do not.
std::vector<Diagnostic> validate_config(const ExperimentConfig& config);
bool has_errors(const std::vector<Diagnostic>& diagnostics);

/// Problem instance used by Monte Carlo run `run` (fresh regressors per run
/// for the least squares scenario).
std::unique_ptr<Problem> make_problem(const ExperimentConfig& config, std::size_t run);

NetworkState make_initial_state(const ExperimentConfig& config, const ConstraintSet& set, std::size_t run);

}  // namespace gossipopt
