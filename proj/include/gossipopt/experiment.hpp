#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "gossipopt/config.hpp"
#include "gossipopt/optimizer.hpp"

namespace gossipopt {

inline constexpr const char* kSoftwareVersion = "0.1.0";

/// A Monte Carlo run aborted. Carries the lowest failing run index.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(const std::string& what, std::size_t run, std::size_t iteration)
      : std::runtime_error(what), run_(run), iteration_(iteration) {}
  std::size_t run() const { return run_; }
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t run_;
  std::size_t iteration_;
};

struct RunSummary {
  std::size_t run = 0;
  std::size_t iterations = 0;
  double disagreement = 0.0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::optional<double> deviation;
  Eigen::VectorXd average;
  std::optional<Eigen::VectorXd> reference;
  std::size_t silent_ticks = 0;
  std::size_t isolated_wakeups = 0;
};

/// Cross-run statistics at one recorded iteration.
struct AggregatePoint {
  std::size_t iteration = 0;
  std::optional<double> mean_deviation;
  double mean_disagreement = 0.0;
  double q05_disagreement = 0.0;
  double median_disagreement = 0.0;
  double q95_disagreement = 0.0;
  double mean_objective = 0.0;
  double q05_objective = 0.0;
  double median_objective = 0.0;
  double q95_objective = 0.0;
  double mean_kkt_residual = 0.0;
  Eigen::VectorXd mean_average;
};

struct AggregateResult {
  std::size_t runs = 0;
  std::size_t dim = 0;
  std::uint64_t master_seed = 0;
  std::vector<AggregatePoint> curve;
  std::vector<RunSummary> summaries;
  std::vector<RunTrace> traces;  // indexed by run
  nlohmann::json config_echo;
  std::string provenance_hash;
};

struct ExperimentOptions {
  bool write_files = true;
  /// Overrides config.output_dir when set.
  std::optional<std::filesystem::path> output_dir;
};

/// Linear-interpolation quantile of unsorted samples, q in [0, 1].
double quantile(std::vector<double> samples, double q);

/// Aggregates traces recorded at identical iterations.
std::vector<AggregatePoint> aggregate_traces(const std::vector<RunTrace>& traces);

/// Scenario 2 reference point: the lowest-objective KKT point of a multistart
/// flow search on the mean channel.
std::optional<Eigen::VectorXd> compute_reference(const ExperimentConfig& config);

/// Runs config.monte_carlo_runs independent runs on config.workers threads.
/// Run k draws every random quantity from streams keyed by (master_seed, k),
/// so results do not depend on the worker count. Writes run_<k>.csv,
/// aggregate.csv and manifest.json. On abort, the failing run's partial trace
/// is written and ExperimentError is thrown.
AggregateResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

std::string aggregate_header(std::size_t dim);
std::string aggregate_csv(const AggregateResult& result);
nlohmann::json manifest(const AggregateResult& result);

/// Config document with runner-only fields (workers, output_dir) removed.
nlohmann::json config_echo(const ExperimentConfig& config);
/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Weighted error-probability sum on a dB grid over [min_power, max_power]^2
/// of a two-user channel. Columns p1_db,p2_db,p1,p2,weighted_error.
std::string landscape_csv(const InterferenceChannel& channel, double min_power, std::size_t resolution);

}  // namespace gossipopt
