#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gossipopt/constraint_set.hpp"
#include "gossipopt/gossip.hpp"
#include "gossipopt/problems.hpp"
#include "gossipopt/rng.hpp"

namespace gossipopt {

/// Stacked estimates theta = (theta_1^T, ..., theta_N^T)^T of N agents in R^d.
struct NetworkState {
  Eigen::VectorXd theta;
  std::size_t agents = 0;
  std::size_t dim = 0;
  std::size_t iteration = 0;

  NetworkState() = default;
  NetworkState(Eigen::VectorXd stacked, std::size_t n_agents, std::size_t dimension, std::size_t n = 0);

  auto block(std::size_t i) { return theta.segment(static_cast<Eigen::Index>(i * dim), static_cast<Eigen::Index>(dim)); }
  auto block(std::size_t i) const {
    return theta.segment(static_cast<Eigen::Index>(i * dim), static_cast<Eigen::Index>(dim));
  }
};

/// All agents start at the same point.
NetworkState consensus_state(const Eigen::VectorXd& point, std::size_t n_agents);
/// Independent uniform draws from the feasible set.
NetworkState uniform_state(const ConstraintSet& set, std::size_t n_agents, Rng& rng);

/// gamma_n = gamma0 / n^xi, where gamma0 switches to a new value for every
/// iteration strictly after a configured change point.
class StepSchedule {
 public:
  struct Change {
    std::size_t after = 0;
    double gamma0 = 0.0;
  };

  StepSchedule(double gamma0, double xi, std::vector<Change> changes = {});

  double gamma0() const { return gamma0_; }
  double xi() const { return xi_; }
  const std::vector<Change>& changes() const { return changes_; }
  double operator()(std::size_t n) const;

 private:
  double gamma0_;
  double xi_;
  std::vector<Change> changes_;
};

/// Raised when a run cannot continue, e.g. a non-finite observation.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, std::size_t iteration, std::optional<std::size_t> agent = std::nullopt)
      : std::runtime_error(what), iteration_(iteration), agent_(agent) {}
  std::size_t iteration() const { return iteration_; }
  std::optional<std::size_t> agent() const { return agent_; }

 private:
  std::size_t iteration_;
  std::optional<std::size_t> agent_;
};

/// Temporary estimates P_G[theta_i + gamma Y_i] for every agent.
Eigen::VectorXd local_step(const NetworkState& state, const Eigen::VectorXd& observations, double gamma,
                           const ConstraintSet& set);

/// (W kron I_d) temp, computed blockwise.
Eigen::VectorXd gossip_step(const Eigen::VectorXd& temp, const GossipMatrix& w, std::size_t dim);
/// Same operation for a sparse event; touches only the rows the event changes.
void gossip_step_in_place(Eigen::VectorXd& temp, const GossipEvent& event, double beta, const Topology& topology,
                          std::size_t dim);

/// <theta> = (1/N) sum_i theta_i
Eigen::VectorXd network_average(const NetworkState& state);
/// |theta - 1 kron <theta>|
double disagreement(const NetworkState& state);
/// ((1/N) sum_i |theta_i - reference|^2)^(1/2)
double deviation(const NetworkState& state, const Eigen::VectorXd& reference);

struct TraceRecord {
  std::size_t iteration = 0;
  double disagreement = 0.0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::optional<double> deviation;
  Eigen::VectorXd average;
};

struct RunTrace {
  std::size_t dim = 0;
  std::vector<TraceRecord> records;
};

TraceRecord make_record(const NetworkState& state, const Problem& problem,
                        const std::optional<Eigen::VectorXd>& reference);

/// The random streams one run owns.
struct RunStreams {
  Rng observation;
  Rng gossip;
};

struct IterationStats {
  std::size_t silent_ticks = 0;
  std::size_t isolated_wakeups = 0;
  /// Largest ratio |P_G[theta_i + gamma Y_i] - theta_i| / (gamma |Y_i|) seen so far (<= 1).
  double max_local_move_ratio = 0.0;
};

/// Reusable buffers and bookkeeping for the two-step iteration.
class Optimizer {
 public:
  Optimizer(const Problem& problem, GossipScheme scheme, Topology topology, StepSchedule schedule);

  /// theta_n = (W_n kron I_d) P_{G^N}[theta_{n-1} + gamma_n Y_n]. Y_n is drawn
  /// from the observation stream at theta_{n-1}; W_n independently from the
  /// gossip stream.
  void iterate(NetworkState& state, RunStreams& streams);

  const IterationStats& stats() const { return stats_; }
  const Problem& problem() const { return problem_; }

 private:
  const Problem& problem_;
  GossipScheme scheme_;
  Topology topology_;
  StepSchedule schedule_;
  Eigen::VectorXd observations_;
  Eigen::VectorXd temp_;
  IterationStats stats_;
};

struct RunOptions {
  std::size_t iterations = 0;
  std::size_t stride = 1;
  std::optional<Eigen::VectorXd> reference;
};

struct RunResult {
  RunTrace trace;
  NetworkState final_state;
  IterationStats stats;
  std::optional<std::string> error;  // set when the run aborted; trace holds the partial record
  std::optional<std::size_t> failed_iteration;
};

/// Runs the iteration for a fixed budget, recording the initial state and
/// every stride-th iteration (plus the last one).
RunResult run(const Problem& problem, const GossipScheme& scheme, const Topology& topology,
              const StepSchedule& schedule, NetworkState initial, const RunOptions& options, RunStreams& streams);

}  // namespace gossipopt
