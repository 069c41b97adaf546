#include "gossipopt/optimizer.hpp"

#include <cmath>
#include <sstream>

namespace gossipopt {

NetworkState::NetworkState(Eigen::VectorXd stacked, std::size_t n_agents, std::size_t dimension, std::size_t n)
    : theta(std::move(stacked)), agents(n_agents), dim(dimension), iteration(n) {
  if (static_cast<std::size_t>(theta.size()) != agents * dim) {
    throw std::invalid_argument("network state: stacked vector size must equal agents * dimension");
  }
}

NetworkState consensus_state(const Eigen::VectorXd& point, std::size_t n_agents) {
  return NetworkState(point.replicate(static_cast<Eigen::Index>(n_agents), 1), n_agents,
                      static_cast<std::size_t>(point.size()));
}

NetworkState uniform_state(const ConstraintSet& set, std::size_t n_agents, Rng& rng) {
  NetworkState state(Eigen::VectorXd(static_cast<Eigen::Index>(n_agents * set.dimension())), n_agents,
                     set.dimension());
  for (std::size_t i = 0; i < n_agents; ++i) state.block(i) = set.sample_uniform(rng);
  return state;
}

StepSchedule::StepSchedule(double gamma0, double xi, std::vector<Change> changes)
    : gamma0_(gamma0), xi_(xi), changes_(std::move(changes)) {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw std::invalid_argument("step schedule: gamma0 must be positive");
  if (!std::isfinite(xi)) throw std::invalid_argument("step schedule: xi must be finite");
  for (std::size_t k = 0; k < changes_.size(); ++k) {
    if (!(changes_[k].gamma0 > 0.0)) throw std::invalid_argument("step schedule: changed gamma0 must be positive");
    if (k > 0 && changes_[k].after <= changes_[k - 1].after) {
      throw std::invalid_argument("step schedule: change points must be strictly increasing");
    }
  }
}

double StepSchedule::operator()(std::size_t n) const {
  double g0 = gamma0_;
  for (const auto& c : changes_) {
    if (n > c.after) g0 = c.gamma0;
  }
  return g0 / std::pow(static_cast<double>(n), xi_);
}

Eigen::VectorXd local_step(const NetworkState& state, const Eigen::VectorXd& observations, double gamma,
                           const ConstraintSet& set) {
  if (observations.size() != state.theta.size()) throw std::invalid_argument("local_step: dimension mismatch");
  Eigen::VectorXd temp = state.theta + gamma * observations;
  const auto d = static_cast<Eigen::Index>(state.dim);
  for (std::size_t i = 0; i < state.agents; ++i) {
    set.project_in_place(temp.segment(static_cast<Eigen::Index>(i) * d, d));
  }
  return temp;
}

Eigen::VectorXd gossip_step(const Eigen::VectorXd& temp, const GossipMatrix& w, std::size_t dim) {
  const auto n = w.rows();
  const auto d = static_cast<Eigen::Index>(dim);
  if (w.cols() != n || temp.size() != n * d) throw std::invalid_argument("gossip_step: dimension mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(temp.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (w(i, j) != 0.0) out.segment(i * d, d) += w(i, j) * temp.segment(j * d, d);
    }
  }
  return out;
}

void gossip_step_in_place(Eigen::VectorXd& temp, const GossipEvent& event, double beta, const Topology& topology,
                          std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (temp.size() != static_cast<Eigen::Index>(topology.agents()) * d) {
    throw std::invalid_argument("gossip_step: dimension mismatch");
  }
  const auto i = static_cast<Eigen::Index>(event.node);
  switch (event.kind) {
    case GossipEvent::Kind::identity:
      return;
    case GossipEvent::Kind::pairwise: {
      const auto j = static_cast<Eigen::Index>(event.partner);
      const Eigen::VectorXd xi = temp.segment(i * d, d);
      const Eigen::VectorXd xj = temp.segment(j * d, d);
      temp.segment(i * d, d) = beta * xi + (1.0 - beta) * xj;
      temp.segment(j * d, d) = beta * xj + (1.0 - beta) * xi;
      return;
    }
    case GossipEvent::Kind::broadcast: {
      const Eigen::VectorXd xi = temp.segment(i * d, d);
      for (std::size_t k : topology.neighbors(event.node)) {
        const auto kk = static_cast<Eigen::Index>(k);
        temp.segment(kk * d, d) = (1.0 - beta) * temp.segment(kk * d, d) + beta * xi;
      }
      return;
    }
  }
}

Eigen::VectorXd network_average(const NetworkState& state) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(state.dim));
  for (std::size_t i = 0; i < state.agents; ++i) sum += state.block(i);
  return sum / static_cast<double>(state.agents);
}

double disagreement(const NetworkState& state) {
  const Eigen::VectorXd mean = network_average(state);
  double sq = 0.0;
  for (std::size_t i = 0; i < state.agents; ++i) sq += (state.block(i) - mean).squaredNorm();
  return std::sqrt(sq);
}

double deviation(const NetworkState& state, const Eigen::VectorXd& reference) {
  if (reference.size() != static_cast<Eigen::Index>(state.dim)) {
    throw std::invalid_argument("deviation: reference has wrong dimension");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < state.agents; ++i) sq += (state.block(i) - reference).squaredNorm();
  return std::sqrt(sq / static_cast<double>(state.agents));
}

TraceRecord make_record(const NetworkState& state, const Problem& problem,
                        const std::optional<Eigen::VectorXd>& reference) {
  TraceRecord rec;
  rec.iteration = state.iteration;
  rec.average = network_average(state);
  rec.disagreement = disagreement(state);
  rec.objective = problem.objective(rec.average);
  rec.kkt_residual = problem.constraint_set().kkt_residual(problem.gradient(rec.average), rec.average);
  if (reference) rec.deviation = deviation(state, *reference);
  return rec;
}

Optimizer::Optimizer(const Problem& problem, GossipScheme scheme, Topology topology, StepSchedule schedule)
    : problem_(problem), scheme_(scheme), topology_(std::move(topology)), schedule_(std::move(schedule)) {
  scheme_.validate();
  if (topology_.agents() != problem_.agents()) {
    throw std::invalid_argument("optimizer: topology and problem disagree on the number of agents");
  }
}

void Optimizer::iterate(NetworkState& state, RunStreams& streams) {
  const std::size_t n = state.iteration + 1;
  const double gamma = schedule_(n);
  problem_.observe(state.theta, streams.observation, observations_);
  if (!observations_.allFinite()) {
    const auto d = static_cast<Eigen::Index>(state.dim);
    std::size_t agent = 0;
    for (std::size_t i = 0; i < state.agents; ++i) {
      if (!observations_.segment(static_cast<Eigen::Index>(i) * d, d).allFinite()) {
        agent = i;
        break;
      }
    }
    std::ostringstream msg;
    msg << "non-finite observation for agent " << agent << " at iteration " << n;
    throw RunAborted(msg.str(), n, agent);
  }

  const ConstraintSet& set = problem_.constraint_set();
  const auto d = static_cast<Eigen::Index>(state.dim);
  temp_ = state.theta + gamma * observations_;
  for (std::size_t i = 0; i < state.agents; ++i) {
    const auto k = static_cast<Eigen::Index>(i) * d;
    auto block = temp_.segment(k, d);
    set.project_in_place(block);
    const double step = gamma * observations_.segment(k, d).norm();
    if (step > 0.0) {
      stats_.max_local_move_ratio =
          std::max(stats_.max_local_move_ratio, (block - state.theta.segment(k, d)).norm() / step);
    }
  }

  const GossipEvent event = sample_event(scheme_, topology_, n, streams.gossip);
  if (event.silent) ++stats_.silent_ticks;
  if (event.isolated) ++stats_.isolated_wakeups;
  gossip_step_in_place(temp_, event, scheme_.beta, topology_, state.dim);

  state.theta.swap(temp_);
  state.iteration = n;
}

RunResult run(const Problem& problem, const GossipScheme& scheme, const Topology& topology,
              const StepSchedule& schedule, NetworkState initial, const RunOptions& options, RunStreams& streams) {
  if (options.stride == 0) throw std::invalid_argument("run: trace stride must be positive");
  const ConstraintSet& set = problem.constraint_set();
  for (std::size_t i = 0; i < initial.agents; ++i) {
    if (!set.contains(initial.block(i))) throw std::invalid_argument("run: initial estimate outside the feasible set");
  }

  RunResult result;
  result.trace.dim = initial.dim;
  Optimizer optimizer(problem, scheme, topology, schedule);
  NetworkState state = std::move(initial);
  result.trace.records.push_back(make_record(state, problem, options.reference));
  try {
    for (std::size_t k = 0; k < options.iterations; ++k) {
      optimizer.iterate(state, streams);
      if (state.iteration % options.stride == 0 || k + 1 == options.iterations) {
        result.trace.records.push_back(make_record(state, problem, options.reference));
      }
    }
  } catch (const RunAborted& e) {
    result.error = e.what();
    result.failed_iteration = e.iteration();
  }
  result.final_state = std::move(state);
  result.stats = optimizer.stats();
  return result;
}

}  // namespace gossipopt
