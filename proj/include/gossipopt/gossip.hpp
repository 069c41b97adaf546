#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gossipopt/rng.hpp"

namespace gossipopt {

/// Undirected communication graph on agents 0..N-1.
class Topology {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  /// Duplicate edges are merged; self-loops and out-of-range indices throw.
  Topology(std::size_t n_agents, std::vector<Edge> edges);

  static Topology complete(std::size_t n);
  static Topology cycle(std::size_t n);
  static Topology path(std::size_t n);

  std::size_t agents() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const std::size_t> neighbors(std::size_t i) const { return adjacency_.at(i); }
  std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }
  std::size_t component_count() const;
  bool connected() const { return component_count() == 1; }

  /// Same graph with agent i renamed permutation[i].
  Topology relabeled(const std::vector<std::size_t>& permutation) const;

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

enum class SchemeKind { pairwise, broadcast };

std::string to_string(SchemeKind kind);

/// Communication becomes rare: at iteration n the network exchanges
/// information with probability min(1, a / n^eta), otherwise W_n = I.
struct Rarefaction {
  double a = 1.0;
  double eta = 0.0;

  double activation_probability(std::size_t n) const;
};

struct GossipScheme {
  SchemeKind kind = SchemeKind::pairwise;
  double beta = 0.5;
  std::optional<Rarefaction> rarefaction;

  /// Throws std::invalid_argument unless beta in (0,1), a > 0, eta in [0, 1/2).
  void validate() const;
};

/// One realisation of the random communication step, stored sparsely.
struct GossipEvent {
  enum class Kind { identity, pairwise, broadcast };
  Kind kind = Kind::identity;
  std::size_t node = 0;     // woken agent
  std::size_t partner = 0;  // pairwise partner
  bool silent = false;      // rarefaction suppressed communication
  bool isolated = false;    // woken agent had no neighbor
};

/// Dense N x N row-stochastic weight matrix W_n.
using GossipMatrix = Eigen::MatrixXd;

/// Draws the communication event of iteration n (n >= 1).
GossipEvent sample_event(const GossipScheme& scheme, const Topology& topology, std::size_t n, Rng& rng);

/// Weight matrix of an event. Pairwise: rows i and j keep weight beta on
/// themselves and 1-beta on the other. Broadcast from i: each neighbour k gets
/// w(k,i) = beta, w(k,k) = 1-beta. All other rows are identity rows.
GossipMatrix event_matrix(const GossipEvent& event, double beta, const Topology& topology);

GossipMatrix sample_matrix(const GossipScheme& scheme, const Topology& topology, std::size_t n, Rng& rng);

/// E[W] by enumeration of the activation events. With rarefaction, pass the
/// iteration index to fold in the silence probability.
Eigen::MatrixXd expected_matrix(const GossipScheme& scheme, const Topology& topology,
                                std::optional<std::size_t> n = std::nullopt);

/// E[W^T (I - 11^T/N) W] for the base (non-rarefied) scheme.
Eigen::MatrixXd expected_disagreement_operator(const GossipScheme& scheme, const Topology& topology);

/// Spectral norm of expected_disagreement_operator; < 1 iff the graph is connected.
double spectral_rho(const GossipScheme& scheme, const Topology& topology);

/// rho_n with rarefaction: 1 - rho_n = min(1, a/n^eta) (1 - spectral_rho).
double rho_n(const GossipScheme& scheme, const Topology& topology, std::size_t n);

/// Whether the consensus-rate conditions on (rho_n, gamma_n) hold for
/// 1 - rho_n ~ a gap / n^eta and gamma_n = gamma0 / n^xi.
struct ConsensusRateCheck {
  bool rate_diverges = false;       // n (1 - rho_n) -> infinity
  bool step_compatible = false;     // liminf (1 - rho_n) / (n^alpha gamma_n) > 0 for some alpha > 1/2
  bool exponents_admissible = false;  // 0 <= eta < xi - 1/2 <= 1/2
  std::string explanation;

  bool ok() const { return rate_diverges && step_compatible && exponents_admissible; }
};

ConsensusRateCheck check_consensus_rate(double eta, double xi, double base_gap);

/// Throws std::invalid_argument with the explanation when the check fails.
void require_consensus_rate(const GossipScheme& scheme, const Topology& topology, double xi);

}  // namespace gossipopt
