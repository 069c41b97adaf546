#include "gossipopt/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gossipopt {

Topology::Topology(std::size_t n_agents, std::vector<Edge> edges) : n_(n_agents), adjacency_(n_agents) {
  if (n_agents == 0) throw std::invalid_argument("topology: at least one agent required");
  std::set<Edge> unique;
  for (auto [i, j] : edges) {
    if (i >= n_agents || j >= n_agents) throw std::invalid_argument("topology: edge index out of range");
    if (i == j) throw std::invalid_argument("topology: self-loops are not allowed");
    unique.insert({std::min(i, j), std::max(i, j)});
  }
  edges_.assign(unique.begin(), unique.end());
  for (auto [i, j] : edges_) {
    adjacency_[i].push_back(j);
    adjacency_[j].push_back(i);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

Topology Topology::complete(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  }
  return Topology(n, std::move(edges));
}

Topology Topology::cycle(std::size_t n) {
  std::vector<Edge> edges;
  if (n == 2) edges.emplace_back(0, 1);
  if (n > 2) {
    for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  }
  return Topology(n, std::move(edges));
}

Topology Topology::path(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Topology(n, std::move(edges));
}

std::size_t Topology::component_count() const {
  std::vector<std::size_t> parent(n_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n_;
  for (auto [i, j] : edges_) {
    const auto a = find(i), b = find(j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components;
}

Topology Topology::relabeled(const std::vector<std::size_t>& permutation) const {
  if (permutation.size() != n_) throw std::invalid_argument("relabeled: permutation size mismatch");
  std::vector<Edge> edges;
  for (auto [i, j] : edges_) edges.emplace_back(permutation.at(i), permutation.at(j));
  return Topology(n_, std::move(edges));
}

std::string to_string(SchemeKind kind) { return kind == SchemeKind::pairwise ? "pairwise" : "broadcast"; }

double Rarefaction::activation_probability(std::size_t n) const {
  if (n == 0) throw std::invalid_argument("rarefaction: iteration index starts at 1");
  return std::min(1.0, a / std::pow(static_cast<double>(n), eta));
}

void GossipScheme::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("gossip: beta must lie in (0, 1)");
  if (rarefaction) {
    if (!(rarefaction->a > 0.0) || !std::isfinite(rarefaction->a)) {
      throw std::invalid_argument("gossip: rarefaction constant a must be positive");
    }
    if (!(rarefaction->eta >= 0.0 && rarefaction->eta < 0.5)) {
      throw std::invalid_argument("gossip: rarefaction exponent eta must lie in [0, 0.5)");
    }
  }
}

GossipEvent sample_event(const GossipScheme& scheme, const Topology& topology, std::size_t n, Rng& rng) {
  GossipEvent event;
  if (scheme.rarefaction) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) >= scheme.rarefaction->activation_probability(n)) {
      event.silent = true;
      return event;
    }
  }
  std::uniform_int_distribution<std::size_t> pick_node(0, topology.agents() - 1);
  event.node = pick_node(rng);
  const auto nb = topology.neighbors(event.node);
  if (nb.empty()) {
    event.isolated = true;
    return event;
  }
  if (scheme.kind == SchemeKind::pairwise) {
    std::uniform_int_distribution<std::size_t> pick_nb(0, nb.size() - 1);
    event.kind = GossipEvent::Kind::pairwise;
    event.partner = nb[pick_nb(rng)];
  } else {
    event.kind = GossipEvent::Kind::broadcast;
  }
  return event;
}

GossipMatrix event_matrix(const GossipEvent& event, double beta, const Topology& topology) {
  const auto n = static_cast<Eigen::Index>(topology.agents());
  GossipMatrix w = GossipMatrix::Identity(n, n);
  const auto i = static_cast<Eigen::Index>(event.node);
  switch (event.kind) {
    case GossipEvent::Kind::identity:
      break;
    case GossipEvent::Kind::pairwise: {
      const auto j = static_cast<Eigen::Index>(event.partner);
      w(i, i) = beta;
      w(i, j) = 1.0 - beta;
      w(j, j) = beta;
      w(j, i) = 1.0 - beta;
      break;
    }
    case GossipEvent::Kind::broadcast:
      for (std::size_t k : topology.neighbors(event.node)) {
        const auto kk = static_cast<Eigen::Index>(k);
        w(kk, kk) = 1.0 - beta;
        w(kk, i) = beta;
      }
      break;
  }
  return w;
}

GossipMatrix sample_matrix(const GossipScheme& scheme, const Topology& topology, std::size_t n, Rng& rng) {
  return event_matrix(sample_event(scheme, topology, n, rng), scheme.beta, topology);
}

namespace {

// Calls visit(probability, event) for every activation event of the base scheme.
template <class Visit>
void enumerate_events(const GossipScheme& scheme, const Topology& topology, Visit&& visit) {
  const double p_node = 1.0 / static_cast<double>(topology.agents());
  for (std::size_t i = 0; i < topology.agents(); ++i) {
    const auto nb = topology.neighbors(i);
    GossipEvent e;
    e.node = i;
    if (nb.empty()) {
      e.isolated = true;
      visit(p_node, e);
      continue;
    }
    if (scheme.kind == SchemeKind::broadcast) {
      e.kind = GossipEvent::Kind::broadcast;
      visit(p_node, e);
    } else {
      e.kind = GossipEvent::Kind::pairwise;
      const double p_pair = p_node / static_cast<double>(nb.size());
      for (std::size_t j : nb) {
        e.partner = j;
        visit(p_pair, e);
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd expected_matrix(const GossipScheme& scheme, const Topology& topology, std::optional<std::size_t> n) {
  scheme.validate();
  const auto size = static_cast<Eigen::Index>(topology.agents());
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(size, size);
  enumerate_events(scheme, topology,
                   [&](double p, const GossipEvent& e) { mean += p * event_matrix(e, scheme.beta, topology); });
  if (scheme.rarefaction) {
    if (!n) throw std::invalid_argument("expected_matrix: rarefied scheme needs an iteration index");
    const double q = scheme.rarefaction->activation_probability(*n);
    mean = q * mean + (1.0 - q) * Eigen::MatrixXd::Identity(size, size);
  }
  return mean;
}

Eigen::MatrixXd expected_disagreement_operator(const GossipScheme& scheme, const Topology& topology) {
  scheme.validate();
  const auto size = static_cast<Eigen::Index>(topology.agents());
  const Eigen::MatrixXd k =
      Eigen::MatrixXd::Identity(size, size) - Eigen::MatrixXd::Constant(size, size, 1.0 / static_cast<double>(size));
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(size, size);
  enumerate_events(scheme, topology, [&](double p, const GossipEvent& e) {
    const GossipMatrix w = event_matrix(e, scheme.beta, topology);
    op += p * (w.transpose() * k * w);
  });
  return 0.5 * (op + op.transpose());
}

double spectral_rho(const GossipScheme& scheme, const Topology& topology) {
  const Eigen::MatrixXd op = expected_disagreement_operator(scheme, topology);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double rho_n(const GossipScheme& scheme, const Topology& topology, std::size_t n) {
  GossipScheme base = scheme;
  base.rarefaction.reset();
  const double gap = 1.0 - spectral_rho(base, topology);
  const double q = scheme.rarefaction ? scheme.rarefaction->activation_probability(n) : 1.0;
  return 1.0 - q * gap;
}

ConsensusRateCheck check_consensus_rate(double eta, double xi, double base_gap) {
  ConsensusRateCheck check;
  std::ostringstream why;
  const bool gap_positive = base_gap > 1e-12;
  check.rate_diverges = gap_positive && eta < 1.0;
  // (1 - rho_n) / (n^alpha gamma_n) ~ n^(xi - alpha - eta) stays bounded away
  // from 0 for some alpha in (1/2, xi) exactly when eta < xi - 1/2.
  check.step_compatible = gap_positive && eta < xi - 0.5;
  check.exponents_admissible = eta >= 0.0 && eta < xi - 0.5 && xi - 0.5 <= 0.5;
  if (!gap_positive) why << "spectral gap is zero (graph disconnected): consensus is not guaranteed. ";
  if (!check.exponents_admissible) {
    why << "rarefaction exponent eta=" << eta << " and step exponent xi=" << xi
        << " violate 0 <= eta < xi - 1/2 <= 1/2 (need eta < " << (xi - 0.5) << "). ";
  }
  check.explanation = why.str();
  if (!check.explanation.empty() && check.explanation.back() == ' ') check.explanation.pop_back();
  return check;
}

void require_consensus_rate(const GossipScheme& scheme, const Topology& topology, double xi) {
  GossipScheme base = scheme;
  base.rarefaction.reset();
  const double gap = 1.0 - spectral_rho(base, topology);
  const double eta = scheme.rarefaction ? scheme.rarefaction->eta : 0.0;
  const ConsensusRateCheck check = check_consensus_rate(eta, xi, gap);
  if (!check.ok()) throw std::invalid_argument(check.explanation);
}

}  // namespace gossipopt
