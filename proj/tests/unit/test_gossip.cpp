#include <cmath>

#include "doctest.h"

#include "gossipopt/gossip.hpp"

using namespace gossipopt;

namespace {

GossipScheme pairwise(double beta = 0.5) { return GossipScheme{SchemeKind::pairwise, beta, std::nullopt}; }
GossipScheme broadcast(double beta = 0.5) { return GossipScheme{SchemeKind::broadcast, beta, std::nullopt}; }

Topology two_triangles() { return Topology(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}}); }

}  // namespace

TEST_CASE("topology construction") {
  const Topology t(4, {{0, 1}, {1, 0}, {2, 3}});
  CHECK(t.edges().size() == 2);
  CHECK(t.component_count() == 2);
  CHECK_FALSE(t.connected());
  CHECK(Topology::cycle(10).connected());
  CHECK(Topology::complete(5).degree(3) == 4);
  CHECK(Topology::path(3).degree(1) == 2);
  CHECK_THROWS_AS(Topology(3, {{1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(Topology(3, {{0, 3}}), std::invalid_argument);
}

TEST_CASE("pairwise event matrix") {
  const Topology t = Topology::complete(3);
  GossipEvent e;
  e.kind = GossipEvent::Kind::pairwise;
  e.node = 0;
  e.partner = 1;
  Eigen::Matrix3d expected;
  expected << .5, .5, 0, .5, .5, 0, 0, 0, 1;
  CHECK(event_matrix(e, 0.5, t) == expected);
  // symmetric convention for other beta
  const Eigen::MatrixXd w = event_matrix(e, 0.8, t);
  CHECK(w(0, 0) == doctest::Approx(0.8));
  CHECK(w(0, 1) == doctest::Approx(0.2));
  CHECK(w(1, 1) == doctest::Approx(0.8));
  CHECK((w - w.transpose()).norm() == 0.0);
}

TEST_CASE("broadcast event on a path is not column stochastic") {
  const Topology t = Topology::path(3);
  GossipEvent e;
  e.kind = GossipEvent::Kind::broadcast;
  e.node = 1;
  Eigen::Matrix3d expected;
  expected << .5, .5, 0, 0, 1, 0, 0, .5, .5;
  const Eigen::MatrixXd w = event_matrix(e, 0.5, t);
  CHECK(w == expected);
  CHECK(w.colwise().sum() == Eigen::RowVector3d(0.5, 2.0, 0.5));
  CHECK((w.rowwise().sum().array() == 1.0).all());
}

TEST_CASE("rarefaction can force the silent branch") {
  GossipScheme s = broadcast();
  s.rarefaction = Rarefaction{1e-300, 0.3};
  Rng rng(1);
  const Topology t = Topology::cycle(5);
  for (int k = 0; k < 20; ++k) {
    const GossipEvent e = sample_event(s, t, 10, rng);
    CHECK(e.silent);
    CHECK(e.kind == GossipEvent::Kind::identity);
  }
  CHECK(sample_matrix(s, t, 10, rng) == Eigen::MatrixXd::Identity(5, 5));
}

TEST_CASE("isolated woken node keeps an identity matrix") {
  const Topology t(3, {{0, 1}});
  Rng rng(4);
  int isolated = 0;
  for (int k = 0; k < 300; ++k) {
    const GossipEvent e = sample_event(pairwise(), t, 1, rng);
    if (e.isolated) {
      ++isolated;
      CHECK(e.node == 2);
      CHECK(event_matrix(e, 0.5, t) == Eigen::MatrixXd::Identity(3, 3));
    }
  }
  CHECK(isolated > 50);
}

TEST_CASE("expected matrix") {
  const Topology k2 = Topology::complete(2);
  Eigen::Matrix2d half;
  half << .5, .5, .5, .5;
  CHECK((expected_matrix(pairwise(), k2) - half).norm() < 1e-15);

  // hand enumeration: broadcaster 0 gives [[1,0],[.5,.5]], broadcaster 1 gives [[.5,.5],[0,1]]
  Eigen::Matrix2d b0, b1;
  b0 << 1, 0, .5, .5;
  b1 << .5, .5, 0, 1;
  const Eigen::Matrix2d by_hand = 0.5 * (b0 + b1);
  CHECK((expected_matrix(broadcast(), k2) - by_hand).norm() < 1e-15);
  CHECK(by_hand(0, 0) == 0.75);

  for (const Topology& t : {Topology::cycle(7), Topology::path(5), two_triangles(), Topology(4, {{0, 1}, {0, 2}, {0, 3}})}) {
    for (const GossipScheme& s : {pairwise(), broadcast(), pairwise(0.3), broadcast(0.8)}) {
      const Eigen::MatrixXd ew = expected_matrix(s, t);
      CHECK((ew.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK((ew.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("spectral rho") {
  CHECK(spectral_rho(pairwise(), Topology::complete(2)) < 1e-14);
  CHECK(std::abs(spectral_rho(pairwise(), Topology(4, {{0, 1}, {2, 3}})) - 1.0) < 1e-10);
  CHECK(std::abs(spectral_rho(broadcast(), two_triangles()) - 1.0) < 1e-10);
  const double cycle10 = spectral_rho(pairwise(), Topology::cycle(10));
  CHECK(cycle10 > 0.0);
  CHECK(cycle10 < 1.0);
  // regression anchor: pairwise averaging on the 10-cycle
  CHECK(cycle10 == doctest::Approx(0.98090169943749).epsilon(1e-10));
  CHECK(spectral_rho(broadcast(), Topology::cycle(10)) < 1.0);
}

TEST_CASE("spectral rho is invariant under relabeling") {
  const Topology t = Topology(5, {{0, 1}, {1, 2}, {2, 3}, {1, 4}});
  const Topology r = t.relabeled({3, 0, 4, 1, 2});
  CHECK(spectral_rho(broadcast(), t) == doctest::Approx(spectral_rho(broadcast(), r)).epsilon(1e-12));
  CHECK(spectral_rho(pairwise(), t) == doctest::Approx(spectral_rho(pairwise(), r)).epsilon(1e-12));
}

TEST_CASE("empirical mean of sampled matrices matches the expectation") {
  const Topology t = Topology::cycle(6);
  for (const GossipScheme& s : {pairwise(), broadcast()}) {
    const Eigen::MatrixXd ew = expected_matrix(s, t);
    Rng rng(12);
    const int n = 20000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(6, 6);
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(6, 6);
    for (int k = 0; k < n; ++k) {
      const Eigen::MatrixXd w = sample_matrix(s, t, 1, rng);
      sum += w;
      sq += w.cwiseProduct(w);
    }
    const Eigen::MatrixXd mean = sum / n;
    const Eigen::MatrixXd var = sq / n - mean.cwiseProduct(mean);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        const double se = std::sqrt(std::max(var(i, j), 0.0) / n);
        CHECK(std::abs(mean(i, j) - ew(i, j)) <= 4.0 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("rarefied rho_n") {
  GossipScheme s = pairwise();
  const Topology t = Topology::cycle(8);
  const double rho = spectral_rho(s, t);
  CHECK(rho_n(s, t, 1) == rho);
  s.rarefaction = Rarefaction{1.0, 0.0};
  CHECK(rho_n(s, t, 1) == doctest::Approx(rho_n(s, t, 1000)));
  s.rarefaction = Rarefaction{1.0, 0.3};
  CHECK(1.0 - rho_n(s, t, 1) == doctest::Approx(1.0 - rho));
  CHECK(1.0 - rho_n(s, t, 1000) == doctest::Approx((1.0 - rho) / std::pow(1000.0, 0.3)));
  CHECK(s.rarefaction->activation_probability(1) == 1.0);
}

TEST_CASE("consensus rate check") {
  const ConsensusRateCheck plug = check_consensus_rate(0.3, 0.9, 0.5);
  CHECK(plug.ok());
  const ConsensusRateCheck bad = check_consensus_rate(0.4, 0.7, 0.5);
  CHECK_FALSE(bad.exponents_admissible);
  CHECK_FALSE(bad.ok());
  CHECK(bad.explanation.find("eta") != std::string::npos);
  CHECK(check_consensus_rate(0.2, 0.8, 0.1).ok());
  CHECK(check_consensus_rate(0.0, 0.9, 0.1).ok());

  GossipScheme s = broadcast();
  s.rarefaction = Rarefaction{1.0, 0.4};
  CHECK_THROWS_AS(require_consensus_rate(s, Topology::complete(4), 0.7), std::invalid_argument);
  s.rarefaction = Rarefaction{1.0, 0.2};
  CHECK_NOTHROW(require_consensus_rate(s, Topology::complete(4), 0.8));
}

TEST_CASE("scheme validation") {
  CHECK_THROWS_AS(pairwise(0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(broadcast(1.0).validate(), std::invalid_argument);
  GossipScheme s = pairwise();
  s.rarefaction = Rarefaction{1.0, 0.6};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.rarefaction = Rarefaction{0.0, 0.2};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
