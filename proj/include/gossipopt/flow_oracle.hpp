#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gossipopt/constraint_set.hpp"
#include "gossipopt/problems.hpp"

namespace gossipopt {

struct SmoothObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

/// f = (1/N) sum_i f_i of a problem, with its exact gradient.
SmoothObjective objective_of(const Problem& problem);

/// Discretised projected gradient flow dx/dt = P_T(x)(-grad f(x)).
struct FlowTrajectory {
  double step = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> values;
};

/// 1e-3 * diameter(G) / |grad f(x0)|, falling back to 1e-3 * diameter(G) when
/// the gradient vanishes at x0.
double default_flow_step(const ConstraintSet& set, const SmoothObjective& f, const Eigen::VectorXd& x0);

/// Projected Euler x_{k+1} = P_G(x_k - h grad f(x_k)) on [0, horizon].
/// A non-positive step selects default_flow_step. Throws std::runtime_error
/// if the gradient becomes non-finite.
FlowTrajectory integrate_flow(const ConstraintSet& set, const SmoothObjective& f, const Eigen::VectorXd& x0,
                              double horizon, double step = 0.0);

struct KktCandidate {
  Eigen::VectorXd point;
  double value = 0.0;
  double residual = 0.0;
};

struct KktSearchOptions {
  std::size_t starts = 8;
  std::uint64_t seed = 0;
  double step = 0.0;  // <= 0: default_flow_step per start
  std::size_t max_steps = 2'000'000;
  double tolerance = 1e-8;
  double dedup_radius = 1e-4;
};

struct KktSearchResult {
  std::vector<KktCandidate> candidates;  // sorted by objective value
  std::size_t converged_starts = 0;
  std::string diagnostic;
};

/// Multistart flow integration from uniform feasible starts until the KKT
/// residual drops below tolerance; converged endpoints closer than
/// dedup_radius are merged.
KktSearchResult find_kkt(const ConstraintSet& set, const SmoothObjective& f, const KktSearchOptions& options);

struct LyapunovReport {
  std::size_t steps = 0;
  std::size_t increases = 0;       // steps with f(x_{k+1}) > f(x_k) + tol
  std::size_t rate_matches = 0;    // steps whose descent rate matches -|P_T(-grad f)|^2 within O(h)
  double lipschitz = 0.0;          // empirical gradient Lipschitz bound along the path
  double monotone_tolerance = 0.0;
  double max_increase = 0.0;

  bool monotone() const { return increases == 0; }
  double rate_match_fraction() const {
    return steps == 0 ? 1.0 : static_cast<double>(rate_matches) / static_cast<double>(steps);
  }
  bool passed(double min_fraction = 0.95) const { return monotone() && rate_match_fraction() >= min_fraction; }
};

/// Checks f is non-increasing along the trajectory up to 10 h^2 L_f and that
/// (f(x_{k+1}) - f(x_k))/h matches -|P_T(x_k)(-grad f(x_k))|^2 up to O(h).
LyapunovReport lyapunov_check(const FlowTrajectory& trajectory, const ConstraintSet& set, const SmoothObjective& f);

}  // namespace gossipopt
