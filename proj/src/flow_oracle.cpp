#include "gossipopt/flow_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "gossipopt/rng.hpp"

namespace gossipopt {

SmoothObjective objective_of(const Problem& problem) {
  return SmoothObjective{[&problem](const Eigen::VectorXd& x) { return problem.objective(x); },
                         [&problem](const Eigen::VectorXd& x) { return problem.gradient(x); }};
}

double default_flow_step(const ConstraintSet& set, const SmoothObjective& f, const Eigen::VectorXd& x0) {
  const double scale = 1e-3 * set.diameter();
  const double g = f.gradient(x0).norm();
  if (!std::isfinite(g)) throw std::runtime_error("flow: non-finite gradient at the starting point");
  return g > 0.0 ? scale / g : scale;
}

FlowTrajectory integrate_flow(const ConstraintSet& set, const SmoothObjective& f, const Eigen::VectorXd& x0,
                              double horizon, double step) {
  if (!set.contains(x0)) throw std::invalid_argument("flow: starting point outside the feasible set");
  if (!(horizon >= 0.0)) throw std::invalid_argument("flow: horizon must be non-negative");
  FlowTrajectory traj;
  traj.step = step > 0.0 ? step : default_flow_step(set, f, x0);
  const auto n_steps = static_cast<std::size_t>(std::ceil(horizon / traj.step - 1e-9));

  Eigen::VectorXd x = x0;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  traj.values.reserve(n_steps + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.values.push_back(f.value(x));
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const Eigen::VectorXd g = f.gradient(x);
    if (!g.allFinite()) {
      std::ostringstream msg;
      msg << "flow: non-finite gradient at step " << k;
      throw std::runtime_error(msg.str());
    }
    x -= traj.step * g;
    set.project_in_place(x);
    traj.times.push_back(static_cast<double>(k) * traj.step);
    traj.states.push_back(x);
    traj.values.push_back(f.value(x));
  }
  return traj;
}

KktSearchResult find_kkt(const ConstraintSet& set, const SmoothObjective& f, const KktSearchOptions& options) {
  if (options.starts == 0) throw std::invalid_argument("find_kkt: at least one start required");
  KktSearchResult result;
  std::size_t diverged = 0;

  for (std::size_t s = 0; s < options.starts; ++s) {
    Rng rng = make_stream(options.seed, s, Substream::multistart);
    Eigen::VectorXd x = set.sample_uniform(rng);
    const double h = options.step > 0.0 ? options.step : default_flow_step(set, f, x);

    bool converged = false;
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= options.max_steps; ++k) {
      const Eigen::VectorXd g = f.gradient(x);
      if (!g.allFinite()) break;
      residual = set.kkt_residual(g, x);
      if (residual < options.tolerance) {
        converged = true;
        break;
      }
      if (k == options.max_steps) break;
      x -= h * g;
      set.project_in_place(x);
    }
    if (!converged) {
      ++diverged;
      continue;
    }
    ++result.converged_starts;

    auto same = std::find_if(result.candidates.begin(), result.candidates.end(), [&](const KktCandidate& c) {
      return (c.point - x).norm() <= options.dedup_radius;
    });
    if (same == result.candidates.end()) {
      result.candidates.push_back({x, f.value(x), residual});
    } else if (residual < same->residual) {
      *same = {x, f.value(x), residual};
    }
  }

  std::sort(result.candidates.begin(), result.candidates.end(),
            [](const KktCandidate& a, const KktCandidate& b) { return a.value < b.value; });
  if (diverged > 0) {
    std::ostringstream msg;
    msg << diverged << " of " << options.starts << " starts did not reach KKT residual " << options.tolerance
        << " within " << options.max_steps << " steps";
    result.diagnostic = msg.str();
  }
  return result;
}

LyapunovReport lyapunov_check(const FlowTrajectory& trajectory, const ConstraintSet& set, const SmoothObjective& f) {
  LyapunovReport report;
  const std::size_t count = trajectory.states.size();
  if (count < 2) return report;
  const double h = trajectory.step;
  constexpr double eps = std::numeric_limits<double>::epsilon();

  std::vector<Eigen::VectorXd> grads;
  grads.reserve(count);
  for (const auto& x : trajectory.states) grads.push_back(f.gradient(x));

  for (std::size_t k = 0; k + 1 < count; ++k) {
    const double moved = (trajectory.states[k + 1] - trajectory.states[k]).norm();
    if (moved > 0.0) report.lipschitz = std::max(report.lipschitz, (grads[k + 1] - grads[k]).norm() / moved);
  }

  // Boundary curvature enters the sliding error on a curved boundary.
  double curvature = 0.0;
  if (const auto* ball = std::get_if<Ball>(&set.shape())) curvature = 1.0 / ball->radius;

  report.monotone_tolerance = 10.0 * h * h * report.lipschitz;
  report.steps = count - 1;
  for (std::size_t k = 0; k + 1 < count; ++k) {
    const double f0 = trajectory.values[k];
    const double f1 = trajectory.values[k + 1];
    const double rounding = 4.0 * eps * std::max(std::abs(f0), std::abs(f1));
    const double increase = f1 - f0;
    report.max_increase = std::max(report.max_increase, increase);
    if (increase > report.monotone_tolerance + rounding) ++report.increases;

    const double g2 = grads[k].squaredNorm();
    const double tangential = set.project_tangent_cone(trajectory.states[k], -grads[k]).squaredNorm();
    const double rate = increase / h;
    const double allowed = 2.0 * h * g2 * (report.lipschitz + curvature * std::sqrt(g2)) + rounding / h;
    if (std::abs(rate + tangential) <= allowed) ++report.rate_matches;
  }
  return report;
}

}  // namespace gossipopt
