#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gossipopt/rng.hpp"

namespace gossipopt {

inline constexpr double kDefaultActiveTolerance = 1e-9;

/// Closed Euclidean ball {x : |x - center| <= radius}; one constraint
/// q(x) = |x - center|^2 - radius^2.
struct Ball {
  Eigen::VectorXd center;
  double radius = 1.0;
};

/// Axis-aligned box lower <= x <= upper. Constraint j < d is the lower bound
/// of coordinate j (q = lower_j - x_j), constraint d + j is its upper bound
/// (q = x_j - upper_j).
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// a^T x <= b
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

/// Bounded, nonempty polytope given as an intersection of halfspaces.
struct HalfspaceIntersection {
  std::vector<Halfspace> halfspaces;
};

/// Sorted 0-based indices of the active inequality constraints.
using ActiveSet = std::vector<std::size_t>;

/// Compact convex feasible set described by finitely many smooth convex
/// inequality constraints q_j(x) <= 0.
///
/// Every query taking a point `theta` that must lie in the set throws
/// std::domain_error when some q_j(theta) exceeds the active tolerance.
/// Inputs with NaN or infinite entries raise std::invalid_argument.
class ConstraintSet {
 public:
  using Shape = std::variant<Ball, Box, HalfspaceIntersection>;

  static ConstraintSet ball(Eigen::VectorXd center, double radius,
                            double active_tolerance = kDefaultActiveTolerance);
  static ConstraintSet box(Eigen::VectorXd lower, Eigen::VectorXd upper,
                           double active_tolerance = kDefaultActiveTolerance);
  /// Throws std::invalid_argument if the intersection is empty or unbounded.
  static ConstraintSet halfspaces(std::vector<Halfspace> halfspaces,
                                  double active_tolerance = kDefaultActiveTolerance);

  std::size_t dimension() const { return dim_; }
  std::size_t constraint_count() const;
  double active_tolerance() const { return active_tolerance_; }
  const Shape& shape() const { return shape_; }

  /// q_j(x) for every constraint, in index order.
  Eigen::VectorXd constraint_values(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Euclidean projection onto the set.
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void project_in_place(Eigen::Ref<Eigen::VectorXd> x) const;

  ActiveSet active_set(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  /// Projections onto the tangent cone T(theta) and the normal cone N(theta).
  /// v = P_T(v) + P_N(v) with the two parts orthogonal.
  Eigen::VectorXd project_tangent_cone(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                       const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::VectorXd project_normal_cone(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                      const Eigen::Ref<const Eigen::VectorXd>& v) const;

  /// |P_T(theta)(-grad)|: zero exactly at KKT points of a function with gradient grad.
  double kkt_residual(const Eigen::Ref<const Eigen::VectorXd>& grad,
                      const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  /// Condition number of the active constraint gradients at theta (1 when at
  /// most one constraint is active, +inf when they are linearly dependent).
  double active_normals_condition(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  /// Diameter of the set; for halfspace intersections, the diagonal of an
  /// enclosing box (an upper bound).
  double diameter() const;

  /// Uniform draw from the set (rejection sampling where needed).
  Eigen::VectorXd sample_uniform(Rng& rng) const;

 private:
  ConstraintSet(Shape shape, std::size_t dim, double active_tolerance);

  void require_finite(const Eigen::Ref<const Eigen::VectorXd>& x, const char* what) const;
  void require_member(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  /// Gradients of the active constraints at theta, one per column.
  Eigen::MatrixXd active_normals(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                 const ActiveSet& active) const;

  Shape shape_;
  std::size_t dim_;
  double active_tolerance_;
  // Enclosing box, used for sampling and diameter of polytopes.
  Eigen::VectorXd bound_lower_;
  Eigen::VectorXd bound_upper_;
};

/// Dykstra's alternating projections onto an intersection of halfspaces.
struct DykstraResult {
  Eigen::VectorXd point;
  int iterations = 0;
  bool converged = false;
};
DykstraResult dykstra_projection(const std::vector<Halfspace>& halfspaces,
                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                 int max_iterations = 10000, double tolerance = 1e-12);

}  // namespace gossipopt
