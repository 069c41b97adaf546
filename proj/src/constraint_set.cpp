#include "gossipopt/constraint_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gossipopt/diagnostics.hpp"
#include "gossipopt/nnls.hpp"

namespace gossipopt {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kIllConditioned = 1e8;
constexpr std::size_t kMaxVertexCombinations = 2'000'000;

bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& x) { return x.allFinite(); }

// Enumerates vertices of {x : a_j^T x <= b_j} by solving every d-subset of
// constraints as equalities.
std::vector<Eigen::VectorXd> polytope_vertices(const std::vector<Halfspace>& hs, std::size_t d) {
  const std::size_t p = hs.size();
  double combos = 1.0;
  for (std::size_t k = 0; k < d; ++k) combos *= static_cast<double>(p - k) / static_cast<double>(k + 1);
  if (combos > static_cast<double>(kMaxVertexCombinations)) {
    throw std::invalid_argument("halfspace intersection has too many constraints to enumerate its vertices");
  }

  std::vector<Eigen::VectorXd> vertices;
  std::vector<std::size_t> pick(d);
  for (std::size_t k = 0; k < d; ++k) pick[k] = k;
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd a(di, di);
  Eigen::VectorXd b(di);
  while (true) {
    for (std::size_t r = 0; r < d; ++r) {
      a.row(static_cast<Eigen::Index>(r)) = hs[pick[r]].normal.transpose();
      b(static_cast<Eigen::Index>(r)) = hs[pick[r]].offset;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(b);
      bool feasible = x.allFinite();
      for (const auto& h : hs) {
        if (!feasible) break;
        const double scale = 1.0 + std::abs(h.offset) + h.normal.norm() * x.norm();
        if (h.normal.dot(x) - h.offset > 1e-9 * scale) feasible = false;
      }
      if (feasible) vertices.push_back(x);
    }
    // next combination
    std::size_t k = d;
    while (k > 0 && pick[k - 1] == p - d + (k - 1)) --k;
    if (k == 0) break;
    ++pick[k - 1];
    for (std::size_t r = k; r < d; ++r) pick[r] = pick[r - 1] + 1;
  }
  return vertices;
}

}  // namespace

ConstraintSet::ConstraintSet(Shape shape, std::size_t dim, double active_tolerance)
    : shape_(std::move(shape)), dim_(dim), active_tolerance_(active_tolerance) {
  if (!(active_tolerance >= 0.0) || !std::isfinite(active_tolerance)) {
    throw std::invalid_argument("active tolerance must be a non-negative finite number");
  }
}

ConstraintSet ConstraintSet::ball(Eigen::VectorXd center, double radius, double active_tolerance) {
  if (center.size() == 0) throw std::invalid_argument("ball: dimension must be positive");
  if (!center.allFinite()) throw std::invalid_argument("ball: center must be finite");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("ball: radius must be positive");
  const auto d = static_cast<std::size_t>(center.size());
  ConstraintSet set(Ball{center, radius}, d, active_tolerance);
  set.bound_lower_ = center.array() - radius;
  set.bound_upper_ = center.array() + radius;
  return set;
}

ConstraintSet ConstraintSet::box(Eigen::VectorXd lower, Eigen::VectorXd upper, double active_tolerance) {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw std::invalid_argument("box: bounds must be non-empty and of equal dimension");
  }
  if (!lower.allFinite() || !upper.allFinite()) throw std::invalid_argument("box: bounds must be finite");
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("box: lower must not exceed upper");
  const auto d = static_cast<std::size_t>(lower.size());
  ConstraintSet set(Box{lower, upper}, d, active_tolerance);
  set.bound_lower_ = lower;
  set.bound_upper_ = upper;
  return set;
}

ConstraintSet ConstraintSet::halfspaces(std::vector<Halfspace> halfspaces, double active_tolerance) {
  if (halfspaces.empty()) throw std::invalid_argument("halfspace intersection: no halfspaces given");
  const Eigen::Index d = halfspaces.front().normal.size();
  if (d == 0) throw std::invalid_argument("halfspace intersection: dimension must be positive");
  for (const auto& h : halfspaces) {
    if (h.normal.size() != d) throw std::invalid_argument("halfspace intersection: inconsistent dimensions");
    if (!h.normal.allFinite() || !std::isfinite(h.offset)) {
      throw std::invalid_argument("halfspace intersection: non-finite coefficients");
    }
    if (h.normal.norm() == 0.0) throw std::invalid_argument("halfspace intersection: zero normal vector");
  }

  // Bounded iff the normals positively span R^d, i.e. every +-e_k lies in their cone.
  Eigen::MatrixXd normals(d, static_cast<Eigen::Index>(halfspaces.size()));
  for (std::size_t j = 0; j < halfspaces.size(); ++j) {
    normals.col(static_cast<Eigen::Index>(j)) = halfspaces[j].normal / halfspaces[j].normal.norm();
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
      e(k) = sign;
      if (nnls(normals, e).residual_norm > 1e-9) {
        throw std::invalid_argument("halfspace intersection is unbounded");
      }
    }
  }

  const auto vertices = polytope_vertices(halfspaces, static_cast<std::size_t>(d));
  if (vertices.empty()) throw std::invalid_argument("halfspace intersection is empty");

  ConstraintSet set(HalfspaceIntersection{std::move(halfspaces)}, static_cast<std::size_t>(d), active_tolerance);
  set.bound_lower_ = vertices.front();
  set.bound_upper_ = vertices.front();
  for (const auto& v : vertices) {
    set.bound_lower_ = set.bound_lower_.cwiseMin(v);
    set.bound_upper_ = set.bound_upper_.cwiseMax(v);
  }
  return set;
}

std::size_t ConstraintSet::constraint_count() const {
  return std::visit(overloaded{[](const Ball&) -> std::size_t { return 1; },
                               [this](const Box&) -> std::size_t { return 2 * dim_; },
                               [](const HalfspaceIntersection& h) -> std::size_t { return h.halfspaces.size(); }},
                    shape_);
}

void ConstraintSet::require_finite(const Eigen::Ref<const Eigen::VectorXd>& x, const char* what) const {
  if (static_cast<std::size_t>(x.size()) != dim_) {
    std::ostringstream msg;
    msg << what << ": expected dimension " << dim_ << ", got " << x.size();
    throw std::invalid_argument(msg.str());
  }
  if (!all_finite(x)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

void ConstraintSet::require_member(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  require_finite(theta, "constraint set query");
  if (!contains(theta)) throw std::domain_error("point lies outside the feasible set");
}

Eigen::VectorXd ConstraintSet::constraint_values(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require_finite(x, "constraint_values");
  return std::visit(
      overloaded{[&](const Ball& b) {
                   Eigen::VectorXd q(1);
                   q(0) = (x - b.center).squaredNorm() - b.radius * b.radius;
                   return q;
                 },
                 [&](const Box& b) {
                   const auto d = static_cast<Eigen::Index>(dim_);
                   Eigen::VectorXd q(2 * d);
                   q.head(d) = b.lower - x;
                   q.tail(d) = x - b.upper;
                   return q;
                 },
                 [&](const HalfspaceIntersection& h) {
                   Eigen::VectorXd q(static_cast<Eigen::Index>(h.halfspaces.size()));
                   for (std::size_t j = 0; j < h.halfspaces.size(); ++j) {
                     q(static_cast<Eigen::Index>(j)) = h.halfspaces[j].normal.dot(x) - h.halfspaces[j].offset;
                   }
                   return q;
                 }},
      shape_);
}

bool ConstraintSet::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return constraint_values(x).maxCoeff() <= active_tolerance_;
}

Eigen::VectorXd ConstraintSet::project(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd out = x;
  project_in_place(out);
  return out;
}

void ConstraintSet::project_in_place(Eigen::Ref<Eigen::VectorXd> x) const {
  require_finite(x, "project");
  std::visit(overloaded{[&](const Ball& b) {
                          const double dist = (x - b.center).norm();
                          if (dist > b.radius) x = b.center + (b.radius / dist) * (x - b.center);
                        },
                        [&](const Box& b) { x = x.cwiseMax(b.lower).cwiseMin(b.upper); },
                        [&](const HalfspaceIntersection& h) { x = dykstra_projection(h.halfspaces, x).point; }},
             shape_);
}

ActiveSet ConstraintSet::active_set(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  require_member(theta);
  const Eigen::VectorXd q = constraint_values(theta);
  ActiveSet active;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (std::abs(q(j)) <= active_tolerance_) active.push_back(static_cast<std::size_t>(j));
  }
  return active;
}

Eigen::MatrixXd ConstraintSet::active_normals(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                              const ActiveSet& active) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd normals(d, static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::size_t j = active[k];
    const auto col = static_cast<Eigen::Index>(k);
    std::visit(overloaded{[&](const Ball& b) { normals.col(col) = 2.0 * (theta - b.center); },
                          [&](const Box&) {
                            normals.col(col).setZero();
                            if (j < dim_) {
                              normals(static_cast<Eigen::Index>(j), col) = -1.0;
                            } else {
                              normals(static_cast<Eigen::Index>(j - dim_), col) = 1.0;
                            }
                          },
                          [&](const HalfspaceIntersection& h) { normals.col(col) = h.halfspaces[j].normal; }},
               shape_);
  }
  return normals;
}

Eigen::VectorXd ConstraintSet::project_tangent_cone(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                                    const Eigen::Ref<const Eigen::VectorXd>& v) const {
  require_finite(v, "project_tangent_cone");
  const ActiveSet active = active_set(theta);
  if (active.empty()) return v;

  return std::visit(
      overloaded{[&](const Ball& b) -> Eigen::VectorXd {
                   const Eigen::VectorXd n = (theta - b.center).normalized();
                   const double outward = n.dot(v);
                   return outward > 0.0 ? Eigen::VectorXd(v - outward * n) : Eigen::VectorXd(v);
                 },
                 [&](const Box&) -> Eigen::VectorXd {
                   Eigen::VectorXd out = v;
                   for (std::size_t j : active) {
                     if (j < dim_) {
                       const auto k = static_cast<Eigen::Index>(j);
                       out(k) = std::max(out(k), 0.0);
                     } else {
                       const auto k = static_cast<Eigen::Index>(j - dim_);
                       out(k) = std::min(out(k), 0.0);
                     }
                   }
                   return out;
                 },
                 [&](const HalfspaceIntersection&) -> Eigen::VectorXd {
                   const Eigen::MatrixXd normals = active_normals(theta, active);
                   if (active.size() > 1) {
                     const double cond = active_normals_condition(theta);
                     if (cond > kIllConditioned) {
                       std::ostringstream msg;
                       msg << "active constraint normals are ill-conditioned (condition number " << cond
                           << "); constraint qualification may fail";
                       warn(msg.str());
                     }
                   }
                   const NnlsResult fit = nnls(normals, v);
                   return v - normals * fit.coefficients;
                 }},
      shape_);
}

Eigen::VectorXd ConstraintSet::project_normal_cone(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                                   const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return v - project_tangent_cone(theta, v);
}

double ConstraintSet::kkt_residual(const Eigen::Ref<const Eigen::VectorXd>& grad,
                                   const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  return project_tangent_cone(theta, -grad).norm();
}

double ConstraintSet::active_normals_condition(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const ActiveSet active = active_set(theta);
  if (active.size() <= 1) return 1.0;
  if (active.size() > dim_) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd normals = active_normals(theta, active);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(normals);
  const auto& s = svd.singularValues();
  const double smallest = s(s.size() - 1);
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smallest;
}

double ConstraintSet::diameter() const {
  return std::visit(overloaded{[](const Ball& b) { return 2.0 * b.radius; },
                               [](const Box& b) { return (b.upper - b.lower).norm(); },
                               [this](const HalfspaceIntersection&) { return (bound_upper_ - bound_lower_).norm(); }},
                    shape_);
}

Eigen::VectorXd ConstraintSet::sample_uniform(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim_);
  auto in_bounds = [&] {
    Eigen::VectorXd x(d);
    for (Eigen::Index k = 0; k < d; ++k) x(k) = bound_lower_(k) + (bound_upper_(k) - bound_lower_(k)) * unit(rng);
    return x;
  };

  if (const auto* b = std::get_if<Ball>(&shape_)) {
    if (dim_ <= 3) {
      while (true) {
        Eigen::VectorXd x = in_bounds();
        if ((x - b->center).squaredNorm() <= b->radius * b->radius) return x;
      }
    }
    // Rejection becomes wasteful in higher dimension: direction times radial law.
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd dir(d);
    do {
      for (Eigen::Index k = 0; k < d; ++k) dir(k) = gauss(rng);
    } while (dir.norm() == 0.0);
    const double r = b->radius * std::pow(unit(rng), 1.0 / static_cast<double>(dim_));
    return b->center + r * dir.normalized();
  }
  if (std::holds_alternative<Box>(shape_)) return in_bounds();

  constexpr int kMaxTries = 1'000'000;
  for (int t = 0; t < kMaxTries; ++t) {
    Eigen::VectorXd x = in_bounds();
    if (constraint_values(x).maxCoeff() <= 0.0) return x;
  }
  throw std::runtime_error("sample_uniform: rejection sampling failed; the polytope is too thin");
}

DykstraResult dykstra_projection(const std::vector<Halfspace>& halfspaces,
                                 const Eigen::Ref<const Eigen::VectorXd>& x, int max_iterations,
                                 double tolerance) {
  DykstraResult out;
  out.point = x;
  const std::size_t p = halfspaces.size();
  std::vector<Eigen::VectorXd> increments(p, Eigen::VectorXd::Zero(x.size()));
  Eigen::VectorXd y(x.size());
  for (int it = 1; it <= max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const Halfspace& h = halfspaces[j];
      y = out.point + increments[j];
      const double excess = h.normal.dot(y) - h.offset;
      Eigen::VectorXd next = y;
      if (excess > 0.0) next -= (excess / h.normal.squaredNorm()) * h.normal;
      const Eigen::VectorXd new_increment = y - next;
      change += (next - out.point).squaredNorm() + (new_increment - increments[j]).squaredNorm();
      increments[j] = new_increment;
      out.point = next;
    }
    out.iterations = it;
    const double scale = std::max(1.0, out.point.norm());
    if (std::sqrt(change) <= tolerance * scale) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace gossipopt
