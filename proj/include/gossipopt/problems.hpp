#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gossipopt/constraint_set.hpp"
#include "gossipopt/rng.hpp"

namespace gossipopt {

/// A distributed problem min_{theta in G} (1/N) sum_i f_i(theta) together with
/// the stochastic observation oracle the agents use.
///
/// observe() fills the stacked vector Y (size dN) given the stacked state; its
/// conditional mean is the stacked mean_observation(i, theta_i). For plain
/// gradient problems mean_observation = -grad f_i. Implementations are
/// immutable after construction, so a single instance may be shared by
/// concurrent runs that each own their Rng.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t agents() const = 0;
  virtual const ConstraintSet& constraint_set() const = 0;

  virtual double local_objective(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const = 0;
  virtual Eigen::VectorXd local_gradient(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const = 0;
  virtual Eigen::VectorXd mean_observation(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    return -local_gradient(agent, theta);
  }
  virtual void observe(const Eigen::VectorXd& stacked_theta, Rng& rng, Eigen::VectorXd& out) const = 0;

  virtual std::optional<Eigen::VectorXd> reference_minimizer() const { return std::nullopt; }

  /// f(theta) = (1/N) sum_i f_i(theta) and its gradient.
  double objective(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
};

// ---------------------------------------------------------------------------
// Stochastic least squares on the unit disk.
//
// f_i(theta) = E[(R_i - s_i^T theta)^2] with R_i ~ Normal(0.5, 1), so
// f_i(theta) = 1 + (0.5 - s_i^T theta)^2 and grad f_i = 2 s_i (s_i^T theta - 0.5).
// Agent i observes -2 s_i (s_i^T theta_i - R_i) with a fresh R_i.
class LeastSquaresDisk final : public Problem {
 public:
  static constexpr double kResponseMean = 0.5;
  static constexpr double kResponseStd = 1.0;

  explicit LeastSquaresDisk(std::vector<Eigen::Vector2d> regressors);
  /// Draws N regressors uniformly on the unit disk.
  static LeastSquaresDisk random(std::size_t n_agents, Rng& rng);

  std::size_t dimension() const override { return 2; }
  std::size_t agents() const override { return regressors_.size(); }
  const ConstraintSet& constraint_set() const override { return set_; }
  const std::vector<Eigen::Vector2d>& regressors() const { return regressors_; }

  double local_objective(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  Eigen::VectorXd local_gradient(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  void observe(const Eigen::VectorXd& stacked_theta, Rng& rng, Eigen::VectorXd& out) const override;
  std::optional<Eigen::VectorXd> reference_minimizer() const override { return minimizer_; }

 private:
  std::vector<Eigen::Vector2d> regressors_;
  ConstraintSet set_;
  Eigen::VectorXd minimizer_;
};

/// Minimizer of sum_i (0.5 - s_i^T theta)^2 over the unit disk by projected
/// gradient descent with step 1/(2 lambda_max(sum s_i s_i^T)), run until the
/// update is below 1e-12.
Eigen::VectorXd least_squares_disk_minimizer(const std::vector<Eigen::Vector2d>& regressors);

// ---------------------------------------------------------------------------
// Power allocation on an N-pair interference channel.

/// gains(j, i) is the gain from source j to destination i.
struct InterferenceChannel {
  Eigen::MatrixXd gains;
  Eigen::VectorXd noise_variance;
  Eigen::VectorXd max_power;
  Eigen::VectorXd weights;

  std::size_t users() const { return static_cast<std::size_t>(gains.rows()); }
  /// Throws std::invalid_argument unless every quantity is positive and sizes agree.
  void validate() const;
};

/// Q(x) = P(Z > x) for a standard normal Z.
double q_function(double x);

/// Error probability at destination i for gain column A^i = gains.col(i):
/// Q(sqrt(A^{i,i} p^i / (sigma_i^2 + sum_{j != i} A^{j,i} p^j))).
double error_probability(const InterferenceChannel& channel, const Eigen::Ref<const Eigen::VectorXd>& powers,
                         std::size_t i);
double error_probability(const Eigen::Ref<const Eigen::VectorXd>& gain_column, double noise_variance,
                         const Eigen::Ref<const Eigen::VectorXd>& powers, std::size_t i);

/// Gradient of error_probability w.r.t. the power vector. With log_scale the
/// k-th coordinate is multiplied by p^k (chain rule for u = log p); powers
/// must then be strictly positive.
Eigen::VectorXd error_probability_gradient(const InterferenceChannel& channel,
                                           const Eigen::Ref<const Eigen::VectorXd>& powers, std::size_t i,
                                           bool log_scale = false);
Eigen::VectorXd error_probability_gradient(const Eigen::Ref<const Eigen::VectorXd>& gain_column,
                                           double noise_variance, const Eigen::Ref<const Eigen::VectorXd>& powers,
                                           std::size_t i, bool log_scale = false);

/// Weighted sum of error probabilities sum_i beta_i P_{e,i}(p).
double weighted_error_sum(const InterferenceChannel& channel, const Eigen::Ref<const Eigen::VectorXd>& powers);

/// Independent Rician-faded gains matched to a given mean and variance.
///
/// A gain is |m + w|^2 with deterministic line-of-sight amplitude m and
/// diffuse w ~ CN(0, s^2). Then E = m^2 + s^2 and Var = 2 m^2 s^2 + s^4 =
/// E^2 - m^4, hence m^2 = sqrt(E^2 - Var), s^2 = E - m^2. Requires Var <= E^2.
class RicianFading {
 public:
  RicianFading(Eigen::MatrixXd mean_gains, double variance);

  const Eigen::MatrixXd& mean_gains() const { return mean_; }
  double variance() const { return variance_; }
  double line_of_sight_power(Eigen::Index j, Eigen::Index i) const { return los_power_(j, i); }
  double diffuse_power(Eigen::Index j, Eigen::Index i) const { return diffuse_power_(j, i); }

  double sample_gain(Eigen::Index j, Eigen::Index i, Rng& rng) const;
  /// Fresh draw of the gains A^{j,i}, j = 0..N-1, seen by destination i.
  Eigen::VectorXd sample_column(Eigen::Index i, Rng& rng) const;

 private:
  Eigen::MatrixXd mean_;
  double variance_;
  Eigen::MatrixXd los_power_;
  Eigen::MatrixXd diffuse_power_;
};

/// Each agent holds an estimate of the whole power vector (d = N). Agent i
/// observes -beta_i grad P_{e,i}(theta_i) on its own channel column, freshly
/// faded when a fading model is present. The feasible set is
/// prod_i [min_power, P_i]; a positive lower bound keeps the gradient finite.
class PowerAllocation final : public Problem {
 public:
  static constexpr double kDefaultMinPower = 1e-3;

  PowerAllocation(InterferenceChannel channel, std::optional<RicianFading> fading = std::nullopt,
                  bool log_scale = true, double min_power = kDefaultMinPower,
                  std::optional<Eigen::VectorXd> reference = std::nullopt);

  std::size_t dimension() const override { return channel_.users(); }
  std::size_t agents() const override { return channel_.users(); }
  const ConstraintSet& constraint_set() const override { return set_; }
  const InterferenceChannel& channel() const { return channel_; }
  bool log_scale() const { return log_scale_; }
  const std::optional<RicianFading>& fading() const { return fading_; }

  /// Objective and gradient use the mean channel; with fading this is the
  /// mean-channel surrogate of the expected error probability.
  double local_objective(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  Eigen::VectorXd local_gradient(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  Eigen::VectorXd mean_observation(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  void observe(const Eigen::VectorXd& stacked_theta, Rng& rng, Eigen::VectorXd& out) const override;
  std::optional<Eigen::VectorXd> reference_minimizer() const override { return reference_; }

 private:
  InterferenceChannel channel_;
  std::optional<RicianFading> fading_;
  bool log_scale_;
  ConstraintSet set_;
  std::optional<Eigen::VectorXd> reference_;
};

// ---------------------------------------------------------------------------
// Per-agent quadratics f_i(x) = 0.5 x^T H_i x - c_i^T x observed with additive
// Gaussian noise; used for user-supplied problems.
class QuadraticProblem final : public Problem {
 public:
  struct Agent {
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
  };

  QuadraticProblem(std::vector<Agent> agents, ConstraintSet set, double noise_std,
                   std::optional<Eigen::VectorXd> reference = std::nullopt);

  std::size_t dimension() const override { return set_.dimension(); }
  std::size_t agents() const override { return agents_.size(); }
  const ConstraintSet& constraint_set() const override { return set_; }

  double local_objective(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  Eigen::VectorXd local_gradient(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  void observe(const Eigen::VectorXd& stacked_theta, Rng& rng, Eigen::VectorXd& out) const override;
  std::optional<Eigen::VectorXd> reference_minimizer() const override { return reference_; }

 private:
  std::vector<Agent> agents_;
  ConstraintSet set_;
  double noise_std_;
  std::optional<Eigen::VectorXd> reference_;
};

}  // namespace gossipopt
