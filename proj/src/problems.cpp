#include "gossipopt/problems.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gossipopt {

double Problem::objective(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < agents(); ++i) sum += local_objective(i, theta);
  return sum / static_cast<double>(agents());
}

Eigen::VectorXd Problem::gradient(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension()));
  for (std::size_t i = 0; i < agents(); ++i) sum += local_gradient(i, theta);
  return sum / static_cast<double>(agents());
}

// --- least squares on the disk -------------------------------------------

namespace {
Eigen::VectorXd unit_disk_center() { return Eigen::VectorXd::Zero(2); }
}  // namespace

LeastSquaresDisk::LeastSquaresDisk(std::vector<Eigen::Vector2d> regressors)
    : regressors_(std::move(regressors)), set_(ConstraintSet::ball(unit_disk_center(), 1.0)) {
  if (regressors_.empty()) throw std::invalid_argument("least squares: at least one agent required");
  minimizer_ = least_squares_disk_minimizer(regressors_);
}

LeastSquaresDisk LeastSquaresDisk::random(std::size_t n_agents, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Eigen::Vector2d> s;
  s.reserve(n_agents);
  while (s.size() < n_agents) {
    const Eigen::Vector2d x(unit(rng), unit(rng));
    if (x.squaredNorm() <= 1.0) s.push_back(x);
  }
  return LeastSquaresDisk(std::move(s));
}

double LeastSquaresDisk::local_objective(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const double r = kResponseMean - regressors_.at(agent).dot(theta);
  return kResponseStd * kResponseStd + r * r;
}

Eigen::VectorXd LeastSquaresDisk::local_gradient(std::size_t agent,
                                                 const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const Eigen::Vector2d& s = regressors_.at(agent);
  return 2.0 * s * (s.dot(theta) - kResponseMean);
}

void LeastSquaresDisk::observe(const Eigen::VectorXd& stacked_theta, Rng& rng, Eigen::VectorXd& out) const {
  std::normal_distribution<double> response(kResponseMean, kResponseStd);
  out.resize(stacked_theta.size());
  for (std::size_t i = 0; i < regressors_.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(2 * i);
    const Eigen::Vector2d& s = regressors_[i];
    const double r = response(rng);
    const double residual = s.x() * stacked_theta(k) + s.y() * stacked_theta(k + 1) - r;
    out(k) = -2.0 * s.x() * residual;
    out(k + 1) = -2.0 * s.y() * residual;
  }
}

Eigen::VectorXd least_squares_disk_minimizer(const std::vector<Eigen::Vector2d>& regressors) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  for (const auto& s : regressors) {
    m += s * s.transpose();
    b += LeastSquaresDisk::kResponseMean * s;
  }
  const double lambda_max = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(m).eigenvalues().maxCoeff();
  if (!(lambda_max > 0.0)) return Eigen::VectorXd::Zero(2);
  const double step = 1.0 / (2.0 * lambda_max);

  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  constexpr long kMaxIterations = 50'000'000;
  for (long it = 0; it < kMaxIterations; ++it) {
    Eigen::Vector2d next = x - step * 2.0 * (m * x - b);
    const double norm = next.norm();
    if (norm > 1.0) next /= norm;
    const double update = (next - x).norm();
    x = next;
    if (update < 1e-12) break;
  }
  return x;
}

// --- interference channel --------------------------------------------------

void InterferenceChannel::validate() const {
  const auto n = gains.rows();
  if (n == 0 || gains.cols() != n) throw std::invalid_argument("channel: gain matrix must be square and non-empty");
  if (noise_variance.size() != n || max_power.size() != n || weights.size() != n) {
    throw std::invalid_argument("channel: noise, power and weight vectors must have one entry per user");
  }
  if (!gains.allFinite() || (gains.array() <= 0.0).any()) throw std::invalid_argument("channel: gains must be positive");
  if (!noise_variance.allFinite() || (noise_variance.array() <= 0.0).any()) {
    throw std::invalid_argument("channel: noise variances must be positive");
  }
  if (!max_power.allFinite() || (max_power.array() <= 0.0).any()) {
    throw std::invalid_argument("channel: maximum powers must be positive");
  }
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    throw std::invalid_argument("channel: weights must be positive");
  }
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace {

double interference_plus_noise(const Eigen::Ref<const Eigen::VectorXd>& gain_column, double noise_variance,
                               const Eigen::Ref<const Eigen::VectorXd>& powers, std::size_t i) {
  double total = noise_variance;
  for (Eigen::Index j = 0; j < powers.size(); ++j) {
    if (static_cast<std::size_t>(j) != i) total += gain_column(j) * powers(j);
  }
  return total;
}

void require_powers(const Eigen::Ref<const Eigen::VectorXd>& gain_column,
                    const Eigen::Ref<const Eigen::VectorXd>& powers, std::size_t i) {
  if (gain_column.size() != powers.size() || i >= static_cast<std::size_t>(powers.size())) {
    throw std::invalid_argument("error probability: dimension mismatch");
  }
  if (!powers.allFinite() || (powers.array() < 0.0).any()) {
    throw std::invalid_argument("error probability: powers must be finite and non-negative");
  }
}

}  // namespace

double error_probability(const Eigen::Ref<const Eigen::VectorXd>& gain_column, double noise_variance,
                         const Eigen::Ref<const Eigen::VectorXd>& powers, std::size_t i) {
  require_powers(gain_column, powers, i);
  const auto ii = static_cast<Eigen::Index>(i);
  const double sinr = gain_column(ii) * powers(ii) / interference_plus_noise(gain_column, noise_variance, powers, i);
  return q_function(std::sqrt(sinr));
}

double error_probability(const InterferenceChannel& channel, const Eigen::Ref<const Eigen::VectorXd>& powers,
                         std::size_t i) {
  const auto ii = static_cast<Eigen::Index>(i);
  return error_probability(channel.gains.col(ii), channel.noise_variance(ii), powers, i);
}

Eigen::VectorXd error_probability_gradient(const Eigen::Ref<const Eigen::VectorXd>& gain_column,
                                           double noise_variance, const Eigen::Ref<const Eigen::VectorXd>& powers,
                                           std::size_t i, bool log_scale) {
  require_powers(gain_column, powers, i);
  const auto ii = static_cast<Eigen::Index>(i);
  if (log_scale && powers(ii) <= 0.0) {
    throw std::invalid_argument("error probability gradient: log-scale parametrization needs strictly positive power");
  }
  const double denom = interference_plus_noise(gain_column, noise_variance, powers, i);
  const double own_gain = gain_column(ii);
  const double root_sinr = std::sqrt(own_gain * powers(ii) / denom);
  // -Q'(x) = phi(x)
  const double density = std::exp(-0.5 * root_sinr * root_sinr) / std::sqrt(2.0 * std::numbers::pi);

  Eigen::VectorXd grad(powers.size());
  for (Eigen::Index k = 0; k < powers.size(); ++k) {
    if (k == ii) {
      // d/dp_i Q(sqrt(S)) = -phi(sqrt S) * sqrt(A_ii / (I p_i)) / 2
      grad(k) = log_scale ? -0.5 * density * root_sinr
                          : -0.5 * density * std::sqrt(own_gain / (denom * powers(ii)));
    } else {
      // d/dp_k Q(sqrt(S)) = phi(sqrt S) * sqrt(S) * A_ki / (2 I)
      grad(k) = 0.5 * density * root_sinr * gain_column(k) / denom;
      if (log_scale) grad(k) *= powers(k);
    }
  }
  return grad;
}

Eigen::VectorXd error_probability_gradient(const InterferenceChannel& channel,
                                           const Eigen::Ref<const Eigen::VectorXd>& powers, std::size_t i,
                                           bool log_scale) {
  const auto ii = static_cast<Eigen::Index>(i);
  return error_probability_gradient(channel.gains.col(ii), channel.noise_variance(ii), powers, i, log_scale);
}

double weighted_error_sum(const InterferenceChannel& channel, const Eigen::Ref<const Eigen::VectorXd>& powers) {
  double total = 0.0;
  for (std::size_t i = 0; i < channel.users(); ++i) {
    total += channel.weights(static_cast<Eigen::Index>(i)) * error_probability(channel, powers, i);
  }
  return total;
}

// --- Rician fading ------------------------------------------------------------

RicianFading::RicianFading(Eigen::MatrixXd mean_gains, double variance)
    : mean_(std::move(mean_gains)), variance_(variance) {
  if (!(variance >= 0.0) || !std::isfinite(variance)) throw std::invalid_argument("rician: variance must be >= 0");
  if (!mean_.allFinite() || (mean_.array() <= 0.0).any()) throw std::invalid_argument("rician: mean gains must be positive");
  los_power_.resize(mean_.rows(), mean_.cols());
  diffuse_power_.resize(mean_.rows(), mean_.cols());
  for (Eigen::Index j = 0; j < mean_.rows(); ++j) {
    for (Eigen::Index i = 0; i < mean_.cols(); ++i) {
      const double mu = mean_(j, i);
      if (variance > mu * mu) {
        std::ostringstream msg;
        msg << "rician: variance " << variance << " exceeds squared mean " << mu * mu << " of gain (" << j << ","
            << i << "); no line-of-sight/diffuse split matches these moments";
        throw std::invalid_argument(msg.str());
      }
      const double los = variance == 0.0 ? mu : std::sqrt(mu * mu - variance);
      los_power_(j, i) = los;
      diffuse_power_(j, i) = mu - los;
    }
  }
}

double RicianFading::sample_gain(Eigen::Index j, Eigen::Index i, Rng& rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double re = gauss(rng);
  const double im = gauss(rng);
  const double m2 = los_power_(j, i);
  const double half_s = std::sqrt(0.5 * diffuse_power_(j, i));
  const double x = half_s * re;
  const double y = half_s * im;
  // |m + x + i y|^2 written so that zero diffuse power returns m^2 exactly.
  return m2 + 2.0 * std::sqrt(m2) * x + x * x + y * y;
}

Eigen::VectorXd RicianFading::sample_column(Eigen::Index i, Rng& rng) const {
  Eigen::VectorXd col(mean_.rows());
  for (Eigen::Index j = 0; j < mean_.rows(); ++j) col(j) = sample_gain(j, i, rng);
  return col;
}

// --- power allocation problem ------------------------------------------------

namespace {
ConstraintSet power_box(const InterferenceChannel& channel, double min_power) {
  channel.validate();
  if (!(min_power >= 0.0) || (channel.max_power.array() <= min_power).any()) {
    throw std::invalid_argument("power allocation: need 0 <= min_power < max_power");
  }
  return ConstraintSet::box(Eigen::VectorXd::Constant(channel.max_power.size(), min_power), channel.max_power);
}
}  // namespace

PowerAllocation::PowerAllocation(InterferenceChannel channel, std::optional<RicianFading> fading, bool log_scale,
                                 double min_power, std::optional<Eigen::VectorXd> reference)
    : channel_(std::move(channel)),
      fading_(std::move(fading)),
      log_scale_(log_scale),
      set_(power_box(channel_, min_power)),
      reference_(std::move(reference)) {
  if (log_scale_ && min_power <= 0.0) {
    throw std::invalid_argument("power allocation: log-scale mode needs a positive minimum power");
  }
  if (fading_ && (fading_->mean_gains().rows() != channel_.gains.rows() ||
                  fading_->mean_gains().cols() != channel_.gains.cols())) {
    throw std::invalid_argument("power allocation: fading model does not match the channel size");
  }
  if (reference_ && reference_->size() != static_cast<Eigen::Index>(channel_.users())) {
    throw std::invalid_argument("power allocation: reference point has wrong dimension");
  }
}

double PowerAllocation::local_objective(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  return channel_.weights(static_cast<Eigen::Index>(agent)) * error_probability(channel_, theta, agent);
}

Eigen::VectorXd PowerAllocation::local_gradient(std::size_t agent,
                                                const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  return channel_.weights(static_cast<Eigen::Index>(agent)) * error_probability_gradient(channel_, theta, agent);
}

Eigen::VectorXd PowerAllocation::mean_observation(std::size_t agent,
                                                  const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  return -channel_.weights(static_cast<Eigen::Index>(agent)) *
         error_probability_gradient(channel_, theta, agent, log_scale_);
}

void PowerAllocation::observe(const Eigen::VectorXd& stacked_theta, Rng& rng, Eigen::VectorXd& out) const {
  const auto n = static_cast<Eigen::Index>(channel_.users());
  out.resize(stacked_theta.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto block = stacked_theta.segment(i * n, n);
    const auto agent = static_cast<std::size_t>(i);
    if (fading_) {
      const Eigen::VectorXd column = fading_->sample_column(i, rng);
      out.segment(i * n, n) = -channel_.weights(i) * error_probability_gradient(column, channel_.noise_variance(i),
                                                                                block, agent, log_scale_);
    } else {
      out.segment(i * n, n) = mean_observation(agent, block);
    }
  }
}

// --- quadratic ----------------------------------------------------------------

QuadraticProblem::QuadraticProblem(std::vector<Agent> agents, ConstraintSet set, double noise_std,
                                   std::optional<Eigen::VectorXd> reference)
    : agents_(std::move(agents)), set_(std::move(set)), noise_std_(noise_std), reference_(std::move(reference)) {
  if (agents_.empty()) throw std::invalid_argument("quadratic problem: at least one agent required");
  const auto d = static_cast<Eigen::Index>(set_.dimension());
  for (const auto& a : agents_) {
    if (a.hessian.rows() != d || a.hessian.cols() != d || a.linear.size() != d) {
      throw std::invalid_argument("quadratic problem: agent terms do not match the constraint set dimension");
    }
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw std::invalid_argument("quadratic problem: noise standard deviation must be >= 0");
  }
  if (reference_ && reference_->size() != d) throw std::invalid_argument("quadratic problem: bad reference dimension");
}

double QuadraticProblem::local_objective(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const Agent& a = agents_.at(agent);
  return 0.5 * theta.dot(a.hessian * theta) - a.linear.dot(theta);
}

Eigen::VectorXd QuadraticProblem::local_gradient(std::size_t agent,
                                                 const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const Agent& a = agents_.at(agent);
  return 0.5 * (a.hessian + a.hessian.transpose()) * theta - a.linear;
}

void QuadraticProblem::observe(const Eigen::VectorXd& stacked_theta, Rng& rng, Eigen::VectorXd& out) const {
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dimension());
  out.resize(stacked_theta.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i) * d;
    out.segment(k, d) = -local_gradient(i, stacked_theta.segment(k, d));
    if (noise_std_ > 0.0) {
      for (Eigen::Index c = 0; c < d; ++c) out(k + c) += noise_std_ * noise(rng);
    }
  }
}

}  // namespace gossipopt
