// Acceptance gate. One PASS/FAIL line per criterion; exit status 1 if any fails.
//
//   acceptance            run every criterion
//   acceptance NAME...    run only the named criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gossipopt/config.hpp"
#include "gossipopt/experiment.hpp"
#include "gossipopt/flow_oracle.hpp"
#include "gossipopt/gossip.hpp"
#include "gossipopt/problems.hpp"
#include "gossipopt/trace_io.hpp"

using namespace gossipopt;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string vec(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt(v(k), 6);
  return s + ")";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

InterferenceChannel symmetric_channel() {
  InterferenceChannel ch;
  ch.gains.resize(2, 2);
  ch.gains << 2, 1, 1, 2;
  ch.noise_variance = Eigen::Vector2d(0.1, 0.1);
  ch.max_power = Eigen::Vector2d(10, 10);
  ch.weights = Eigen::Vector2d(2.0 / 3.0, 1.0 / 3.0);
  return ch;
}

const Eigen::Vector2d kPowerAnchor(10.0, 5.4);

json least_squares_cycle(const std::string& scheme, std::size_t runs, std::size_t stride) {
  json j;
  j["scenario"] = {{"type", "least_squares_disk"}, {"n_agents", 50}};
  j["topology"] = {{"type", "cycle"}};
  j["gossip"] = {{"scheme", scheme}, {"beta", 0.5}};
  j["step"] = {{"gamma0", 0.1}, {"xi", 0.9}};
  j["iterations"] = 10000;
  j["monte_carlo_runs"] = runs;
  j["master_seed"] = 20240611;
  j["trace_stride"] = stride;
  return j;
}

json rarefied_complete(std::size_t runs) {
  json j;
  j["scenario"] = {{"type", "least_squares_disk"}, {"n_agents", 10}};
  j["topology"] = {{"type", "complete"}};
  j["gossip"] = {{"scheme", "broadcast"}, {"beta", 0.5}, {"rarefaction", {{"a", 1.0}, {"eta", 0.2}}}};
  j["step"] = {{"gamma0", 1.0}, {"xi", 0.8}};
  j["iterations"] = 10000;
  j["monte_carlo_runs"] = runs;
  j["master_seed"] = 77;
  j["trace_stride"] = 1;
  return j;
}

json power_fixed(std::size_t runs) {
  json j;
  j["scenario"] = {{"type", "power_allocation"},
                   {"channel",
                    {{"gains", {{2, 1}, {1, 2}}},
                     {"noise_variance", 0.1},
                     {"max_power", 10},
                     {"weights", {2.0 / 3.0, 1.0 / 3.0}}}},
                   {"log_scale", true}};
  j["topology"] = {{"type", "complete"}};
  j["gossip"] = {{"scheme", "pairwise"}, {"beta", 0.5}};
  j["step"] = {{"gamma0", 200}, {"xi", 0.7}, {"changes", {{{"after", 3000}, {"gamma0", 30}}}}};
  j["iterations"] = 6000;
  j["monte_carlo_runs"] = runs;
  j["master_seed"] = 5;
  j["trace_stride"] = 10;
  return j;
}

const AggregatePoint& at(const AggregateResult& r, std::size_t iteration) {
  for (const auto& p : r.curve) {
    if (p.iteration == iteration) return p;
  }
  throw std::runtime_error("iteration " + std::to_string(iteration) + " was not recorded");
}

// Mean |theta_perp| below 10% of its n=100 value at n=10^4 and strictly
// decreasing over {100, 1000, 10000}.
Verdict consensus_verdict(const AggregateResult& r) {
  const double d2 = at(r, 100).mean_disagreement;
  const double d3 = at(r, 1000).mean_disagreement;
  const double d4 = at(r, 10000).mean_disagreement;
  Verdict v;
  v.pass = d4 < 0.1 * d2 && d2 > d3 && d3 > d4;
  v.detail = "|theta_perp| at 1e2/1e3/1e4 = " + fmt(d2) + "/" + fmt(d3) + "/" + fmt(d4) + ", ratio " + fmt(d4 / d2) +
             " (need < 0.1)";
  return v;
}

// Mean deviation at 10^4 below 20% of its n=1 value and below its n=1000 value.
Verdict deviation_verdict(const AggregateResult& r, const std::string& label) {
  const double d1 = *at(r, 1).mean_deviation;
  const double d3 = *at(r, 1000).mean_deviation;
  const double d4 = *at(r, 10000).mean_deviation;
  Verdict v;
  v.pass = d4 < 0.2 * d1 && d4 < d3;
  v.detail = label + " Delta at 1/1e3/1e4 = " + fmt(d1) + "/" + fmt(d3) + "/" + fmt(d4) + ", ratio " + fmt(d4 / d1) +
             " (need < 0.2)";
  return v;
}

Verdict consensus_on_cycle() {
  const auto t0 = std::chrono::steady_clock::now();
  const AggregateResult r = run_experiment(parse_config(least_squares_cycle("pairwise", 10, 100)), {false, {}});
  Verdict v = consensus_verdict(r);
  const double secs = seconds_since(t0);
  v.pass = v.pass && secs < 60.0;
  v.detail += ", " + fmt(secs, 3) + " s";
  return v;
}

Verdict deviation_decay_cycle() {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict all;
  for (const std::string scheme : {"pairwise", "broadcast"}) {
    const AggregateResult r = run_experiment(parse_config(least_squares_cycle(scheme, 50, 1)), {false, {}});
    const Verdict v = deviation_verdict(r, scheme);
    all.pass = all.pass && v.pass;
    all.detail += (all.detail.empty() ? "" : "; ") + v.detail;
  }
  const double secs = seconds_since(t0);
  all.pass = all.pass && secs < 300.0;
  all.detail += "; " + fmt(secs, 3) + " s";
  return all;
}

Verdict power_allocation_fixed_channel() {
  const auto t0 = std::chrono::steady_clock::now();
  const AggregateResult r = run_experiment(parse_config(power_fixed(10)), {false, {}});
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& s : r.summaries) mean += s.average;
  mean /= static_cast<double>(r.summaries.size());
  const double err = (mean - kPowerAnchor).cwiseAbs().maxCoeff();
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = err <= 0.5 && secs < 60.0;
  v.detail = "mean terminal <theta> = " + vec(mean) + ", max coordinate error " + fmt(err) + " (need <= 0.5), " +
             fmt(secs, 3) + " s";
  return v;
}

Verdict flow_oracle_agreement() {
  Verdict v;
  const PowerAllocation power(symmetric_channel(), std::nullopt, false);
  KktSearchOptions opts;
  opts.starts = 16;
  opts.seed = 3;
  const KktSearchResult pr = find_kkt(power.constraint_set(), objective_of(power), opts);
  double best = INFINITY;
  for (const auto& c : pr.candidates) best = std::min(best, (c.point - kPowerAnchor).norm());
  v.pass = best <= 0.1;
  v.detail = "power: nearest candidate at distance " + fmt(best) + " (need <= 0.1)";

  Rng rng(2024);
  double worst = 0.0;
  std::size_t multi = 0;
  for (int k = 0; k < 20; ++k) {
    const LeastSquaresDisk ls = LeastSquaresDisk::random(50, rng);
    KktSearchOptions o;
    o.starts = 4;
    o.seed = static_cast<std::uint64_t>(k);
    const KktSearchResult r = find_kkt(ls.constraint_set(), objective_of(ls), o);
    if (r.candidates.size() != 1) {
      ++multi;
      continue;
    }
    worst = std::max(worst, (r.candidates[0].point - *ls.reference_minimizer()).norm());
  }
  v.pass = v.pass && multi == 0 && worst <= 1e-5;
  v.detail += "; least squares: " + std::to_string(multi) + " of 20 instances without a unique point, worst error " +
              fmt(worst) + " (need <= 1e-5)";
  return v;
}

Verdict gossip_matrix_laws() {
  Verdict v;
  const Topology cycle = Topology::cycle(10);
  const int n = 100000;
  std::ostringstream detail;
  for (SchemeKind kind : {SchemeKind::pairwise, SchemeKind::broadcast}) {
    const GossipScheme scheme{kind, 0.5, std::nullopt};
    Rng rng(kind == SchemeKind::pairwise ? 1 : 2);
    double worst_row = 0.0;
    std::size_t column_violations = 0;
    Eigen::VectorXd col_sum = Eigen::VectorXd::Zero(10), col_sq = Eigen::VectorXd::Zero(10);
    for (int k = 0; k < n; ++k) {
      const Eigen::MatrixXd w = sample_matrix(scheme, cycle, 1, rng);
      worst_row = std::max(worst_row, (w.rowwise().sum().array() - 1.0).abs().maxCoeff());
      const Eigen::VectorXd cs = w.colwise().sum().transpose();
      if ((cs.array() - 1.0).abs().maxCoeff() > 1e-12) ++column_violations;
      col_sum += cs;
      col_sq += cs.cwiseProduct(cs);
    }
    const Eigen::VectorXd mean = col_sum / n;
    const Eigen::VectorXd se = ((col_sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0) / n).cwiseSqrt();
    double worst_z = 0.0;
    bool within = true;
    for (Eigen::Index j = 0; j < 10; ++j) {
      const double dev = std::abs(mean(j) - 1.0);
      if (se(j) > 0.0) {
        worst_z = std::max(worst_z, dev / se(j));
        within = within && dev <= 3.0 * se(j);
      } else {
        within = within && dev <= 1e-12;
      }
    }
    const bool rows_ok = worst_row <= 1e-15;
    const bool samples_ok = kind == SchemeKind::pairwise ? column_violations == 0 : column_violations > 0;
    v.pass = v.pass && rows_ok && within && samples_ok;
    detail << to_string(kind) << ": max row error " << fmt(worst_row) << ", mean column sums max z " << fmt(worst_z, 3)
           << ", samples not column-stochastic " << column_violations << "/" << n << "; ";
  }
  const double rho_pair = spectral_rho(GossipScheme{SchemeKind::pairwise, 0.5, std::nullopt}, cycle);
  const double rho_bc = spectral_rho(GossipScheme{SchemeKind::broadcast, 0.5, std::nullopt}, cycle);
  const Topology split(10, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {5, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 5}});
  const double rho_split = spectral_rho(GossipScheme{SchemeKind::pairwise, 0.5, std::nullopt}, split);
  const double rho_split_bc = spectral_rho(GossipScheme{SchemeKind::broadcast, 0.5, std::nullopt}, split);
  v.pass = v.pass && rho_pair < 1.0 && rho_bc < 1.0 && std::abs(rho_split - 1.0) <= 1e-10 &&
           std::abs(rho_split_bc - 1.0) <= 1e-10;
  detail << "rho cycle pairwise/broadcast " << fmt(rho_pair, 8) << "/" << fmt(rho_bc, 8) << ", disconnected "
         << fmt(rho_split, 12) << "/" << fmt(rho_split_bc, 12);
  v.detail = detail.str();
  return v;
}

Verdict rarefied_communication() {
  const auto t0 = std::chrono::steady_clock::now();
  const AggregateResult r = run_experiment(parse_config(rarefied_complete(50)), {false, {}});
  const Verdict c = consensus_verdict(r);
  const Verdict d = deviation_verdict(r, "broadcast rarefied");

  json bad = rarefied_complete(1);
  bad["gossip"]["rarefaction"]["eta"] = 0.4;
  bad["step"]["xi"] = 0.7;
  const bool rejected = has_errors(validate_config(parse_config(bad)));

  Verdict v;
  v.pass = c.pass && d.pass && rejected;
  v.detail = c.detail + "; " + d.detail + "; eta=0.4, xi=0.7 " + (rejected ? "rejected" : "ACCEPTED") + "; " +
             fmt(seconds_since(t0), 3) + " s";
  return v;
}

Verdict gradient_correctness() {
  Verdict v;
  Rng rng(31);
  std::uniform_real_distribution<double> power(0.5, 9.5);
  const InterferenceChannel ch = symmetric_channel();
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d p(power(rng), power(rng));
    for (std::size_t i = 0; i < 2; ++i) {
      const Eigen::VectorXd g = error_probability_gradient(ch, p, i);
      for (Eigen::Index c = 0; c < 2; ++c) {
        const double h = 1e-6 * p(c);
        Eigen::VectorXd up = p, dn = p;
        up(c) += h;
        dn(c) -= h;
        const double fd = (error_probability(ch, up, i) - error_probability(ch, dn, i)) / (2.0 * h);
        worst = std::max(worst, std::abs(g(c) - fd) / std::abs(fd));
      }
    }
  }
  v.pass = worst < 1e-6;
  v.detail = "max relative finite-difference error " + fmt(worst) + " (need < 1e-6)";

  Rng inst(8);
  const LeastSquaresDisk ls = LeastSquaresDisk::random(5, inst);
  double worst_z = 0.0;
  for (int s = 0; s < 5; ++s) {
    Eigen::VectorXd theta(10);
    for (std::size_t i = 0; i < 5; ++i) theta.segment(2 * i, 2) = ls.constraint_set().sample_uniform(inst);
    Rng obs = make_stream(99, static_cast<std::uint64_t>(s), Substream::observation);
    Eigen::VectorXd y, sum = Eigen::VectorXd::Zero(10), sq = Eigen::VectorXd::Zero(10);
    const int draws = 100000;
    for (int k = 0; k < draws; ++k) {
      ls.observe(theta, obs, y);
      sum += y;
      sq += y.cwiseProduct(y);
    }
    const Eigen::VectorXd mean = sum / draws;
    const Eigen::VectorXd se = ((sq / draws - mean.cwiseProduct(mean)) / draws).cwiseSqrt();
    for (std::size_t i = 0; i < 5; ++i) {
      const Eigen::VectorXd expect = -ls.local_gradient(i, theta.segment(2 * i, 2));
      for (Eigen::Index c = 0; c < 2; ++c) {
        const auto k = static_cast<Eigen::Index>(2 * i) + c;
        worst_z = std::max(worst_z, std::abs(mean(k) - expect(c)) / se(k));
      }
    }
  }
  v.pass = v.pass && worst_z <= 4.0;
  v.detail += "; least squares oracle bias max z " + fmt(worst_z, 3) + " (need <= 4)";
  return v;
}

Verdict lyapunov_descent() {
  Verdict v;
  std::size_t failed = 0, steps = 0, increases = 0;
  double worst_fraction = 1.0;
  Rng rng(404);
  const PowerAllocation power(symmetric_channel(), std::nullopt, false);
  for (int k = 0; k < 100; ++k) {
    std::unique_ptr<LeastSquaresDisk> ls;
    const Problem* problem = &power;
    if (k % 2 == 0) {
      ls = std::make_unique<LeastSquaresDisk>(LeastSquaresDisk::random(20, rng));
      problem = ls.get();
    }
    const ConstraintSet& set = problem->constraint_set();
    const SmoothObjective f = objective_of(*problem);
    const Eigen::VectorXd x0 = set.sample_uniform(rng);
    const double h = default_flow_step(set, f, x0);
    const FlowTrajectory traj = integrate_flow(set, f, x0, 2000.0 * h, h);
    const LyapunovReport rep = lyapunov_check(traj, set, f);
    steps += rep.steps;
    increases += rep.increases;
    worst_fraction = std::min(worst_fraction, rep.rate_match_fraction());
    if (!rep.passed()) ++failed;
  }
  v.pass = failed == 0;
  v.detail = std::to_string(failed) + " of 100 trajectories failed; increases beyond tolerance " +
             std::to_string(increases) + "/" + std::to_string(steps) + " steps; worst rate-match fraction " +
             fmt(worst_fraction) + " (need >= 0.95)";
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::set<std::string> listing(const std::filesystem::path& dir) {
  std::set<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) names.insert(e.path().filename().string());
  return names;
}

// Same file names and byte-identical contents.
bool same_outputs(const std::filesystem::path& a, const std::filesystem::path& b, std::size_t& files) {
  const auto names = listing(a);
  files = names.size();
  if (names != listing(b)) return false;
  for (const auto& n : names) {
    if (slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

Verdict determinism() {
  Verdict v;
  const auto root = std::filesystem::temp_directory_path() / "gossipopt_acceptance_determinism";
  std::filesystem::remove_all(root);
  struct Case {
    std::string name;
    json config;
  };
  json cycle = least_squares_cycle("broadcast", 12, 100);
  json rare = rarefied_complete(8);
  rare["trace_stride"] = 50;
  json faded = power_fixed(8);
  faded["scenario"]["fading"] = {{"type", "rician"}, {"variance", 0.5}};
  const std::vector<Case> cases{{"cycle", cycle}, {"rarefied", rare}, {"power", power_fixed(10)}, {"fading", faded}};
  for (const auto& c : cases) {
    std::vector<std::filesystem::path> dirs;
    for (std::size_t workers : {1u, 1u, 4u}) {
      ExperimentConfig cfg = parse_config(c.config);
      cfg.workers = workers;
      dirs.push_back(root / (c.name + "_" + std::to_string(dirs.size()) + "_w" + std::to_string(workers)));
      run_experiment(cfg, {true, dirs.back()});
    }
    std::size_t files = 0;
    const bool repeat = same_outputs(dirs[0], dirs[1], files);
    const bool threads = same_outputs(dirs[0], dirs[2], files);
    v.pass = v.pass && repeat && threads && files > 2;
    v.detail += (v.detail.empty() ? "" : "; ") + c.name + ": " + std::to_string(files) + " files, repeat " +
                (repeat ? "identical" : "DIFFERENT") + ", 1 vs 4 workers " + (threads ? "identical" : "DIFFERENT");
  }
  std::filesystem::remove_all(root);
  return v;
}

struct Criterion {
  const char* name;
  std::function<Verdict()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"consensus_cycle", consensus_on_cycle},
      {"deviation_decay_cycle", deviation_decay_cycle},
      {"power_allocation_fixed_channel", power_allocation_fixed_channel},
      {"flow_oracle_agreement", flow_oracle_agreement},
      {"gossip_matrix_laws", gossip_matrix_laws},
      {"rarefied_communication", rarefied_communication},
      {"gradient_correctness", gradient_correctness},
      {"lyapunov_descent", lyapunov_descent},
      {"determinism", determinism},
  };
  std::vector<std::string> only(argv + 1, argv + argc);

  int failures = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    ++ran;
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
