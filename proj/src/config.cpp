#include "gossipopt/config.hpp"

#include <fstream>
#include <sstream>

namespace gossipopt {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where + ": missing field '" + key + "'");
  return obj.at(key);
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a number");
  return v.get<double>();
}

std::size_t as_count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where + ": expected a non-empty array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) out(static_cast<Eigen::Index>(k)) = as_number(v[k], where);
  return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) fail(where + ": expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = as_vector(v[static_cast<std::size_t>(r)], where);
    if (row.size() != cols) fail(where + ": ragged matrix");
    out.row(r) = row.transpose();
  }
  return out;
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where + ": expected a string");
  return v.get<std::string>();
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail("invalid JSON in " + path.string() + ": " + e.what());
  }
}

template <class F>
auto wrap_invalid(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    fail(where + ": " + e.what());
  }
}

QuadraticProblem::Agent parse_quadratic_agent(const json& spec, std::size_t d, const std::string& where) {
  QuadraticProblem::Agent a;
  a.hessian = as_matrix(require(spec, "hessian", where), where + ".hessian");
  a.linear = as_vector(require(spec, "linear", where), where + ".linear");
  if (static_cast<std::size_t>(a.linear.size()) != d) fail(where + ": linear term has wrong dimension");
  return a;
}

}  // namespace

ConstraintSet parse_constraint_set(const json& spec) {
  const std::string where = "constraint_set";
  const std::string type = as_string(require(spec, "type", where), where + ".type");
  const double tol =
      spec.contains("active_tolerance") ? as_number(spec["active_tolerance"], where) : kDefaultActiveTolerance;
  return wrap_invalid(where, [&] {
    if (type == "ball") {
      return ConstraintSet::ball(as_vector(require(spec, "center", where), where + ".center"),
                                 as_number(require(spec, "radius", where), where + ".radius"), tol);
    }
    if (type == "box") {
      return ConstraintSet::box(as_vector(require(spec, "lower", where), where + ".lower"),
                                as_vector(require(spec, "upper", where), where + ".upper"), tol);
    }
    if (type == "halfspaces") {
      std::vector<Halfspace> hs;
      for (const auto& h : require(spec, "halfspaces", where)) {
        hs.push_back({as_vector(require(h, "normal", where), where + ".normal"),
                      as_number(require(h, "offset", where), where + ".offset")});
      }
      return ConstraintSet::halfspaces(std::move(hs), tol);
    }
    fail(where + ": unknown type '" + type + "' (expected ball, box or halfspaces)");
  });
}

Topology parse_topology(const json& spec, std::size_t n_agents) {
  const std::string where = "topology";
  const std::string type = as_string(require(spec, "type", where), where + ".type");
  return wrap_invalid(where, [&] {
    if (type == "complete") return Topology::complete(n_agents);
    if (type == "cycle") return Topology::cycle(n_agents);
    if (type == "path") return Topology::path(n_agents);
    if (type == "edge_list") {
      std::vector<Topology::Edge> edges;
      for (const auto& e : require(spec, "edges", where)) {
        if (!e.is_array() || e.size() != 2) fail(where + ": each edge must be a pair of agent indices");
        edges.emplace_back(as_count(e[0], where + ".edges"), as_count(e[1], where + ".edges"));
      }
      return Topology(n_agents, std::move(edges));
    }
    fail(where + ": unknown type '" + type + "' (expected complete, cycle, path or edge_list)");
  });
}

InterferenceChannel parse_channel(const json& spec) {
  const std::string where = "channel";
  InterferenceChannel ch;
  ch.gains = as_matrix(require(spec, "gains", where), where + ".gains");
  const auto n = ch.gains.rows();
  auto per_user = [&](const char* key) {
    const json& v = require(spec, key, where);
    if (v.is_number()) return Eigen::VectorXd::Constant(n, v.get<double>()).eval();
    return as_vector(v, where + "." + key);
  };
  ch.noise_variance = per_user("noise_variance");
  ch.max_power = per_user("max_power");
  ch.weights = per_user("weights");
  wrap_invalid(where, [&] {
    ch.validate();
    return 0;
  });
  return ch;
}

ExperimentConfig parse_config(const json& document, const std::filesystem::path& base_dir) {
  if (!document.is_object()) fail("configuration must be a JSON object");
  ExperimentConfig cfg;
  cfg.document = document;

  const json& scenario = require(document, "scenario", "config");
  const std::string type = as_string(require(scenario, "type", "scenario"), "scenario.type");
  if (type == "scenario1" || type == "least_squares_disk") {
    cfg.scenario = ScenarioKind::least_squares_disk;
    cfg.n_agents = as_count(require(scenario, "n_agents", "scenario"), "scenario.n_agents");
    cfg.dim = 2;
  } else if (type == "scenario2" || type == "power_allocation") {
    cfg.scenario = ScenarioKind::power_allocation;
    json channel_spec;
    if (scenario.contains("channel_file")) {
      channel_spec = read_json_file(base_dir / as_string(scenario["channel_file"], "scenario.channel_file"));
    } else {
      channel_spec = require(scenario, "channel", "scenario");
    }
    cfg.channel = parse_channel(channel_spec);
    cfg.n_agents = cfg.channel->users();
    cfg.dim = cfg.n_agents;
    if (scenario.contains("log_scale")) {
      if (!scenario["log_scale"].is_boolean()) fail("scenario.log_scale: expected a boolean");
      cfg.log_scale = scenario["log_scale"].get<bool>();
    }
    if (scenario.contains("min_power")) cfg.min_power = as_number(scenario["min_power"], "scenario.min_power");
    if (scenario.contains("fading")) {
      const json& f = scenario["fading"];
      const std::string ftype = as_string(require(f, "type", "scenario.fading"), "scenario.fading.type");
      if (ftype != "rician") fail("scenario.fading.type: only 'rician' is supported");
      const Eigen::MatrixXd mean =
          f.contains("mean") ? as_matrix(f["mean"], "scenario.fading.mean") : cfg.channel->gains;
      const double variance = as_number(require(f, "variance", "scenario.fading"), "scenario.fading.variance");
      cfg.fading = wrap_invalid("scenario.fading", [&] { return RicianFading(mean, variance); });
    }
  } else if (type == "custom" || type == "quadratic") {
    cfg.scenario = ScenarioKind::quadratic;
    json spec = scenario;
    if (scenario.contains("problem_file")) {
      spec = read_json_file(base_dir / as_string(scenario["problem_file"], "scenario.problem_file"));
    }
    cfg.quadratic_set = parse_constraint_set(require(spec, "constraint_set", "problem"));
    cfg.dim = cfg.quadratic_set->dimension();
    const json& agents = require(spec, "agents", "problem");
    if (!agents.is_array() || agents.empty()) fail("problem.agents: expected a non-empty array");
    for (std::size_t i = 0; i < agents.size(); ++i) {
      cfg.quadratic_agents.push_back(parse_quadratic_agent(agents[i], cfg.dim, "problem.agents"));
    }
    cfg.n_agents = cfg.quadratic_agents.size();
    if (spec.contains("noise_std")) cfg.noise_std = as_number(spec["noise_std"], "problem.noise_std");
    if (spec.contains("reference")) cfg.reference = as_vector(spec["reference"], "problem.reference");
  } else {
    fail("scenario.type: unknown scenario '" + type + "'");
  }
  if (scenario.contains("reference")) cfg.reference = as_vector(scenario["reference"], "scenario.reference");
  if (cfg.reference && static_cast<std::size_t>(cfg.reference->size()) != cfg.dim) {
    fail("scenario.reference: wrong dimension");
  }
  if (cfg.n_agents == 0) fail("scenario: at least one agent required");

  cfg.topology = parse_topology(require(document, "topology", "config"), cfg.n_agents);

  const json& gossip = require(document, "gossip", "config");
  const std::string scheme = as_string(require(gossip, "scheme", "gossip"), "gossip.scheme");
  if (scheme == "pairwise") {
    cfg.scheme = SchemeKind::pairwise;
  } else if (scheme == "broadcast") {
    cfg.scheme = SchemeKind::broadcast;
  } else {
    fail("gossip.scheme: expected 'pairwise' or 'broadcast'");
  }
  if (gossip.contains("beta")) cfg.beta = as_number(gossip["beta"], "gossip.beta");
  if (gossip.contains("rarefaction")) {
    const json& r = gossip["rarefaction"];
    cfg.rarefaction = Rarefaction{as_number(require(r, "a", "gossip.rarefaction"), "gossip.rarefaction.a"),
                                  as_number(require(r, "eta", "gossip.rarefaction"), "gossip.rarefaction.eta")};
  }

  const json& step = require(document, "step", "config");
  cfg.gamma0 = as_number(require(step, "gamma0", "step"), "step.gamma0");
  cfg.xi = as_number(require(step, "xi", "step"), "step.xi");
  if (step.contains("changes")) {
    for (const auto& c : step["changes"]) {
      cfg.step_changes.push_back({as_count(require(c, "after", "step.changes"), "step.changes.after"),
                                  as_number(require(c, "gamma0", "step.changes"), "step.changes.gamma0")});
    }
  }

  cfg.iterations = as_count(require(document, "iterations", "config"), "iterations");
  if (document.contains("monte_carlo_runs")) cfg.monte_carlo_runs = as_count(document["monte_carlo_runs"], "monte_carlo_runs");
  if (document.contains("master_seed")) cfg.master_seed = document["master_seed"].get<std::uint64_t>();
  if (document.contains("trace_stride")) cfg.trace_stride = as_count(document["trace_stride"], "trace_stride");
  if (document.contains("workers")) cfg.workers = as_count(document["workers"], "workers");
  if (document.contains("output_dir")) cfg.output_dir = as_string(document["output_dir"], "output_dir");
  if (document.contains("kkt") && document["kkt"].contains("starts")) {
    cfg.kkt_starts = as_count(document["kkt"]["starts"], "kkt.starts");
  }

  if (document.contains("init")) {
    const json& init = document["init"];
    const std::string itype = as_string(require(init, "type", "init"), "init.type");
    if (itype == "uniform") {
      cfg.init.kind = InitSpec::Kind::uniform;
    } else if (itype == "point") {
      cfg.init.kind = InitSpec::Kind::point;
      cfg.init.values.push_back(as_vector(require(init, "value", "init"), "init.value"));
    } else if (itype == "agents") {
      cfg.init.kind = InitSpec::Kind::agents;
      for (const auto& v : require(init, "values", "init")) cfg.init.values.push_back(as_vector(v, "init.values"));
      if (cfg.init.values.size() != cfg.n_agents) fail("init.values: need one point per agent");
    } else {
      fail("init.type: expected uniform, point or agents");
    }
    for (const auto& v : cfg.init.values) {
      if (static_cast<std::size_t>(v.size()) != cfg.dim) fail("init: point has wrong dimension");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path), path.parent_path());
}

std::vector<Diagnostic> validate_config(const ExperimentConfig& config) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string m) { out.push_back({Diagnostic::Severity::error, std::move(m)}); };
  auto warning = [&](std::string m) { out.push_back({Diagnostic::Severity::warning, std::move(m)}); };

  if (!(config.xi > 0.5 && config.xi <= 1.0)) {
    std::ostringstream m;
    m << "step exponent xi=" << config.xi
      << " must lie in (0.5, 1]: the steps gamma_n = gamma0/n^xi need sum gamma_n = infinity and "
         "n^alpha gamma_n -> 0 for some alpha > 1/2";
    error(m.str());
  }
  if (!(config.gamma0 > 0.0)) error("step size gamma0 must be positive");
  for (const auto& c : config.step_changes) {
    if (!(c.gamma0 > 0.0)) error("step change gamma0 must be positive");
  }
  if (!(config.beta > 0.0 && config.beta < 1.0)) {
    std::ostringstream m;
    m << "gossip weight beta=" << config.beta << " must lie in (0, 1)";
    error(m.str());
  }
  if (config.rarefaction) {
    if (!(config.rarefaction->a > 0.0)) error("rarefaction constant a must be positive");
    if (!(config.rarefaction->eta >= 0.0 && config.rarefaction->eta < 0.5)) {
      error("rarefaction exponent eta must lie in [0, 0.5)");
    }
    const ConsensusRateCheck check = check_consensus_rate(config.rarefaction->eta, config.xi, 1.0);
    if (!check.exponents_admissible) error(check.explanation);
  }
  if (config.topology && config.n_agents > 1 && !config.topology->connected()) {
    warning("rho=1: consensus not guaranteed (communication graph is disconnected)");
  }
  if (config.trace_stride == 0) error("trace_stride must be positive");
  if (config.monte_carlo_runs == 0) error("monte_carlo_runs must be at least 1");
  if (config.workers == 0) error("workers must be at least 1");
  if (config.scenario == ScenarioKind::power_allocation && config.log_scale && !(config.min_power > 0.0)) {
    error("log-scale power updates need a positive min_power");
  }
  if (config.scenario == ScenarioKind::power_allocation && config.channel &&
      (config.channel->max_power.array() <= config.min_power).any()) {
    error("min_power must be below every maximum power");
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Diagnostic::Severity::error) return true;
  }
  return false;
}

std::unique_ptr<Problem> make_problem(const ExperimentConfig& config, std::size_t run) {
  switch (config.scenario) {
    case ScenarioKind::least_squares_disk: {
      Rng rng = make_stream(config.master_seed, run, Substream::problem);
      return std::make_unique<LeastSquaresDisk>(LeastSquaresDisk::random(config.n_agents, rng));
    }
    case ScenarioKind::power_allocation:
      return std::make_unique<PowerAllocation>(*config.channel, config.fading, config.log_scale, config.min_power,
                                               config.reference);
    case ScenarioKind::quadratic:
      return std::make_unique<QuadraticProblem>(config.quadratic_agents, *config.quadratic_set, config.noise_std,
                                                config.reference);
  }
  throw std::logic_error("unknown scenario");
}

NetworkState make_initial_state(const ExperimentConfig& config, const ConstraintSet& set, std::size_t run) {
  switch (config.init.kind) {
    case InitSpec::Kind::uniform: {
      Rng rng = make_stream(config.master_seed, run, Substream::initial);
      return uniform_state(set, config.n_agents, rng);
    }
    case InitSpec::Kind::point:
      return consensus_state(set.project(config.init.values.front()), config.n_agents);
    case InitSpec::Kind::agents: {
      NetworkState state(Eigen::VectorXd(static_cast<Eigen::Index>(config.n_agents * config.dim)), config.n_agents,
                         config.dim);
      for (std::size_t i = 0; i < config.n_agents; ++i) state.block(i) = set.project(config.init.values[i]);
      return state;
    }
  }
  throw std::logic_error("unknown init kind");
}

}  // namespace gossipopt
