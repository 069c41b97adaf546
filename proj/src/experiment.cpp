#include "gossipopt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "gossipopt/flow_oracle.hpp"
#include "gossipopt/trace_io.hpp"

namespace gossipopt {

using nlohmann::json;

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double pos = q * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, samples.size() - 1);
  return samples[lo] + (pos - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
}

std::vector<AggregatePoint> aggregate_traces(const std::vector<RunTrace>& traces) {
  std::vector<AggregatePoint> curve;
  if (traces.empty()) return curve;
  const std::size_t rows = traces.front().records.size();
  const auto n = static_cast<double>(traces.size());
  for (const auto& t : traces) {
    if (t.records.size() != rows) throw std::invalid_argument("aggregate: traces have different lengths");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    AggregatePoint p;
    p.iteration = traces.front().records[r].iteration;
    std::vector<double> dis, obj;
    double dev_sum = 0.0, kkt_sum = 0.0;
    bool all_dev = true;
    p.mean_average = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(traces.front().dim));
    for (const auto& t : traces) {
      const TraceRecord& rec = t.records[r];
      if (rec.iteration != p.iteration) throw std::invalid_argument("aggregate: traces recorded at different iterations");
      dis.push_back(rec.disagreement);
      obj.push_back(rec.objective);
      kkt_sum += rec.kkt_residual;
      if (rec.deviation) {
        dev_sum += *rec.deviation;
      } else {
        all_dev = false;
      }
      p.mean_average += rec.average;
    }
    double dis_sum = 0.0, obj_sum = 0.0;
    for (double v : dis) dis_sum += v;
    for (double v : obj) obj_sum += v;
    p.mean_disagreement = dis_sum / n;
    p.mean_objective = obj_sum / n;
    p.mean_kkt_residual = kkt_sum / n;
    p.mean_average /= n;
    if (all_dev) p.mean_deviation = dev_sum / n;
    p.q05_disagreement = quantile(dis, 0.05);
    p.median_disagreement = quantile(dis, 0.5);
    p.q95_disagreement = quantile(dis, 0.95);
    p.q05_objective = quantile(obj, 0.05);
    p.median_objective = quantile(obj, 0.5);
    p.q95_objective = quantile(obj, 0.95);
    curve.push_back(std::move(p));
  }
  return curve;
}

std::optional<Eigen::VectorXd> compute_reference(const ExperimentConfig& config) {
  if (config.reference) return config.reference;
  if (config.scenario != ScenarioKind::power_allocation) return std::nullopt;
  const auto problem = make_problem(config, 0);
  KktSearchOptions opts;
  opts.starts = config.kkt_starts;
  opts.seed = config.master_seed;
  const KktSearchResult found = find_kkt(problem->constraint_set(), objective_of(*problem), opts);
  if (found.candidates.empty()) return std::nullopt;
  return found.candidates.front().point;
}

json config_echo(const ExperimentConfig& config) {
  json echo = config.document;
  if (echo.is_object()) {
    echo.erase("workers");
    echo.erase("output_dir");
  }
  return echo;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string run_file_name(std::size_t run) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%04zu.csv", run);
  return buf;
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(number_json(v(k)));
  return arr;
}

struct RunOutcome {
  RunResult result;
  std::optional<Eigen::VectorXd> reference;
};

RunOutcome execute_run(const ExperimentConfig& config, const std::optional<Eigen::VectorXd>& shared_reference,
                       std::size_t k) {
  const auto problem = make_problem(config, k);
  std::optional<Eigen::VectorXd> reference = problem->reference_minimizer();
  if (!reference) reference = shared_reference;

  NetworkState initial = make_initial_state(config, problem->constraint_set(), k);
  RunStreams streams{make_stream(config.master_seed, k, Substream::observation),
                     make_stream(config.master_seed, k, Substream::gossip)};
  RunOptions options{config.iterations, config.trace_stride, reference};
  RunOutcome out;
  out.result = run(*problem, config.gossip_scheme(), *config.topology, config.step_schedule(), std::move(initial),
                   options, streams);
  out.reference = reference;
  return out;
}

}  // namespace

AggregateResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
  const auto diagnostics = validate_config(config);
  if (has_errors(diagnostics)) {
    for (const auto& d : diagnostics) {
      if (d.severity == Diagnostic::Severity::error) throw ConfigError(d.message);
    }
  }
  if (!config.topology) throw ConfigError("configuration has no topology");

  const std::size_t runs = config.monte_carlo_runs;
  const std::optional<Eigen::VectorXd> shared_reference = compute_reference(config);

  std::vector<std::optional<RunOutcome>> outcomes(runs);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> first_failure{runs};
  std::mutex error_mutex;
  std::exception_ptr hard_error;

  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= runs || k > first_failure.load()) return;
      try {
        RunOutcome o = execute_run(config, shared_reference, k);
        const bool failed = o.result.error.has_value();
        outcomes[k] = std::move(o);
        if (failed) {
          std::size_t cur = first_failure.load();
          while (k < cur && !first_failure.compare_exchange_weak(cur, k)) {
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!hard_error) hard_error = std::current_exception();
        first_failure.store(0);
        return;
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(config.workers, runs));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (hard_error) std::rethrow_exception(hard_error);

  const std::filesystem::path out_dir =
      options.output_dir ? *options.output_dir : std::filesystem::path(config.output_dir);

  const std::size_t failed = first_failure.load();
  if (failed < runs) {
    const RunResult& r = outcomes[failed]->result;
    if (options.write_files) write_trace_csv(out_dir / run_file_name(failed), r.trace);
    std::ostringstream msg;
    msg << "run " << failed << " aborted at iteration " << r.failed_iteration.value_or(0) << ": " << *r.error;
    throw ExperimentError(msg.str(), failed, r.failed_iteration.value_or(0));
  }

  AggregateResult agg;
  agg.runs = runs;
  agg.dim = config.dim;
  agg.master_seed = config.master_seed;
  agg.config_echo = config_echo(config);
  agg.provenance_hash = fnv1a_hex(agg.config_echo.dump() + "|" + kSoftwareVersion);
  for (std::size_t k = 0; k < runs; ++k) {
    RunOutcome& o = *outcomes[k];
    const RunResult& r = o.result;
    RunSummary s;
    s.run = k;
    s.iterations = r.final_state.iteration;
    const TraceRecord& last = r.trace.records.back();
    s.disagreement = last.disagreement;
    s.objective = last.objective;
    s.kkt_residual = last.kkt_residual;
    s.deviation = last.deviation;
    s.average = last.average;
    s.reference = o.reference;
    s.silent_ticks = r.stats.silent_ticks;
    s.isolated_wakeups = r.stats.isolated_wakeups;
    agg.summaries.push_back(std::move(s));
    agg.traces.push_back(std::move(o.result.trace));
  }
  agg.curve = aggregate_traces(agg.traces);

  if (options.write_files) {
    for (std::size_t k = 0; k < runs; ++k) write_trace_csv(out_dir / run_file_name(k), agg.traces[k]);
    write_text_file(out_dir / "aggregate.csv", aggregate_csv(agg));
    write_text_file(out_dir / "manifest.json", manifest(agg).dump(2) + "\n");
  }
  return agg;
}

std::string aggregate_header(std::size_t dim) {
  std::string h =
      "iteration,mean_deviation,mean_disagreement,q05_disagreement,median_disagreement,q95_disagreement,"
      "mean_objective,q05_objective,median_objective,q95_objective,mean_kkt_residual";
  for (std::size_t k = 0; k < dim; ++k) h += ",mean_avg_" + std::to_string(k);
  return h;
}

std::string aggregate_csv(const AggregateResult& result) {
  std::ostringstream out;
  out << aggregate_header(result.dim) << '\n';
  for (const auto& p : result.curve) {
    out << p.iteration << ',';
    if (p.mean_deviation) out << format_double(*p.mean_deviation);
    for (double v : {p.mean_disagreement, p.q05_disagreement, p.median_disagreement, p.q95_disagreement,
                     p.mean_objective, p.q05_objective, p.median_objective, p.q95_objective, p.mean_kkt_residual}) {
      out << ',' << format_double(v);
    }
    for (Eigen::Index k = 0; k < p.mean_average.size(); ++k) out << ',' << format_double(p.mean_average(k));
    out << '\n';
  }
  return out.str();
}

json manifest(const AggregateResult& result) {
  json m;
  m["software"] = {{"name", "gossipopt"}, {"version", kSoftwareVersion}};
  m["provenance_hash"] = result.provenance_hash;
  m["master_seed"] = result.master_seed;
  m["monte_carlo_runs"] = result.runs;
  m["config"] = result.config_echo;
  json runs = json::array();
  for (const auto& s : result.summaries) {
    json r;
    r["run"] = s.run;
    r["file"] = run_file_name(s.run);
    r["iterations"] = s.iterations;
    r["disagreement"] = number_json(s.disagreement);
    r["objective"] = number_json(s.objective);
    r["kkt_residual"] = number_json(s.kkt_residual);
    r["deviation"] = s.deviation ? number_json(*s.deviation) : json(nullptr);
    r["average"] = vector_json(s.average);
    r["reference"] = s.reference ? vector_json(*s.reference) : json(nullptr);
    r["silent_ticks"] = s.silent_ticks;
    r["isolated_wakeups"] = s.isolated_wakeups;
    runs.push_back(std::move(r));
  }
  m["runs"] = std::move(runs);
  return m;
}

std::string landscape_csv(const InterferenceChannel& channel, double min_power, std::size_t resolution) {
  channel.validate();
  if (channel.users() != 2) throw std::invalid_argument("landscape: only two-user channels are supported");
  if (resolution < 2) throw std::invalid_argument("landscape: resolution must be at least 2");
  if (!(min_power > 0.0)) throw std::invalid_argument("landscape: min_power must be positive");
  std::ostringstream out;
  out << "p1_db,p2_db,p1,p2,weighted_error\n";
  auto axis = [&](Eigen::Index k, std::size_t r) {
    const double lo = 10.0 * std::log10(min_power);
    const double hi = 10.0 * std::log10(channel.max_power(k));
    return lo + (hi - lo) * static_cast<double>(r) / static_cast<double>(resolution - 1);
  };
  Eigen::VectorXd p(2);
  for (std::size_t a = 0; a < resolution; ++a) {
    const double db1 = axis(0, a);
    for (std::size_t b = 0; b < resolution; ++b) {
      const double db2 = axis(1, b);
      p << std::pow(10.0, db1 / 10.0), std::pow(10.0, db2 / 10.0);
      out << format_double(db1) << ',' << format_double(db2) << ',' << format_double(p(0)) << ','
          << format_double(p(1)) << ',' << format_double(weighted_error_sum(channel, p)) << '\n';
    }
  }
  return out.str();
}

}  // namespace gossipopt
