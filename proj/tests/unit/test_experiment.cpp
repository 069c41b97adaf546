#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "gossipopt/experiment.hpp"
#include "gossipopt/trace_io.hpp"

using namespace gossipopt;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gossipopt_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_config(std::size_t runs, std::size_t iterations) {
  json j = json::parse(R"({
    "scenario": {"type": "least_squares_disk", "n_agents": 5},
    "topology": {"type": "cycle"},
    "gossip": {"scheme": "broadcast", "beta": 0.5},
    "step": {"gamma0": 0.1, "xi": 0.9},
    "trace_stride": 7,
    "master_seed": 99
  })");
  j["iterations"] = iterations;
  j["monte_carlo_runs"] = runs;
  return parse_config(j);
}

}  // namespace

TEST_CASE("trace CSV") {
  RunTrace empty;
  empty.dim = 2;
  std::ostringstream out;
  write_trace_csv(out, empty);
  CHECK(out.str() == "iteration,disagreement,objective,kkt_residual,deviation,avg_0,avg_1\n");

  RunTrace one;
  one.dim = 3;
  TraceRecord r;
  r.iteration = 4;
  r.disagreement = 0.1;
  r.objective = 1.0 / 3.0;
  r.kkt_residual = 2e-17;
  r.average = Eigen::Vector3d(M_PI, -1e300, 5e-324);
  one.records.push_back(r);
  r.iteration = 5;
  r.deviation = 0.7071067811865476;
  one.records.push_back(r);
  std::ostringstream buf;
  write_trace_csv(buf, one);
  std::istringstream lines(buf.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(std::count(first.begin(), first.end(), ',') + 1 == 5 + 3);

  std::istringstream in(buf.str());
  const RunTrace back = read_trace_csv(in);
  REQUIRE(back.records.size() == 2);
  CHECK(back.dim == 3);
  CHECK_FALSE(back.records[0].deviation);
  CHECK(*back.records[1].deviation == *one.records[1].deviation);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back.records[k].iteration == one.records[k].iteration);
    CHECK(back.records[k].objective == one.records[k].objective);
    CHECK(back.records[k].kkt_residual == one.records[k].kkt_residual);
    CHECK(back.records[k].average == one.records[k].average);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("malformed trace CSV is rejected") {
  std::istringstream bad("iteration,disagreement\n1,2\n");
  CHECK_THROWS(read_trace_csv(bad));
  std::istringstream short_row("iteration,disagreement,objective,kkt_residual,deviation,avg_0\n1,2,3\n");
  CHECK_THROWS(read_trace_csv(short_row));
}

TEST_CASE("quantile") {
  CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
  CHECK(quantile({0, 10}, 0.05) == doctest::Approx(0.5));
  CHECK(quantile({4}, 0.95) == 4.0);
}

TEST_CASE("zero iterations record only the initial state") {
  const ExperimentConfig c = small_config(1, 0);
  const auto dir = scratch("zero");
  const AggregateResult r = run_experiment(c, {true, dir});
  REQUIRE(r.traces.size() == 1);
  CHECK(r.traces[0].records.size() == 1);
  CHECK(r.traces[0].records[0].iteration == 0);
  CHECK(read_trace_csv(dir / "run_0000.csv").records.size() == 1);
}

TEST_CASE("aggregate curves are the mean of the persisted per-run files") {
  const ExperimentConfig c = small_config(4, 50);
  const auto dir = scratch("aggregate");
  const AggregateResult r = run_experiment(c, {true, dir});
  std::vector<RunTrace> reread;
  for (int k = 0; k < 4; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%04d.csv", k);
    reread.push_back(read_trace_csv(dir / name));
  }
  const auto curve = aggregate_traces(reread);
  REQUIRE(curve.size() == r.curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(std::abs(*curve[i].mean_deviation - *r.curve[i].mean_deviation) < 1e-12);
    CHECK(std::abs(curve[i].mean_disagreement - r.curve[i].mean_disagreement) < 1e-12);
    double manual = 0.0;
    for (const auto& t : reread) manual += t.records[i].objective;
    CHECK(std::abs(manual / 4.0 - r.curve[i].mean_objective) < 1e-12);
  }
  // 0, 7, ..., 49, 50
  CHECK(r.curve.back().iteration == 50);
  CHECK(r.curve[1].iteration == 7);

  const json m = json::parse(slurp(dir / "manifest.json"));
  CHECK(m["monte_carlo_runs"] == 4);
  CHECK(m["runs"].size() == 4);
  CHECK(m["software"]["version"] == kSoftwareVersion);
  CHECK(m["config"].contains("master_seed"));
  CHECK_FALSE(m["config"].contains("workers"));
}

TEST_CASE("output does not depend on the worker count") {
  ExperimentConfig c = small_config(6, 120);
  const auto d1 = scratch("w1"), d3 = scratch("w3");
  c.workers = 1;
  run_experiment(c, {true, d1});
  c.workers = 3;
  run_experiment(c, {true, d3});
  for (const auto& entry : std::filesystem::directory_iterator(d1)) {
    CHECK(slurp(entry.path()) == slurp(d3 / entry.path().filename()));
  }
}

TEST_CASE("invalid configurations are refused by the runner") {
  ExperimentConfig c = small_config(1, 5);
  c.xi = 0.3;
  CHECK_THROWS_AS(run_experiment(c, {false, {}}), ConfigError);
}

TEST_CASE("unwritable output directory is an error") {
  const ExperimentConfig c = small_config(1, 5);
  const auto file = scratch("blocker");
  std::ofstream(file.string()) << "x";
  CHECK_THROWS(run_experiment(c, {true, file / "sub"}));
}

TEST_CASE("landscape export") {
  InterferenceChannel ch;
  ch.gains.resize(2, 2);
  ch.gains << 2, 1, 1, 2;
  ch.noise_variance = Eigen::Vector2d(0.1, 0.1);
  ch.max_power = Eigen::Vector2d(10, 10);
  ch.weights = Eigen::Vector2d(2.0 / 3.0, 1.0 / 3.0);
  const std::string csv = landscape_csv(ch, 1e-3, 5);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "p1_db,p2_db,p1,p2,weighted_error");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 25);
  CHECK(csv.find("\n-30,-30,") != std::string::npos);
}

TEST_CASE("FNV-1a") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
