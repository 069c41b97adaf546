#pragma once

#include <cstdint>
#include <random>

namespace gossipopt {

using Rng = std::mt19937_64;

/// Substream identifiers for the independent random streams owned by one run.
/// Observation and gossip draws come from separate streams so that the
/// communication event of an iteration is independent of the observation noise.
enum class Substream : std::uint64_t {
  problem = 0,      // per-run problem parameters (e.g. regressors)
  initial = 1,      // initial estimates
  observation = 2,  // observation oracle
  gossip = 3,       // gossip events
  multistart = 4,   // starting points of the flow oracle
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic stream keyed by (master seed, stream index, substream).
Rng make_stream(std::uint64_t master_seed, std::uint64_t stream, Substream substream);

}  // namespace gossipopt
