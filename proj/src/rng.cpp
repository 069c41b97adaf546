#include "gossipopt/rng.hpp"

#include <array>

namespace gossipopt {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t stream, Substream substream) {
  std::uint64_t state = master_seed;
  std::uint64_t mixed = splitmix64(state);
  state = mixed ^ (stream * 0xd1b54a32d192ed03ULL);
  mixed = splitmix64(state);
  state = mixed ^ (static_cast<std::uint64_t>(substream) * 0x8cb92ba72f3d8dd7ULL);

  std::array<std::uint32_t, 8> words{};
  for (std::size_t k = 0; k < words.size(); k += 2) {
    const std::uint64_t w = splitmix64(state);
    words[k] = static_cast<std::uint32_t>(w);
    words[k + 1] = static_cast<std::uint32_t>(w >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace gossipopt
