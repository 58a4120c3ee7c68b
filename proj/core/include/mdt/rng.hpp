#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mdt {

// Seeded RNG with a fully serializable state. Normal samples are produced by
// a spare-free Box-Muller so the state is exactly the mt19937_64 state (the
// standard distributions keep hidden caches that would break checkpointed
// resume).
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n).
  int uniform_int(int n);
  // Uniform in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  // Standard normal.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::string state() const;
  void set_state(const std::string& s);

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

// Deterministic stream derivation (splitmix-style); used to key independent
// substreams from one experiment seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mdt
