#pragma once

#include <cstdint>
#include <string_view>

namespace denssiam {

// Counter-based deterministic generator (SplitMix64 stream).
//
// The i-th output for seed s is, by definition,
//   out(s, i) = mix64(s + (i+1) * 0x9E3779B97F4A7C15)
// where mix64 is the SplitMix64 finalizer. Streams are random-access
// (draw(i) does not depend on draws before it), so masks and noise can be
// recomputed from (seed, index) alone. Sub-streams are derived by hashing
// a label into a new seed (FNV-1a, then mixed), giving every consumer
// (dropout site, sampler, synth sequence) an independent reproducible
// stream from one top-level seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  static std::uint64_t mix64(std::uint64_t z);

  // i-th element of the stream, independent of cursor state.
  std::uint64_t at(std::uint64_t index) const;

  std::uint64_t next_u64() { return at(counter_++); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  // Uniform in (0, 1] (safe for log()).
  double uniform_open();
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller; always consumes exactly two draws.
  double normal();

  // Independent child stream named by `label` (optionally salted by `index`).
  Rng fork(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace denssiam
