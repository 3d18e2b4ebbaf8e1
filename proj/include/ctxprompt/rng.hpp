#pragma once

#include <cstdint>
#include <string_view>

namespace ctxprompt {

// SplitMix64 (Steele, Lea, Flood 2014). State advances by the golden-gamma
// constant 0x9E3779B97F4A7C15; output is finalized with the variant-13 mixer.
// Every stochastic stage in the toolkit draws from this generator so results
// are reproducible across platforms and standard library implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  // Uniform integer in [0, bound). Uses rejection on the top of the range so
  // the result is exactly uniform. bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform01();

  // Standard normal via Box-Muller (consumes two draws per call).
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

// Labeled seed derivation: stage seeds are fanned out from one global seed by
// hashing the label and mixing it with the parent seed.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

std::string hex64(std::uint64_t value);

}  // namespace ctxprompt
