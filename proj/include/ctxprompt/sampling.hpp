#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxprompt/assembler.hpp"
#include "ctxprompt/model.hpp"
#include "ctxprompt/rng.hpp"

namespace ctxprompt {

struct DecodeConfig {
  double p = 0.9;
  int num_samples = 5;
  int max_new_tokens = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

// Smallest prefix of the tokens sorted by probability (descending, ties by
// ascending id) whose cumulative mass reaches p. p >= 1 returns every id.
std::vector<int> nucleus_set(std::span<const double> probs, double p);

// Draw from the renormalised nucleus.
int sample_nucleus(std::span<const double> probs, double p, SplitMix64& rng);

// num_samples continuations of prefix (which must end at its relation marker),
// each stopping at the end token, max_new_tokens, or max_len.
std::vector<std::vector<int>> generate_ids(const Parameters& params, const PromptSequence& prefix,
                                           const DecodeConfig& decode);

std::vector<std::string> generate(const Parameters& params, const PromptSequence& prefix,
                                  const DecodeConfig& decode, const Tokenizer& tokenizer);

}  // namespace ctxprompt
