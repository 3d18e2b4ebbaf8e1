#include "ctxprompt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctxprompt/error.hpp"

namespace ctxprompt {

// Absorbs rounding in the running sum so that e.g. 0.6 + 0.3 reaches 0.9.
constexpr double kMassTolerance = 1e-12;

void DecodeConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("nucleus p must lie in (0, 1]");
  if (num_samples < 1) throw ConfigError("num_samples must be >= 1");
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
}

std::vector<int> nucleus_set(std::span<const double> probs, double p) {
  std::vector<int> ids(probs.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });
  if (p >= 1.0) return ids;
  double cumulative = 0.0;
  std::size_t keep = 0;
  while (keep < ids.size()) {
    cumulative += probs[static_cast<std::size_t>(ids[keep])];
    ++keep;
    if (cumulative >= p - kMassTolerance) break;
  }
  ids.resize(keep);
  return ids;
}

int sample_nucleus(std::span<const double> probs, double p, SplitMix64& rng) {
  const auto nucleus = nucleus_set(probs, p);
  if (nucleus.empty()) throw ValidationError("cannot sample from an empty distribution");
  double mass = 0.0;
  for (int id : nucleus) mass += probs[static_cast<std::size_t>(id)];
  const double u = rng.uniform01() * mass;
  double cumulative = 0.0;
  for (int id : nucleus) {
    cumulative += probs[static_cast<std::size_t>(id)];
    if (u < cumulative) return id;
  }
  // rounding left u at the top of the range: last token with nonzero mass
  for (auto it = nucleus.rbegin(); it != nucleus.rend(); ++it) {
    if (probs[static_cast<std::size_t>(*it)] > 0.0) return *it;
  }
  return nucleus.front();
}

std::vector<std::vector<int>> generate_ids(const Parameters& params, const PromptSequence& prefix,
                                           const DecodeConfig& decode) {
  decode.validate();
  if (prefix.has_inference()) throw ValidationError("generation prefix must not contain an Inference span");
  if (prefix.tokens.empty()) throw ValidationError("empty generation prefix");
  const int max_len = params.config().max_len;
  if (static_cast<int>(prefix.size()) > max_len) throw ValidationError("prefix exceeds max_len");
  const auto* visual = prefix.visual ? &*prefix.visual : nullptr;

  // Prefix states are shared by every sample.
  DecoderState base(params, visual);
  Eigen::RowVectorXd logp;
  for (int t : prefix.tokens) logp = base.step(t);

  SplitMix64 rng(decode.seed);
  std::vector<std::vector<int>> samples;
  std::vector<double> probs(static_cast<std::size_t>(logp.size()));
  for (int s = 0; s < decode.num_samples; ++s) {
    DecoderState state = base;
    Eigen::RowVectorXd current = logp;
    std::vector<int> out;
    for (int step = 0; step < decode.max_new_tokens; ++step) {
      for (Eigen::Index i = 0; i < current.size(); ++i) probs[static_cast<std::size_t>(i)] = std::exp(current(i));
      const int next = sample_nucleus(probs, decode.p, rng);
      if (next == Tokenizer::kEnd) break;
      out.push_back(next);
      if (static_cast<int>(state.length()) >= max_len) break;
      current = state.step(next);
    }
    samples.push_back(std::move(out));
  }
  return samples;
}

std::vector<std::string> generate(const Parameters& params, const PromptSequence& prefix,
                                  const DecodeConfig& decode, const Tokenizer& tokenizer) {
  std::vector<std::string> out;
  for (const auto& ids : generate_ids(params, prefix, decode)) out.push_back(tokenizer.decode(ids));
  return out;
}

}  // namespace ctxprompt
