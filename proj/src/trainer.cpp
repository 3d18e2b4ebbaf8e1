#include "ctxprompt/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ctxprompt/rng.hpp"

namespace ctxprompt {

std::string optimizer_name(OptimizerConfig::Kind kind) {
  return kind == OptimizerConfig::Kind::Adam ? "adam" : "sgd";
}

OptimizerConfig::Kind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerConfig::Kind::Sgd;
  if (name == "adam") return OptimizerConfig::Kind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

TrainResult train(const ModelConfig& config, const std::vector<PromptSequence>& sequences,
                  int epochs, const OptimizerConfig& optimizer, std::uint64_t shuffle_seed,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  return train_from(init_model(config), sequences, epochs, optimizer, shuffle_seed, on_epoch);
}

TrainResult train_from(Parameters initial, const std::vector<PromptSequence>& sequences,
                       int epochs, const OptimizerConfig& optimizer, std::uint64_t shuffle_seed,
                       const std::function<void(const EpochStats&)>& on_epoch) {
  if (sequences.empty()) throw ValidationError("no training sequences");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (optimizer.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const int max_len = initial.config().max_len;
  for (const auto& s : sequences) {
    if (static_cast<int>(s.size()) > max_len) {
      throw ValidationError("training sequence of length " + std::to_string(s.size()) +
                            " exceeds max_len " + std::to_string(max_len));
    }
  }

  TrainResult result{std::move(initial), {}};
  Parameters& params = result.params;
  Parameters grad(params.config());
  std::vector<double> m1;
  std::vector<double> m2;
  if (optimizer.kind == OptimizerConfig::Kind::Adam) {
    m1.assign(params.size(), 0.0);
    m2.assign(params.size(), 0.0);
  }
  std::size_t adam_t = 0;
  SplitMix64 rng(shuffle_seed);
  std::vector<std::size_t> order(sequences.size());

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_below(i))]);
    }
    EpochStats stats;
    stats.epoch = epoch;
    SpanCounts tokens;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += optimizer.batch_size) {
      ++step;
      const std::size_t end = std::min(order.size(), start + optimizer.batch_size);
      grad.set_zero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& seq = sequences[order[i]];
        const auto lb = loss_and_gradient(params, seq, grad);
        if (!std::isfinite(lb.total)) throw TrainingDiverged(epoch, step, "non-finite loss");
        stats.mean += lb;
        const auto c = loss_token_counts(seq);
        tokens.event += c.event;
        tokens.place += c.place;
        tokens.context += c.context;
        tokens.inference += c.inference;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      double norm2 = 0.0;
      for (auto& g : grad.values()) {
        g *= inv;
        norm2 += g * g;
      }
      if (!std::isfinite(norm2)) throw TrainingDiverged(epoch, step, "non-finite gradient");
      double clip = 1.0;
      const double norm = std::sqrt(norm2);
      if (optimizer.clip_norm > 0.0 && norm > optimizer.clip_norm) clip = optimizer.clip_norm / norm;

      auto values = params.values();
      const auto g = grad.values();
      if (optimizer.kind == OptimizerConfig::Kind::Sgd) {
        const double lr = optimizer.learning_rate * clip;
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * g[i];
      } else {
        ++adam_t;
        const double bc1 = 1.0 - std::pow(optimizer.beta1, static_cast<double>(adam_t));
        const double bc2 = 1.0 - std::pow(optimizer.beta2, static_cast<double>(adam_t));
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double gi = g[i] * clip;
          m1[i] = optimizer.beta1 * m1[i] + (1.0 - optimizer.beta1) * gi;
          m2[i] = optimizer.beta2 * m2[i] + (1.0 - optimizer.beta2) * gi * gi;
          values[i] -= optimizer.learning_rate * (m1[i] / bc1) /
                       (std::sqrt(m2[i] / bc2) + optimizer.adam_eps);
        }
      }
    }
    stats.sequences = sequences.size();
    const LossBreakdown sums = stats.mean;
    stats.mean = sums.scaled(1.0 / static_cast<double>(sequences.size()));
    const auto per = [](double v, std::size_t n) { return n ? v / static_cast<double>(n) : 0.0; };
    stats.per_token.event_nll = per(sums.event_nll, tokens.event);
    stats.per_token.place_nll = per(sums.place_nll, tokens.place);
    stats.per_token.context_nll = per(sums.context_nll, tokens.context);
    stats.per_token.inference_nll = per(sums.inference_nll, tokens.inference);
    stats.per_token.total =
        per(sums.total, tokens.event + tokens.place + tokens.context + tokens.inference);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

std::string format_training_log(const std::vector<EpochStats>& history) {
  std::ostringstream out;
  out << "epoch,event_nll,place_nll,context_nll,inference_nll,total,"
         "event_nll_per_token,place_nll_per_token,context_nll_per_token,"
         "inference_nll_per_token,total_per_token\n";
  out << std::setprecision(10);
  for (const auto& s : history) {
    out << s.epoch << ',' << s.mean.event_nll << ',' << s.mean.place_nll << ','
        << s.mean.context_nll << ',' << s.mean.inference_nll << ',' << s.mean.total << ','
        << s.per_token.event_nll << ',' << s.per_token.place_nll << ','
        << s.per_token.context_nll << ',' << s.per_token.inference_nll << ','
        << s.per_token.total << '\n';
  }
  return out.str();
}

}  // namespace ctxprompt
