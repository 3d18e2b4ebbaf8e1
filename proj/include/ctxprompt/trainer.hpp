#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctxprompt/error.hpp"
#include "ctxprompt/model.hpp"

namespace ctxprompt {

struct OptimizerConfig {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Sgd;
  double learning_rate = 0.05;
  std::size_t batch_size = 8;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

std::string optimizer_name(OptimizerConfig::Kind kind);
OptimizerConfig::Kind parse_optimizer(const std::string& name);

struct EpochStats {
  int epoch = 0;
  // Mean per-sequence sums.
  LossBreakdown mean;
  // Per-token means of each term (and of the total over all scored tokens).
  LossBreakdown per_token;
  std::size_t sequences = 0;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(int epoch, std::size_t step, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch) + ", step " +
              std::to_string(step) + ": " + what),
        epoch_(epoch),
        step_(step) {}
  int epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  int epoch_;
  std::size_t step_;
};

struct TrainResult {
  Parameters params;
  std::vector<EpochStats> history;
};

// Mini-batch training on the summed sequence loss. Each epoch visits every
// sequence once in an order drawn from shuffle_seed; the batch gradient is the
// mean of per-sequence gradients accumulated in that order.
TrainResult train(const ModelConfig& config, const std::vector<PromptSequence>& sequences,
                  int epochs, const OptimizerConfig& optimizer, std::uint64_t shuffle_seed,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

// Same, starting from given parameters.
TrainResult train_from(Parameters initial, const std::vector<PromptSequence>& sequences,
                       int epochs, const OptimizerConfig& optimizer, std::uint64_t shuffle_seed,
                       const std::function<void(const EpochStats&)>& on_epoch = {});

// "epoch,event_nll,place_nll,context_nll,inference_nll,total" rows.
std::string format_training_log(const std::vector<EpochStats>& history);

}  // namespace ctxprompt
