#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxprompt/assembler.hpp"

namespace ctxprompt {

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int embed_dim = 64;
  int max_len = 128;
  int vocab_size = 0;
  int visual_dim = 16;
  int mlp_ratio = 4;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  // Closed-form count of every trainable scalar.
  std::size_t parameter_count() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

// Offsets of every tensor inside the flat parameter array.
struct ParameterLayout {
  struct Block {
    std::size_t ln1_gain, ln1_bias, qkv_w, qkv_b, attn_out_w, attn_out_b;
    std::size_t ln2_gain, ln2_bias, fc_w, fc_b, proj_w, proj_b;
  };
  std::size_t token_embedding = 0;
  std::size_t position_embedding = 0;
  std::size_t visual_w = 0;
  std::size_t visual_b = 0;
  std::vector<Block> blocks;
  std::size_t final_gain = 0;
  std::size_t final_bias = 0;
  std::size_t output_w = 0;
  std::size_t output_b = 0;
  std::size_t total = 0;

  explicit ParameterLayout(const ModelConfig& config);
};

// Flat parameter array (double precision) plus its layout. Gradients use the
// same type.
class Parameters {
 public:
  explicit Parameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParameterLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // FNV-1a over the raw little-endian bytes of the values.
  std::uint64_t checksum() const;
  void set_zero();

  MatrixMap matrix(std::size_t offset, int rows, int cols) {
    return MatrixMap(values_.data() + offset, rows, cols);
  }
  ConstMatrixMap matrix(std::size_t offset, int rows, int cols) const {
    return ConstMatrixMap(values_.data() + offset, rows, cols);
  }
  VectorMap vector(std::size_t offset, int n) { return VectorMap(values_.data() + offset, n); }
  ConstVectorMap vector(std::size_t offset, int n) const {
    return ConstVectorMap(values_.data() + offset, n);
  }

 private:
  ModelConfig config_;
  ParameterLayout layout_;
  std::vector<double> values_;
};

// Seeded initialisation: N(0, 0.02) weights (residual projections scaled by
// 1/sqrt(2 * layers)), unit layer-norm gains, zero biases.
Parameters init_model(const ModelConfig& config);

// Row t is the log-distribution of the token at position t + 1. Absent visual
// features are equivalent to an all-zero vector.
RowMatrix forward(const Parameters& params, std::span<const int> tokens,
                  const std::vector<double>* visual = nullptr);

struct LossBreakdown {
  double event_nll = 0.0;
  double place_nll = 0.0;
  double context_nll = 0.0;
  double inference_nll = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double f) const;
};

// Token counts contributing to each loss term.
struct SpanCounts {
  std::size_t event = 0, place = 0, context = 0, inference = 0;
};
SpanCounts loss_token_counts(const PromptSequence& seq);

// Sums of -log P(token_i | tokens_<i, visual) over the Event, Place, Context
// and Inference positions. Throws ValidationError without an Inference span.
LossBreakdown loss(const Parameters& params, const PromptSequence& seq);

// Same value as loss(); adds d total / d params into grad.
LossBreakdown loss_and_gradient(const Parameters& params, const PromptSequence& seq,
                                Parameters& grad);

struct GradientCheckOptions {
  double fraction = 0.01;
  std::uint64_t seed = 17;
  // Multiplies the analytic gradient before comparison (fault injection).
  double gradient_scale = 1.0;
  // Denominator floor of the relative error.
  double floor = 1e-8;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

// Central finite differences on a random subset of parameters; relative error
// is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradientCheckResult gradient_check(const Parameters& params, const PromptSequence& seq,
                                   double epsilon, const GradientCheckOptions& options = {});

// Incremental decoder with cached keys/values; step() returns the
// log-distribution of the next token.
class DecoderState {
 public:
  DecoderState(const Parameters& params, const std::vector<double>* visual);

  Eigen::RowVectorXd step(int token);
  std::size_t length() const { return length_; }

 private:
  const Parameters& params_;
  Eigen::RowVectorXd visual_shift_;
  std::vector<RowMatrix> keys_;
  std::vector<RowMatrix> values_;
  std::size_t length_ = 0;
};

}  // namespace ctxprompt
