#include "ctxprompt/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <numeric>

#include "ctxprompt/error.hpp"
#include "ctxprompt/rng.hpp"

namespace ctxprompt {

namespace {

constexpr double kLayerNormEps = 1e-5;
const double kGeluC = std::sqrt(2.0 / std::numbers::pi);

std::size_t mlp_width(const ModelConfig& c) {
  return static_cast<std::size_t>(c.embed_dim) * static_cast<std::size_t>(c.mlp_ratio);
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 0) throw ConfigError("layers must be >= 0");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (embed_dim % heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  if (vocab_size <= Tokenizer::kNumSpecial) throw ConfigError("vocab_size must exceed the special tokens");
  if (visual_dim < 0) throw ConfigError("visual_dim must be >= 0");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t d = static_cast<std::size_t>(embed_dim);
  const std::size_t v = static_cast<std::size_t>(vocab_size);
  const std::size_t h = mlp_width(*this);
  const std::size_t block = 2 * d            // ln1
                            + 3 * d * d + 3 * d  // qkv
                            + d * d + d        // attention output
                            + 2 * d            // ln2
                            + d * h + h        // fc
                            + h * d + d;       // proj
  return v * d + static_cast<std::size_t>(max_len) * d + static_cast<std::size_t>(visual_dim) * d +
         d + static_cast<std::size_t>(layers) * block + 2 * d + d * v + v;
}

ParameterLayout::ParameterLayout(const ModelConfig& c) {
  const std::size_t d = static_cast<std::size_t>(c.embed_dim);
  const std::size_t h = mlp_width(c);
  std::size_t at = 0;
  const auto take = [&](std::size_t n) {
    const std::size_t off = at;
    at += n;
    return off;
  };
  token_embedding = take(static_cast<std::size_t>(c.vocab_size) * d);
  position_embedding = take(static_cast<std::size_t>(c.max_len) * d);
  visual_w = take(static_cast<std::size_t>(c.visual_dim) * d);
  visual_b = take(d);
  for (int l = 0; l < c.layers; ++l) {
    Block b{};
    b.ln1_gain = take(d);
    b.ln1_bias = take(d);
    b.qkv_w = take(d * 3 * d);
    b.qkv_b = take(3 * d);
    b.attn_out_w = take(d * d);
    b.attn_out_b = take(d);
    b.ln2_gain = take(d);
    b.ln2_bias = take(d);
    b.fc_w = take(d * h);
    b.fc_b = take(h);
    b.proj_w = take(h * d);
    b.proj_b = take(d);
    blocks.push_back(b);
  }
  final_gain = take(d);
  final_bias = take(d);
  output_w = take(d * static_cast<std::size_t>(c.vocab_size));
  output_b = take(static_cast<std::size_t>(c.vocab_size));
  total = at;
}

Parameters::Parameters(const ModelConfig& config)
    : config_(config), layout_(config), values_(layout_.total, 0.0) {}

std::uint64_t Parameters::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values_) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    h = fnv1a64(std::string_view(bytes, 8), h);
  }
  return h;
}

void Parameters::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

Parameters init_model(const ModelConfig& config) {
  config.validate();
  Parameters p(config);
  const auto& L = p.layout();
  SplitMix64 rng(config.seed);
  const int d = config.embed_dim;
  const int h = static_cast<int>(mlp_width(config));
  const double std_w = 0.02;
  const double std_resid = 0.02 / std::sqrt(2.0 * std::max(1, config.layers));
  const auto fill_normal = [&](std::size_t off, std::size_t n, double sd) {
    for (std::size_t i = 0; i < n; ++i) p[off + i] = sd * rng.normal();
  };
  const auto fill_const = [&](std::size_t off, std::size_t n, double v) {
    for (std::size_t i = 0; i < n; ++i) p[off + i] = v;
  };
  const auto V = static_cast<std::size_t>(config.vocab_size);
  const auto D = static_cast<std::size_t>(d);
  const auto H = static_cast<std::size_t>(h);
  fill_normal(L.token_embedding, V * D, std_w);
  fill_normal(L.position_embedding, static_cast<std::size_t>(config.max_len) * D, std_w);
  fill_normal(L.visual_w, static_cast<std::size_t>(config.visual_dim) * D, std_w);
  for (const auto& b : L.blocks) {
    fill_const(b.ln1_gain, D, 1.0);
    fill_normal(b.qkv_w, D * 3 * D, std_w);
    fill_normal(b.attn_out_w, D * D, std_resid);
    fill_const(b.ln2_gain, D, 1.0);
    fill_normal(b.fc_w, D * H, std_w);
    fill_normal(b.proj_w, H * D, std_resid);
  }
  fill_const(L.final_gain, D, 1.0);
  fill_normal(L.output_w, D * V, std_w);
  return p;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  event_nll += o.event_nll;
  place_nll += o.place_nll;
  context_nll += o.context_nll;
  inference_nll += o.inference_nll;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double f) const {
  return {event_nll * f, place_nll * f, context_nll * f, inference_nll * f, total * f};
}

namespace {

struct LayerNormCache {
  RowMatrix xhat;
  Eigen::VectorXd rstd;
};

RowMatrix layer_norm(const RowMatrix& x, const ConstVectorMap& gain, const ConstVectorMap& bias,
                     LayerNormCache* cache) {
  const auto n = x.cols();
  RowMatrix xhat(x.rows(), n);
  Eigen::VectorXd rstd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() / static_cast<double>(n);
    rstd(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = centered * rstd(r);
  }
  RowMatrix y = (xhat.array().rowwise() * gain.array()).rowwise() + bias.array();
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

RowMatrix layer_norm_backward(const RowMatrix& dy, const LayerNormCache& cache,
                              const ConstVectorMap& gain, VectorMap dgain, VectorMap dbias) {
  const auto n = static_cast<double>(dy.cols());
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const RowMatrix dxhat = dy.array().rowwise() * gain.array();
  RowMatrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double s1 = dxhat.row(r).sum();
    const double s2 = dxhat.row(r).dot(cache.xhat.row(r));
    dx.row(r) = (cache.rstd(r) / n) *
                (n * dxhat.row(r).array() - s1 - cache.xhat.row(r).array() * s2);
  }
  return dx;
}

double gelu(double u) {
  return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u)));
}

double gelu_grad(double u) {
  const double inner = kGeluC * (u + 0.044715 * u * u * u);
  const double th = std::tanh(inner);
  return 0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

void log_softmax_rows(RowMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    const double lse = mx + std::log((m.row(r).array() - mx).exp().sum());
    m.row(r).array() -= lse;
  }
}

struct BlockCache {
  LayerNormCache ln1;
  RowMatrix a;
  RowMatrix qkv;
  std::vector<RowMatrix> attn;
  RowMatrix heads_out;
  LayerNormCache ln2;
  RowMatrix m;
  RowMatrix u;
  RowMatrix g;
};

struct ForwardCache {
  std::vector<BlockCache> blocks;
  LayerNormCache final_ln;
  RowMatrix f;
  RowMatrix logp;
};

Eigen::RowVectorXd visual_shift(const Parameters& p, const std::vector<double>* visual) {
  const auto& c = p.config();
  const auto& L = p.layout();
  Eigen::RowVectorXd shift = p.vector(L.visual_b, c.embed_dim);
  if (visual != nullptr) {
    if (static_cast<int>(visual->size()) != c.visual_dim) {
      throw ValidationError("visual feature length " + std::to_string(visual->size()) +
                            " does not match visual_dim " + std::to_string(c.visual_dim));
    }
    if (c.visual_dim > 0) {
      const ConstVectorMap v(visual->data(), c.visual_dim);
      shift += v * p.matrix(L.visual_w, c.visual_dim, c.embed_dim);
    }
  }
  return shift;
}

void check_tokens(const Parameters& p, std::span<const int> tokens) {
  const auto& c = p.config();
  if (tokens.empty()) throw ValidationError("empty token sequence");
  if (static_cast<int>(tokens.size()) > c.max_len) {
    throw ValidationError("sequence length " + std::to_string(tokens.size()) +
                          " exceeds max_len " + std::to_string(c.max_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= c.vocab_size) throw ValidationError("token id out of range");
  }
}

RowMatrix run_forward(const Parameters& p, std::span<const int> tokens,
                      const std::vector<double>* visual, ForwardCache* cache) {
  check_tokens(p, tokens);
  const auto& c = p.config();
  const auto& L = p.layout();
  const int T = static_cast<int>(tokens.size());
  const int D = c.embed_dim;
  const int H = static_cast<int>(mlp_width(c));
  const int dh = D / c.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const auto E = p.matrix(L.token_embedding, c.vocab_size, D);
  const auto P = p.matrix(L.position_embedding, c.max_len, D);
  RowMatrix x(T, D);
  for (int t = 0; t < T; ++t) x.row(t) = E.row(tokens[t]) + P.row(t);
  x.row(0) += visual_shift(p, visual);

  if (cache != nullptr) cache->blocks.resize(L.blocks.size());
  for (std::size_t l = 0; l < L.blocks.size(); ++l) {
    const auto& b = L.blocks[l];
    BlockCache local;
    BlockCache& bc = cache != nullptr ? cache->blocks[l] : local;
    bc.a = layer_norm(x, p.vector(b.ln1_gain, D), p.vector(b.ln1_bias, D), &bc.ln1);
    bc.qkv = (bc.a * p.matrix(b.qkv_w, D, 3 * D)).rowwise() + p.vector(b.qkv_b, 3 * D);
    bc.heads_out.resize(T, D);
    bc.attn.resize(static_cast<std::size_t>(c.heads));
    for (int h = 0; h < c.heads; ++h) {
      const auto Q = bc.qkv.middleCols(h * dh, dh);
      const auto K = bc.qkv.middleCols(D + h * dh, dh);
      const auto Vv = bc.qkv.middleCols(2 * D + h * dh, dh);
      RowMatrix A = (Q * K.transpose()) * scale;
      for (int i = 0; i < T; ++i) {
        const double mx = A.row(i).head(i + 1).maxCoeff();
        double sum = 0.0;
        for (int j = 0; j <= i; ++j) {
          A(i, j) = std::exp(A(i, j) - mx);
          sum += A(i, j);
        }
        for (int j = 0; j <= i; ++j) A(i, j) /= sum;
        for (int j = i + 1; j < T; ++j) A(i, j) = 0.0;
      }
      bc.heads_out.middleCols(h * dh, dh) = A * Vv;
      bc.attn[static_cast<std::size_t>(h)] = std::move(A);
    }
    x += (bc.heads_out * p.matrix(b.attn_out_w, D, D)).rowwise() + p.vector(b.attn_out_b, D);
    bc.m = layer_norm(x, p.vector(b.ln2_gain, D), p.vector(b.ln2_bias, D), &bc.ln2);
    bc.u = (bc.m * p.matrix(b.fc_w, D, H)).rowwise() + p.vector(b.fc_b, H);
    bc.g = bc.u.unaryExpr([](double u) { return gelu(u); });
    x += (bc.g * p.matrix(b.proj_w, H, D)).rowwise() + p.vector(b.proj_b, D);
  }

  LayerNormCache final_local;
  RowMatrix f = layer_norm(x, p.vector(L.final_gain, D), p.vector(L.final_bias, D),
                           cache != nullptr ? &cache->final_ln : &final_local);
  RowMatrix logp = (f * p.matrix(L.output_w, D, c.vocab_size)).rowwise() +
                   p.vector(L.output_b, c.vocab_size);
  log_softmax_rows(logp);
  if (cache != nullptr) {
    cache->f = std::move(f);
    cache->logp = logp;
  }
  return logp;
}

// Loss term a position contributes to, or nullptr for Visual/RelationPrompt.
double* term_for(LossBreakdown& lb, SpanLabel label) {
  switch (label) {
    case SpanLabel::Event: return &lb.event_nll;
    case SpanLabel::Place: return &lb.place_nll;
    case SpanLabel::Context: return &lb.context_nll;
    case SpanLabel::Inference: return &lb.inference_nll;
    default: return nullptr;
  }
}

void check_training(const PromptSequence& seq) {
  check_sequence(seq);
  if (!seq.has_inference()) throw ValidationError("loss requires a sequence with an Inference span");
}

LossBreakdown breakdown_from(const RowMatrix& logp, const PromptSequence& seq) {
  LossBreakdown lb;
  for (std::size_t t = 1; t < seq.tokens.size(); ++t) {
    double* term = term_for(lb, seq.spans[t]);
    if (term == nullptr) continue;
    *term -= logp(static_cast<Eigen::Index>(t - 1), seq.tokens[t]);
  }
  lb.total = lb.event_nll + lb.place_nll + lb.context_nll + lb.inference_nll;
  return lb;
}

const std::vector<double>* visual_of(const PromptSequence& seq) {
  return seq.visual ? &*seq.visual : nullptr;
}

}  // namespace

RowMatrix forward(const Parameters& params, std::span<const int> tokens,
                  const std::vector<double>* visual) {
  return run_forward(params, tokens, visual, nullptr);
}

SpanCounts loss_token_counts(const PromptSequence& seq) {
  SpanCounts c;
  for (std::size_t t = 1; t < seq.spans.size(); ++t) {
    switch (seq.spans[t]) {
      case SpanLabel::Event: ++c.event; break;
      case SpanLabel::Place: ++c.place; break;
      case SpanLabel::Context: ++c.context; break;
      case SpanLabel::Inference: ++c.inference; break;
      default: break;
    }
  }
  return c;
}

LossBreakdown loss(const Parameters& params, const PromptSequence& seq) {
  check_training(seq);
  return breakdown_from(forward(params, seq.tokens, visual_of(seq)), seq);
}

LossBreakdown loss_and_gradient(const Parameters& p, const PromptSequence& seq, Parameters& grad) {
  check_training(seq);
  const auto& c = p.config();
  const auto& L = p.layout();
  if (grad.size() != p.size()) throw ValidationError("gradient buffer does not match parameters");
  ForwardCache cache;
  const auto* visual = visual_of(seq);
  run_forward(p, seq.tokens, visual, &cache);
  const auto lb = breakdown_from(cache.logp, seq);

  const int T = static_cast<int>(seq.tokens.size());
  const int D = c.embed_dim;
  const int V = c.vocab_size;
  const int H = static_cast<int>(mlp_width(c));
  const int dh = D / c.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  RowMatrix dlogits = RowMatrix::Zero(T, V);
  for (int t = 1; t < T; ++t) {
    LossBreakdown probe;
    if (term_for(probe, seq.spans[static_cast<std::size_t>(t)]) == nullptr) continue;
    dlogits.row(t - 1) = cache.logp.row(t - 1).array().exp();
    dlogits(t - 1, seq.tokens[static_cast<std::size_t>(t)]) -= 1.0;
  }

  grad.matrix(L.output_w, D, V) += cache.f.transpose() * dlogits;
  grad.vector(L.output_b, V) += dlogits.colwise().sum();
  RowMatrix df = dlogits * p.matrix(L.output_w, D, V).transpose();
  RowMatrix dx = layer_norm_backward(df, cache.final_ln, p.vector(L.final_gain, D),
                                     grad.vector(L.final_gain, D), grad.vector(L.final_bias, D));

  for (std::size_t l = L.blocks.size(); l-- > 0;) {
    const auto& b = L.blocks[l];
    const auto& bc = cache.blocks[l];
    // MLP branch
    grad.matrix(b.proj_w, H, D) += bc.g.transpose() * dx;
    grad.vector(b.proj_b, D) += dx.colwise().sum();
    RowMatrix du = dx * p.matrix(b.proj_w, H, D).transpose();
    du.array() *= bc.u.unaryExpr([](double u) { return gelu_grad(u); }).array();
    grad.matrix(b.fc_w, D, H) += bc.m.transpose() * du;
    grad.vector(b.fc_b, H) += du.colwise().sum();
    const RowMatrix dm = du * p.matrix(b.fc_w, D, H).transpose();
    dx += layer_norm_backward(dm, bc.ln2, p.vector(b.ln2_gain, D), grad.vector(b.ln2_gain, D),
                              grad.vector(b.ln2_bias, D));
    // attention branch
    grad.matrix(b.attn_out_w, D, D) += bc.heads_out.transpose() * dx;
    grad.vector(b.attn_out_b, D) += dx.colwise().sum();
    const RowMatrix dheads = dx * p.matrix(b.attn_out_w, D, D).transpose();
    RowMatrix dqkv(T, 3 * D);
    for (int h = 0; h < c.heads; ++h) {
      const auto& A = bc.attn[static_cast<std::size_t>(h)];
      const auto Q = bc.qkv.middleCols(h * dh, dh);
      const auto K = bc.qkv.middleCols(D + h * dh, dh);
      const auto Vv = bc.qkv.middleCols(2 * D + h * dh, dh);
      const auto dO = dheads.middleCols(h * dh, dh);
      const RowMatrix dA = dO * Vv.transpose();
      dqkv.middleCols(2 * D + h * dh, dh) = A.transpose() * dO;
      RowMatrix dS = A.array() * dA.array();
      const Eigen::VectorXd row_dot = dS.rowwise().sum();
      dS = A.array() * (dA.array().colwise() - row_dot.array());
      dqkv.middleCols(h * dh, dh) = (dS * K) * scale;
      dqkv.middleCols(D + h * dh, dh) = (dS.transpose() * Q) * scale;
    }
    grad.matrix(b.qkv_w, D, 3 * D) += bc.a.transpose() * dqkv;
    grad.vector(b.qkv_b, 3 * D) += dqkv.colwise().sum();
    const RowMatrix da = dqkv * p.matrix(b.qkv_w, D, 3 * D).transpose();
    dx += layer_norm_backward(da, bc.ln1, p.vector(b.ln1_gain, D), grad.vector(b.ln1_gain, D),
                              grad.vector(b.ln1_bias, D));
  }

  auto dE = grad.matrix(L.token_embedding, V, D);
  auto dP = grad.matrix(L.position_embedding, c.max_len, D);
  for (int t = 0; t < T; ++t) {
    dE.row(seq.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
    dP.row(t) += dx.row(t);
  }
  grad.vector(L.visual_b, D) += dx.row(0);
  if (visual != nullptr && c.visual_dim > 0) {
    const ConstVectorMap v(visual->data(), c.visual_dim);
    grad.matrix(L.visual_w, c.visual_dim, D) += v.transpose() * dx.row(0);
  }
  return lb;
}

GradientCheckResult gradient_check(const Parameters& params, const PromptSequence& seq,
                                   double epsilon, const GradientCheckOptions& options) {
  Parameters grad(params.config());
  loss_and_gradient(params, seq, grad);

  const std::size_t n = params.size();
  const auto want = static_cast<std::size_t>(std::llround(options.fraction * static_cast<double>(n)));
  const std::size_t count = std::clamp<std::size_t>(want, 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(options.seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + static_cast<std::size_t>(rng.uniform_below(n - i))]);
  }

  Parameters probe = params;
  GradientCheckResult result;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = order[i];
    const double saved = probe[idx];
    probe[idx] = saved + epsilon;
    const double up = loss(probe, seq).total;
    probe[idx] = saved - epsilon;
    const double down = loss(probe, seq).total;
    probe[idx] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = grad[idx] * options.gradient_scale;
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    if (result.checked == 0 || rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = idx;
    }
    ++result.checked;
  }
  return result;
}

DecoderState::DecoderState(const Parameters& params, const std::vector<double>* visual)
    : params_(params), visual_shift_(visual_shift(params, visual)) {
  const auto& c = params.config();
  keys_.assign(static_cast<std::size_t>(c.layers), RowMatrix(c.max_len, c.embed_dim));
  values_.assign(static_cast<std::size_t>(c.layers), RowMatrix(c.max_len, c.embed_dim));
}

Eigen::RowVectorXd DecoderState::step(int token) {
  const auto& p = params_;
  const auto& c = p.config();
  const auto& L = p.layout();
  if (static_cast<int>(length_) >= c.max_len) throw ValidationError("decoder exceeded max_len");
  if (token < 0 || token >= c.vocab_size) throw ValidationError("token id out of range");
  const int D = c.embed_dim;
  const int H = static_cast<int>(mlp_width(c));
  const int dh = D / c.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto pos = static_cast<Eigen::Index>(length_);

  RowMatrix x = p.matrix(L.token_embedding, c.vocab_size, D).row(token) +
                p.matrix(L.position_embedding, c.max_len, D).row(pos);
  if (length_ == 0) x += visual_shift_;
  for (std::size_t l = 0; l < L.blocks.size(); ++l) {
    const auto& b = L.blocks[l];
    const RowMatrix a = layer_norm(x, p.vector(b.ln1_gain, D), p.vector(b.ln1_bias, D), nullptr);
    const RowMatrix qkv = (a * p.matrix(b.qkv_w, D, 3 * D)) + p.vector(b.qkv_b, 3 * D);
    keys_[l].row(pos) = qkv.middleCols(D, D);
    values_[l].row(pos) = qkv.middleCols(2 * D, D);
    RowMatrix heads(1, D);
    for (int h = 0; h < c.heads; ++h) {
      const auto K = keys_[l].block(0, h * dh, pos + 1, dh);
      const auto Vv = values_[l].block(0, h * dh, pos + 1, dh);
      Eigen::RowVectorXd s = (qkv.middleCols(h * dh, dh) * K.transpose()) * scale;
      const double mx = s.maxCoeff();
      s = (s.array() - mx).exp();
      s /= s.sum();
      heads.middleCols(h * dh, dh) = s * Vv;
    }
    x += heads * p.matrix(b.attn_out_w, D, D) + p.vector(b.attn_out_b, D);
    const RowMatrix m = layer_norm(x, p.vector(b.ln2_gain, D), p.vector(b.ln2_bias, D), nullptr);
    RowMatrix u = m * p.matrix(b.fc_w, D, H) + p.vector(b.fc_b, H);
    u = u.unaryExpr([](double v) { return gelu(v); });
    x += u * p.matrix(b.proj_w, H, D) + p.vector(b.proj_b, D);
  }
  const RowMatrix f = layer_norm(x, p.vector(L.final_gain, D), p.vector(L.final_bias, D), nullptr);
  RowMatrix logp = f * p.matrix(L.output_w, D, c.vocab_size) + p.vector(L.output_b, c.vocab_size);
  log_softmax_rows(logp);
  ++length_;
  return logp.row(0);
}

}  // namespace ctxprompt
