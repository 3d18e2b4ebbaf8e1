#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ctxprompt/error.hpp"
#include "ctxprompt/model.hpp"
#include "model_cases.hpp"

using namespace ctxprompt;

namespace {

// Independent per-position summation over forward() rows.
LossBreakdown masked_nll(const Parameters& p, const PromptSequence& s) {
  const auto logp = forward(p, s.tokens, s.visual ? &*s.visual : nullptr);
  LossBreakdown out;
  for (std::size_t t = 1; t < s.size(); ++t) {
    const double nll = -logp(static_cast<Eigen::Index>(t - 1), s.tokens[t]);
    switch (s.spans[t]) {
      case SpanLabel::Event: out.event_nll += nll; break;
      case SpanLabel::Place: out.place_nll += nll; break;
      case SpanLabel::Context: out.context_nll += nll; break;
      case SpanLabel::Inference: out.inference_nll += nll; break;
      default: break;
    }
  }
  out.total = out.event_nll + out.place_nll + out.context_nll + out.inference_nll;
  return out;
}

std::size_t hand_count(const ModelConfig& c) {
  const std::size_t d = c.embed_dim, v = c.vocab_size, h = c.mlp_ratio * c.embed_dim;
  const std::size_t block = 2 * d + (3 * d * d + 3 * d) + (d * d + d) + 2 * d + (d * h + h) + (h * d + d);
  return v * d + c.max_len * d + c.visual_dim * d + d + c.layers * block + 2 * d + d * v + v;
}

}  // namespace

TEST(ModelConfig, ValidatesAndCountsParameters) {
  ModelConfig c;
  c.vocab_size = 100;
  c.embed_dim = 63;
  EXPECT_THROW(c.validate(), ConfigError);
  c.embed_dim = 64;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.parameter_count(), hand_count(c));
  EXPECT_EQ(init_model(c).size(), c.parameter_count());
  const auto t = cases::tiny_config();
  EXPECT_EQ(t.parameter_count(), hand_count(t));
  EXPECT_LE(t.parameter_count(), 10000u);
}

TEST(Init, SameSeedSameParameters) {
  const auto c = cases::tiny_config();
  EXPECT_EQ(init_model(c).checksum(), init_model(c).checksum());
  auto other = c;
  other.seed = 4;
  EXPECT_NE(init_model(c).checksum(), init_model(other).checksum());
}

TEST(Forward, RowsAreNormalized) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(1);
  const auto s = cases::random_sequence(rng, 20, true, true, 4);
  const auto logp = forward(p, s.tokens, &*s.visual);
  ASSERT_EQ(logp.rows(), static_cast<Eigen::Index>(s.size()));
  for (Eigen::Index t = 0; t < logp.rows(); ++t) EXPECT_NEAR(logp.row(t).array().exp().sum(), 1.0, 1e-6);
}

TEST(Forward, IsCausal) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = cases::random_sequence(rng, 20, true, false, 4);
    const auto base = forward(p, s.tokens);
    const auto j = 1 + rng.uniform_below(s.size() - 1);
    s.tokens[j] = s.tokens[j] == 8 ? 9 : 8;
    const auto changed = forward(p, s.tokens);
    for (std::size_t t = 0; t < j; ++t) {
      for (Eigen::Index v = 0; v < base.cols(); ++v) {
        ASSERT_EQ(base(static_cast<Eigen::Index>(t), v), changed(static_cast<Eigen::Index>(t), v));
      }
    }
    EXPECT_NE(base.row(static_cast<Eigen::Index>(j)), changed.row(static_cast<Eigen::Index>(j)));
  }
}

TEST(Forward, AbsentVisualEqualsZeros) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(3);
  const auto s = cases::random_sequence(rng, 20, false, false, 4);
  const std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(forward(p, s.tokens), forward(p, s.tokens, &zeros));
}

TEST(Forward, RejectsOverLength) {
  const auto p = init_model(cases::tiny_config());
  std::vector<int> toks(25, 8);
  EXPECT_THROW(forward(p, toks), Error);
}

TEST(Decoder, CachedStepsMatchFullForward) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(4);
  const auto s = cases::random_sequence(rng, 20, true, true, 4);
  const auto full = forward(p, s.tokens, &*s.visual);
  DecoderState dec(p, &*s.visual);
  for (std::size_t t = 0; t < s.size(); ++t) {
    const auto row = dec.step(s.tokens[t]);
    EXPECT_LT((row - full.row(static_cast<Eigen::Index>(t))).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Loss, TermsAddUpAndMatchMaskedOracle) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = cases::random_sequence(rng, 20, i % 2 == 0, i % 3 == 0, 4);
    const auto l = loss(p, s);
    const auto o = masked_nll(p, s);
    EXPECT_NEAR(l.total, l.event_nll + l.place_nll + l.context_nll + l.inference_nll, 1e-9);
    EXPECT_NEAR(l.total, o.total, 1e-9);
    EXPECT_NEAR(l.event_nll, o.event_nll, 1e-9);
    EXPECT_NEAR(l.place_nll, o.place_nll, 1e-9);
    EXPECT_NEAR(l.context_nll, o.context_nll, 1e-9);
    EXPECT_NEAR(l.inference_nll, o.inference_nll, 1e-9);
    if (i % 2 == 1) EXPECT_EQ(l.context_nll, 0.0);
  }
}

TEST(Loss, UniformLogitsGiveLengthTimesLogV) {
  auto p = init_model(cases::tiny_config());
  const auto& L = p.layout();
  for (std::size_t i = L.output_w; i < L.total; ++i) p[i] = 0.0;
  SplitMix64 rng(6);
  const auto s = cases::random_sequence(rng, 20, true, false, 4);
  const auto counts = loss_token_counts(s);
  const auto l = loss(p, s);
  const double lnv = std::log(20.0);
  EXPECT_NEAR(l.event_nll, static_cast<double>(counts.event) * lnv, 1e-9);
  EXPECT_NEAR(l.place_nll, static_cast<double>(counts.place) * lnv, 1e-9);
  EXPECT_NEAR(l.context_nll, static_cast<double>(counts.context) * lnv, 1e-9);
  EXPECT_NEAR(l.inference_nll, static_cast<double>(counts.inference) * lnv, 1e-9);
}

TEST(Loss, RequiresInferenceSpan) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(7);
  const auto s = cases::random_sequence(rng, 20, false, false, 4, false);
  EXPECT_THROW(loss(p, s), ValidationError);
}

TEST(Gradient, AnalyticValueMatchesLoss) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(8);
  const auto s = cases::random_sequence(rng, 20, true, true, 4);
  Parameters g(p.config());
  g.set_zero();
  EXPECT_NEAR(loss_and_gradient(p, s, g).total, loss(p, s).total, 1e-12);
}

TEST(Gradient, FiniteDifferenceCheckPassesAndCatchesScaledGradient) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(9);
  for (int i = 0; i < 4; ++i) {
    const auto s = cases::random_sequence(rng, 20, i % 2 == 0, true, 4);
    GradientCheckOptions o;
    o.fraction = 0.05;
    o.seed = 100 + i;
    const auto ok = gradient_check(p, s, 1e-4, o);
    EXPECT_GT(ok.checked, 0u);
    EXPECT_LT(ok.max_relative_error, 1e-3);
    o.gradient_scale = 2.0;
    EXPECT_GT(gradient_check(p, s, 1e-4, o).max_relative_error, 1e-3);
  }
}

TEST(Gradient, StructuralZerosForAbsentInputs) {
  const auto p = init_model(cases::tiny_config());
  SplitMix64 rng(10);
  const auto s = cases::random_sequence(rng, 20, false, false, 4);
  Parameters g(p.config());
  g.set_zero();
  loss_and_gradient(p, s, g);
  const auto& L = g.layout();
  const int d = p.config().embed_dim;
  const std::set<int> present(s.tokens.begin(), s.tokens.end());
  for (int v = 0; v < 20; ++v) {
    const double norm = g.matrix(L.token_embedding, 20, d).row(v).norm();
    if (present.count(v)) continue;
    EXPECT_EQ(norm, 0.0) << "token " << v;
  }
  const auto pos = g.matrix(L.position_embedding, p.config().max_len, d);
  for (int t = static_cast<int>(s.size()); t < p.config().max_len; ++t) EXPECT_EQ(pos.row(t).norm(), 0.0);
  EXPECT_EQ(g.matrix(L.visual_w, 4, d).norm(), 0.0);
  EXPECT_GT(g.vector(L.visual_b, d).norm(), 0.0);
}
