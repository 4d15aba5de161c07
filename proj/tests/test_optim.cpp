#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "dpgnn/optim.hpp"
#include "test_support.hpp"

namespace dpgnn {
namespace {

using testing::gradient_check;

TEST(Loss, EqualScoresGiveLn2) {
  QuadrupleScores s{0.3, 0.3, 0.3};
  EXPECT_NEAR(quadruple_term(s), std::log(2.0), 1e-12);
  EXPECT_NEAR(bpr_term(s), std::log(2.0), 1e-12);
}

TEST(Loss, KnownMargin) {
  QuadrupleScores s{2.0, 0.0, 0.0};
  EXPECT_NEAR(quadruple_term(s), 0.1269280110429725, 1e-12);
  EXPECT_NEAR(neg_log_sigmoid(2.0), -std::log(1.0 / (1.0 + std::exp(-2.0))), 1e-15);
}

TEST(Loss, StableForLargeMargins) {
  EXPECT_TRUE(std::isfinite(neg_log_sigmoid(-800.0)));
  EXPECT_NEAR(neg_log_sigmoid(-800.0), 800.0, 1e-9);
  EXPECT_EQ(neg_log_sigmoid(800.0), 0.0);
  EXPECT_EQ(sigmoid(-800.0), 0.0);
}

TEST(Loss, QuadrupleDecreasesWithMargin) {
  double prev = 1e9;
  for (double pos = -3.0; pos <= 3.0; pos += 0.5) {
    double v = quadruple_term({pos, 0.1, -0.2});
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Loss, MainLossAveragesTerms) {
  std::vector<QuadrupleScores> s{{0, 0, 0}, {2, 0, 0}};
  EXPECT_NEAR(main_loss(s), 0.5 * (std::log(2.0) + 0.1269280110429725), 1e-12);
  EXPECT_EQ(main_loss({}), 0.0);
}

TEST(Loss, JointRejectsNegativeLambda) {
  EXPECT_DOUBLE_EQ(joint_loss(1.0, 2.0, 0.1), 1.2);
  EXPECT_THROW(joint_loss(1.0, 2.0, -0.1), InputError);
}

TEST(Contrastive, SingleUserIsLn2) {
  NodeLayout L{1, 1, true};
  std::mt19937_64 rng(1);
  Matrix<double> Z = testing::random_matrix(4, 3, rng);
  ContrastiveGroup g{Side::Candidate, {0}, {}};
  EXPECT_NEAR(ssl_side_loss(Z, L, g, 0.2), std::log(2.0), 1e-12);
}

TEST(Contrastive, EveryAnchorAtLeastLn2AndSumOverAnchors) {
  NodeLayout L{6, 2, true};
  std::mt19937_64 rng(2);
  Matrix<double> Z = testing::random_matrix(L.node_count(), 3, rng);
  ContrastiveGroup all{Side::Candidate, {0, 1, 2, 3, 4, 5}, {}};
  const double total = ssl_side_loss(Z, L, all, 0.3);
  EXPECT_GE(total, 6 * std::log(2.0));
  // sampled form whose pools are the whole batch equals the in-batch form
  ContrastiveGroup pooled = all;
  for (std::uint32_t a : all.anchors) {
    std::vector<std::uint32_t> pool{a};
    for (std::uint32_t b : all.anchors)
      if (b != a) pool.push_back(b);
    pooled.pools.push_back(pool);
  }
  EXPECT_NEAR(ssl_side_loss(Z, L, pooled, 0.3), total, 1e-10);
}

TEST(Contrastive, ExplicitFormula) {
  NodeLayout L{2, 1, true};
  Matrix<double> Z(6, 2);
  Z << 1, 0,  // c0 a
      0, 1,   // c1 a
      1, 1,   // c0 p
      2, 0,   // c1 p
      0, 0, 0, 0;
  const double tau = 0.5;
  auto dot = [&](int x, int y) { return Z.row(x).dot(Z.row(y)) / tau; };
  // pairs (a_i, p_i'): a0=0, a1=1, p0=2, p1=3
  double expect = 0.0;
  for (int i = 0; i < 2; ++i) {
    const int ai = i, pi = 2 + i;
    double den = 0.0;
    for (int j = 0; j < 2; ++j) den += std::exp(dot(ai, 2 + j)) + std::exp(dot(j, pi));
    expect += -std::log(std::exp(dot(ai, pi)) / den);
  }
  ContrastiveGroup g{Side::Candidate, {0, 1}, {}};
  EXPECT_NEAR(ssl_side_loss(Z, L, g, tau), expect, 1e-12);
}

TEST(Sampler, NegativesAreNeverMatched) {
  std::mt19937_64 rng(3);
  auto sets = testing::random_sets(12, 10, rng, 0.3, 0, 0);
  MatchIndex idx(12, 10, sets.match);
  auto qs = sample_quadruples(std::span<const Pair>(sets.match), idx, rng);
  ASSERT_EQ(qs.size(), sets.match.size());
  for (std::size_t t = 0; t < qs.size(); ++t) {
    EXPECT_EQ(qs[t].i, sets.match[t].candidate);
    EXPECT_EQ(qs[t].k, sets.match[t].job);
    EXPECT_FALSE(idx.contains({qs[t].i, qs[t].kp}));
    EXPECT_FALSE(idx.contains({qs[t].ip, qs[t].k}));
  }
}

TEST(Sampler, FullyMatchedAnchorFails) {
  std::vector<Pair> ms{{0, 0}, {0, 1}, {1, 0}};
  MatchIndex idx(2, 2, ms);
  std::mt19937_64 rng(4);
  std::vector<Pair> batch{{0, 0}};
  EXPECT_THROW(sample_quadruples(std::span<const Pair>(batch), idx, rng), NumericError);
}

TEST(Sampler, SampledPoolsContainAnchorAndAreDistinct) {
  std::mt19937_64 rng(5);
  auto g = make_contrastive_group(Side::Job, {3, 1, 3}, 10, {SslNegatives::Mode::Sampled, 4}, rng);
  ASSERT_EQ(g.anchors, (std::vector<std::uint32_t>{1, 3}));
  for (std::size_t a = 0; a < g.anchors.size(); ++a) {
    ASSERT_EQ(g.pools[a].size(), 5u);
    EXPECT_EQ(g.pools[a][0], g.anchors[a]);
    std::set<std::uint32_t> uniq(g.pools[a].begin(), g.pools[a].end());
    EXPECT_EQ(uniq.size(), 5u);
  }
}

struct GradCase {
  std::uint32_t layers;
  double lambda;
  SelfEdgeMode self;
  const char* variant;
};

class GradientTest : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientTest, MatchesCentralDifferences) {
  const auto c = GetParam();
  VariantConfig v = apply_variant({}, c.variant);
  v.layers = c.layers;
  v.ssl_weight = c.lambda;
  v.self_edges = c.self;
  v.omega = 0.6;
  for (std::uint64_t seed : {1u, 2u}) {
    auto r = gradient_check(v, seed);
    EXPECT_LT(r.error_E, 1e-5) << "seed " << seed;
    EXPECT_LT(r.error_W, 1e-5) << "seed " << seed;
  }
}

std::vector<GradCase> all_cases() {
  std::vector<GradCase> out;
  for (std::uint32_t L : {0u, 1u, 3u})
    for (double lam : {0.0, 0.1})
      for (SelfEdgeMode s : {SelfEdgeMode::AsMatch, SelfEdgeMode::AsUni, SelfEdgeMode::Off})
        for (const char* v : {"full", "no-dpg", "no-ql"}) out.push_back({L, lam, s, v});
  return out;
}

INSTANTIATE_TEST_SUITE_P(ConfigMatrix, GradientTest, ::testing::ValuesIn(all_cases()));

TEST(Gradient, SampledNegativesAndPerSideProjection) {
  VariantConfig v;
  v.ssl_weight = 0.1;
  auto r = gradient_check(v, 7, 6, 5, {SslNegatives::Mode::Sampled, 3}, false);
  EXPECT_LT(r.error_E, 1e-5);
  EXPECT_LT(r.error_W, 1e-5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelParams<double> p;
  p.layout = {1, 1, false};
  p.dims = {1, 1, 1};
  p.E = Matrix<double>::Constant(2, 1, 1.0);
  p.W = {Matrix<double>::Constant(1, 1, 0.5)};
  p.T = Matrix<double>::Ones(2, 1);
  auto s = AdamState<double>::zeros_like(p);
  Gradients<double> g{Matrix<double>::Constant(2, 1, 3.0), {Matrix<double>::Constant(1, 1, -0.2)}};
  adam_step(p, g, s, {0.01});
  EXPECT_EQ(s.step, 1u);
  // bias-corrected first step is lr * g / (|g| + eps)
  EXPECT_NEAR(p.E(0, 0), 1.0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-12);
  EXPECT_NEAR(p.W[0](0, 0), 0.5 + 0.01 * 0.2 / (0.2 + 1e-8), 1e-12);
}

TEST(Adam, MatchesReferenceRecurrence) {
  ModelParams<double> p;
  p.layout = {1, 1, false};
  p.dims = {1, 1, 1};
  p.E = Matrix<double>::Zero(2, 1);
  p.W = {Matrix<double>::Zero(1, 1)};
  p.T = Matrix<double>::Ones(2, 1);
  auto s = AdamState<double>::zeros_like(p);
  double x = 0.0, m = 0.0, v = 0.0;
  const double grads[] = {1.0, -2.0, 0.5, 0.25, -1.0};
  for (int t = 1; t <= 5; ++t) {
    const double gt = grads[t - 1];
    Gradients<double> g{Matrix<double>::Constant(2, 1, gt), {Matrix<double>::Zero(1, 1)}};
    adam_step(p, g, s, {0.1});
    m = 0.9 * m + 0.1 * gt;
    v = 0.999 * v + 0.001 * gt * gt;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p.E(0, 0), x, 1e-12);
}

TEST(Training, GradientDescentLowersLoss) {
  std::mt19937_64 rng(8);
  auto sets = testing::random_sets(8, 8, rng, 0.2, 0.1, 0.1);
  VariantConfig v;
  auto g = build_variant_graph(sets, 8, 8, v);
  auto cd = testing::random_docs(Side::Candidate, 8, 4, rng);
  auto jd = testing::random_docs(Side::Job, 8, 4, rng);
  auto p = init_params<double>(1, g.layout(), {8, 4}, build_doc_matrix<double>(g.layout(), cd, jd));
  MatchIndex idx(8, 8, sets.match);
  auto b = make_training_batch(std::span<const Pair>(sets.match), idx, {}, true, rng);
  HybridOperator<double> op(g, v.omega);
  AdamState<double> s = AdamState<double>::zeros_like(p);
  const double before = forward_backward<double>(p, op, v, b, 0.2, nullptr).total;
  for (int it = 0; it < 50; ++it) {
    Gradients<double> gr;
    forward_backward(p, op, v, b, 0.2, &gr);
    adam_step(p, gr, s, {0.01});
  }
  EXPECT_LT(forward_backward<double>(p, op, v, b, 0.2, nullptr).total, before);
}

}  // namespace
}  // namespace dpgnn
