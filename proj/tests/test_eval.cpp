#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dpgnn/eval.hpp"
#include "test_support.hpp"

namespace dpgnn {
namespace {

using testing::brute_rank_metrics;

TEST(RankMetricsTest, TopRank) {
  std::vector<double> s{0.9, 0.1, 0.2};
  auto r = rank_metrics(s, 0);
  EXPECT_EQ(r.rank, 1u);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 0.2);
  EXPECT_DOUBLE_EQ(r.ndcg, 1.0);
  EXPECT_DOUBLE_EQ(r.mrr, 1.0);
}

TEST(RankMetricsTest, RankSixIsOutsideTopFive) {
  std::vector<double> s{0.0, 1, 2, 3, 4, 5, -1};
  auto r = rank_metrics(s, 0);
  EXPECT_EQ(r.rank, 6u);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.ndcg, 0.0);
  EXPECT_DOUBLE_EQ(r.mrr, 1.0 / 6.0);
}

TEST(RankMetricsTest, TiesCountAgainstPositive) {
  std::vector<double> s{1.0, 1.0, 1.0};
  auto r = rank_metrics(s, 1);
  EXPECT_EQ(r.rank, 3u);
  EXPECT_DOUBLE_EQ(r.ndcg, 0.5);
}

TEST(RankMetricsTest, RankTwoNdcg) {
  std::vector<double> s{0.5, 0.7, 0.1};
  EXPECT_NEAR(rank_metrics(s, 0).ndcg, 1.0 / std::log2(3.0), 1e-15);
}

TEST(RankMetricsTest, Errors) {
  std::vector<double> s{0.5, std::nan("")};
  EXPECT_THROW(rank_metrics(s, 0), NumericError);
  EXPECT_THROW(rank_metrics(s, 2), InputError);
}

TEST(RankMetricsTest, AgreesWithSortingOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coarse(0, 4);  // frequent ties
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(21);
    for (auto& x : s) x = coarse(rng);
    const std::size_t pos = rng() % s.size();
    auto a = rank_metrics(s, pos);
    auto b = brute_rank_metrics(s, pos, 5);
    ASSERT_EQ(a.rank, b.rank);
    ASSERT_EQ(a.recall, b.recall);
    ASSERT_EQ(a.precision, b.precision);
    ASSERT_EQ(a.ndcg, b.ndcg);
    ASSERT_EQ(a.mrr, b.mrr);
  }
}

TEST(EvalInstances, NegativesDistinctUnmatchedAndDeterministic) {
  std::mt19937_64 rng(2);
  auto sets = testing::random_sets(40, 35, rng, 0.05, 0, 0);
  MatchIndex idx(40, 35, sets.match);
  auto a = build_eval_instances(sets.match, idx, 5);
  auto b = build_eval_instances(sets.match, idx, 5);
  EXPECT_EQ(a, b);
  auto c = build_eval_instances(sets.match, idx, 6);
  EXPECT_NE(a, c);
  ASSERT_EQ(a.size(), 2 * sets.match.size());
  for (const auto& inst : a) {
    ASSERT_EQ(inst.negatives.size(), 20u);
    std::set<std::uint32_t> uniq(inst.negatives.begin(), inst.negatives.end());
    EXPECT_EQ(uniq.size(), 20u);
    for (auto neg : inst.negatives) {
      Pair p = inst.direction == Direction::RankJobsForCandidate ? Pair{inst.anchor, neg} : Pair{neg, inst.anchor};
      EXPECT_FALSE(idx.contains(p));
    }
  }
}

TEST(EvalInstances, TooFewNegatives) {
  std::vector<Pair> ms{{0, 0}};
  MatchIndex idx(5, 5, ms);
  try {
    build_eval_instances(ms, idx, 1);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("candidate 0"), std::string::npos);
  }
  EXPECT_EQ(build_eval_instances(ms, idx, 1, 4).size(), 2u);
}

TEST(Evaluate, SeparatesDirections) {
  NodeLayout L{2, 2, true};
  Matrix<double> Z = Matrix<double>::Zero(8, 1);
  // candidate 0 prefers job 0, job 1 prefers candidate 1
  Z(L.candidate_active(0), 0) = 1.0;
  Z(L.candidate_passive(0), 0) = 1.0;
  Z(L.job_passive(0), 0) = 1.0;
  Z(L.job_active(0), 0) = 1.0;
  std::vector<EvalInstance> inst{{Direction::RankJobsForCandidate, 0, 0, {1}},
                                 {Direction::RankCandidatesForJob, 1, 0, {1}}};
  auto rep = evaluate(Z, L, inst, 5);
  EXPECT_EQ(rep.candidate.count, 1u);
  EXPECT_EQ(rep.job.count, 1u);
  EXPECT_DOUBLE_EQ(rep.candidate.mrr, 1.0);
  EXPECT_DOUBLE_EQ(rep.job.mrr, 0.5);  // tie with candidate 1 at score 0
  EXPECT_DOUBLE_EQ(rep.mean_mrr(), 0.75);
}

TEST(Evaluate, RandomScoresApproachHarmonicMean) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> s(21);
  double acc = 0.0;
  const int N = 20000;
  for (int t = 0; t < N; ++t) {
    for (auto& x : s) x = g(rng);
    acc += rank_metrics(s, 0).mrr;
  }
  double h = 0.0;
  for (int r = 1; r <= 21; ++r) h += 1.0 / r;
  EXPECT_NEAR(acc / N, h / 21.0, 0.01);
}

double brute_best_deviation(const std::vector<std::uint64_t>& sorted, std::size_t groups) {
  const std::size_t N = sorted.size();
  double best = 1e300;
  std::vector<std::size_t> cuts(groups - 1);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t g, std::size_t start) {
    if (g == groups - 1) {
      best = std::min(best, partition_deviation(sorted, cuts, groups));
      return;
    }
    for (std::size_t c = start; c + (groups - 1 - g) <= N; ++c) {
      cuts[g] = c;
      rec(g + 1, c + 1);
    }
  };
  rec(0, 1);
  return best;
}

TEST(Sparsity, CutsAreOptimalAgainstExhaustiveSearch) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t N = 5 + rng() % 8;
    std::vector<std::uint64_t> counts(N);
    for (auto& c : counts) c = rng() % 6;
    std::sort(counts.begin(), counts.end());
    auto cuts = balanced_cuts(counts, 5);
    ASSERT_EQ(cuts.size(), 4u);
    for (std::size_t t = 0; t < cuts.size(); ++t) {
      ASSERT_GT(cuts[t], t == 0 ? 0u : cuts[t - 1]);
      ASSERT_LT(cuts[t], N);
    }
    EXPECT_NEAR(partition_deviation(counts, cuts, 5), brute_best_deviation(counts, 5), 1e-9);
  }
}

TEST(Sparsity, KnownPartition) {
  std::vector<std::uint64_t> counts{1, 1, 1, 1, 4, 4};
  auto cuts = balanced_cuts(counts, 5);
  EXPECT_NEAR(partition_deviation(counts, cuts, 5), 1.6, 1e-12);
}

TEST(Sparsity, GroupsAreOrderedByCount) {
  std::mt19937_64 rng(5);
  std::vector<std::uint64_t> counts(60);
  for (auto& c : counts) c = rng() % 20;
  auto g = sparsity_groups(counts);
  std::set<std::uint32_t> used(g.begin(), g.end());
  EXPECT_EQ(used, (std::set<std::uint32_t>{1, 2, 3, 4, 5}));
  for (std::size_t a = 0; a < counts.size(); ++a)
    for (std::size_t b = 0; b < counts.size(); ++b) {
      if (counts[a] < counts[b]) {
        EXPECT_LE(g[a], g[b]);
      }
    }
}

TEST(Sparsity, TooFewActiveUsers) {
  std::vector<std::uint64_t> counts{0, 0, 3, 1, 0, 2};
  EXPECT_THROW(sparsity_groups(counts), InputError);
}

TEST(Sparsity, BreakdownCoversEveryInstance) {
  std::mt19937_64 rng(6);
  auto sets = testing::random_sets(40, 30, rng, 0.06, 0.05, 0.05);
  MatchIndex idx(40, 30, sets.match);
  auto inst = build_eval_instances(sets.match, idx, 1);
  Matrix<double> Z = testing::random_matrix(140, 3, rng);
  NodeLayout L{40, 30, true};
  auto ms = score_instances(Z, L, inst);
  auto counts = interaction_counts(sets, Side::Candidate, 40);
  auto groups = sparsity_breakdown(inst, ms, Side::Candidate, counts);
  ASSERT_EQ(groups.size(), 5u);
  std::size_t total = 0, users = 0;
  for (const auto& gm : groups) {
    total += gm.metrics.count;
    users += gm.users;
  }
  EXPECT_EQ(total, sets.match.size());
  EXPECT_EQ(users, 40u);
}

TEST(Report, TsvLayout) {
  RankingReport r;
  r.candidate = {1, 0.2, 1, 1, 3};
  r.job = {0, 0, 0, 0.25, 3};
  std::ostringstream os;
  write_report_tsv(os, r);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "direction\tmetric\tvalue");
  std::getline(in, line);
  EXPECT_EQ(line, "candidate\trecall@5\t1.000000");
  r.candidate_groups.push_back({1, 2, 3, r.candidate});
  std::ostringstream os2;
  write_report_tsv(os2, r);
  EXPECT_NE(os2.str().find("candidate\tG1\tmrr\t1.000000"), std::string::npos);
}

}  // namespace
}  // namespace dpgnn
