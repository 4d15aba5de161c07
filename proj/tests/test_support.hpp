#pragma once

// Test-only helpers: random instances and independent dense/naive oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "dpgnn/corpus.hpp"
#include "dpgnn/dpgraph.hpp"
#include "dpgnn/eval.hpp"
#include "dpgnn/linalg.hpp"
#include "dpgnn/model.hpp"
#include "dpgnn/optim.hpp"

namespace dpgnn::testing {

inline InteractionSets random_sets(std::uint32_t n, std::uint32_t m, std::mt19937_64& rng, double p_match,
                                   double p_apply, double p_reach) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InteractionSets s;
  for (std::uint32_t c = 0; c < n; ++c) {
    for (std::uint32_t j = 0; j < m; ++j) {
      if (u(rng) < p_match) s.match.push_back({c, j});
      if (u(rng) < p_apply) s.apply.push_back({c, j});
      if (u(rng) < p_reach) s.reach_out.push_back({c, j});
    }
  }
  return reconcile(std::move(s));
}

inline Matrix<double> random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix<double> M(rows, cols);
  for (Eigen::Index t = 0; t < M.size(); ++t) M.data()[t] = g(rng);
  return M;
}

// Dense combined operator built straight from the interaction sets.
// class_of(a,b): 0 none, 1 match, 2 uni, 3 self.
inline Matrix<double> dense_operator(const InteractionSets& s, std::uint32_t n, std::uint32_t m, bool dual,
                                     SelfEdgeMode self, double omega) {
  const std::uint32_t N = dual ? 2 * (n + m) : n + m;
  std::vector<std::vector<int>> cls(N, std::vector<int>(N, 0));
  auto set = [&](std::uint32_t a, std::uint32_t b, int c) {
    int& x = cls[a][b];
    if (x == 0 || c < x) x = c;
    cls[b][a] = x;
  };
  auto ca = [&](std::uint32_t i) { return i; };
  auto cp = [&](std::uint32_t i) { return dual ? n + i : i; };
  auto ja = [&](std::uint32_t k) { return dual ? 2 * n + k : n + k; };
  auto jp = [&](std::uint32_t k) { return dual ? 2 * n + m + k : n + k; };
  for (Pair p : s.apply) set(ca(p.candidate), jp(p.job), 2);
  for (Pair p : s.reach_out) set(ja(p.job), cp(p.candidate), 2);
  for (Pair p : s.match) {
    set(ca(p.candidate), jp(p.job), 1);
    set(ja(p.job), cp(p.candidate), 1);
  }
  if (dual && self != SelfEdgeMode::Off) {
    for (std::uint32_t i = 0; i < n; ++i) set(ca(i), cp(i), 3);
    for (std::uint32_t k = 0; k < m; ++k) set(ja(k), jp(k), 3);
  }
  std::vector<double> deg(N, 0.0);
  for (std::uint32_t a = 0; a < N; ++a)
    for (std::uint32_t b = 0; b < N; ++b) deg[a] += cls[a][b] != 0 ? 1.0 : 0.0;
  const double self_w = self == SelfEdgeMode::AsMatch ? 1.0 : (self == SelfEdgeMode::AsUni ? omega : 0.0);
  Matrix<double> A = Matrix<double>::Zero(N, N);
  for (std::uint32_t a = 0; a < N; ++a) {
    for (std::uint32_t b = 0; b < N; ++b) {
      if (cls[a][b] == 0) continue;
      const double w = cls[a][b] == 1 ? 1.0 : (cls[a][b] == 2 ? omega : self_w);
      A(a, b) = w / std::sqrt(deg[a] * deg[b]);
    }
  }
  return A;
}

// (1/(L+1)) sum_l A^l Z0 with explicit dense powers.
inline Matrix<double> dense_propagate(const Matrix<double>& A, const Matrix<double>& Z0, std::uint32_t L) {
  Matrix<double> power = Matrix<double>::Identity(A.rows(), A.cols());
  Matrix<double> acc = Matrix<double>::Zero(Z0.rows(), Z0.cols());
  for (std::uint32_t l = 0; l <= L; ++l) {
    acc += power * Z0;
    power = power * A;
  }
  return acc / static_cast<double>(L + 1);
}

// Rank metrics by explicit sorting, independent of the counting shortcut.
inline RankMetrics brute_rank_metrics(const std::vector<double>& scores, std::size_t pos, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = t;
  // descending score, positive after equal negatives
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if ((a == pos) != (b == pos)) return b == pos;
    return a < b;
  });
  std::size_t rank = 0;
  for (std::size_t t = 0; t < idx.size(); ++t)
    if (idx[t] == pos) rank = t + 1;
  RankMetrics r;
  r.rank = rank;
  r.mrr = 1.0 / rank;
  double dcg = 0.0;
  double hits = 0.0;
  for (std::size_t t = 0; t < std::min(k, idx.size()); ++t) {
    if (idx[t] == pos) {
      hits += 1.0;
      dcg += 1.0 / std::log2(t + 2.0);
    }
  }
  r.recall = hits;  // one relevant item
  r.precision = hits / static_cast<double>(k);
  r.ndcg = dcg;     // ideal DCG is 1
  return r;
}

// Central differences of f over every coordinate of M.
inline Matrix<double> central_differences(Matrix<double>& M, const std::function<double()>& f, double h) {
  Matrix<double> out(M.rows(), M.cols());
  for (Eigen::Index t = 0; t < M.size(); ++t) {
    const double orig = M.data()[t];
    M.data()[t] = orig + h;
    const double up = f();
    M.data()[t] = orig - h;
    const double down = f();
    M.data()[t] = orig;
    out.data()[t] = (up - down) / (2.0 * h);
  }
  return out;
}

// Relative error with a floor so that near-zero coordinates compare absolutely.
inline double max_relative_error(const Matrix<double>& a, const Matrix<double>& b, double floor = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index t = 0; t < a.size(); ++t) {
    const double x = a.data()[t], y = b.data()[t];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

inline DocEmbeddingTable random_docs(Side side, std::uint32_t count, std::uint32_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  DocEmbeddingTable t;
  t.side = side;
  t.dim = dim;
  t.values.resize(static_cast<std::size_t>(count) * dim);
  for (auto& v : t.values) v = g(rng);
  return t;
}

struct GradientCheck {
  double error_E = 0.0;
  double error_W = 0.0;
  double loss = 0.0;
};

// Random instance of n candidates and m jobs, one fixed batch, analytic vs
// central-difference gradients of the joint loss over every E and W coordinate.
inline GradientCheck gradient_check(const VariantConfig& v, std::uint64_t seed, std::uint32_t n = 5,
                                    std::uint32_t m = 5, SslNegatives neg = {}, bool shared = true,
                                    double h = 1e-4) {
  std::mt19937_64 rng(seed);
  InteractionSets sets = random_sets(n, m, rng, 0.2, 0.2, 0.2);
  if (sets.match.empty()) sets.match.push_back({0, 0});
  sets = reconcile(std::move(sets));
  const DualGraph g = build_variant_graph(sets, n, m, v);
  auto cd = random_docs(Side::Candidate, n, 4, rng);
  auto jd = random_docs(Side::Job, m, 4, rng);
  ModelParams<double> p = init_params<double>(seed, g.layout(), {3, 2}, build_doc_matrix<double>(g.layout(), cd, jd), shared);
  // Larger than Xavier so scores are not all near zero.
  p.E *= 2.0;
  for (auto& w : p.W) w *= 2.0;
  const MatchIndex matched(n, m, sets.match);
  TrainingBatch b = make_training_batch(std::span<const Pair>(sets.match), matched, neg, v.ssl_weight > 0.0, rng);
  const HybridOperator<double> op(g, v.omega);
  const double tau = 0.5;
  Gradients<double> grads;
  GradientCheck out;
  out.loss = forward_backward(p, op, v, b, tau, &grads).total;
  auto f = [&] { return forward_backward<double>(p, op, v, b, tau, nullptr).total; };
  out.error_E = max_relative_error(grads.E, central_differences(p.E, f, h));
  for (std::size_t w = 0; w < p.W.size(); ++w) {
    out.error_W = std::max(out.error_W, max_relative_error(grads.W[w], central_differences(p.W[w], f, h)));
  }
  return out;
}

}  // namespace dpgnn::testing
