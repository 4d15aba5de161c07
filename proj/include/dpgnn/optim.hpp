#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpgnn/corpus.hpp"
#include "dpgnn/dpgraph.hpp"
#include "dpgnn/error.hpp"
#include "dpgnn/linalg.hpp"
#include "dpgnn/model.hpp"

namespace dpgnn {

struct Quadruple {
  std::uint32_t i = 0;   // candidate
  std::uint32_t k = 0;   // job
  std::uint32_t ip = 0;  // negative candidate for k
  std::uint32_t kp = 0;  // negative job for i

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

// Uniform negatives with rejection on pairs matched in any split.
template <typename Rng>
std::vector<Quadruple> sample_quadruples(std::span<const Pair> batch, const MatchIndex& matched,
                                         Rng& rng) {
  const std::uint32_t n = matched.candidates();
  const std::uint32_t m = matched.jobs();
  std::uniform_int_distribution<std::uint32_t> pick_job(0, m - 1);
  std::uniform_int_distribution<std::uint32_t> pick_cand(0, n - 1);
  const std::size_t budget = 64 + 64 * static_cast<std::size_t>(std::max(n, m));
  std::vector<Quadruple> out;
  out.reserve(batch.size());
  for (Pair p : batch) {
    Quadruple q{p.candidate, p.job, 0, 0};
    if (matched.jobs_of(p.candidate).size() >= m) {
      throw NumericError("sample_quadruples: candidate " + std::to_string(p.candidate) +
                         " is matched with every job");
    }
    if (matched.candidates_of(p.job).size() >= n) {
      throw NumericError("sample_quadruples: job " + std::to_string(p.job) +
                         " is matched with every candidate");
    }
    std::size_t tries = 0;
    do {
      if (++tries > budget) {
        throw NumericError("sample_quadruples: rejection budget exceeded for candidate " +
                           std::to_string(p.candidate));
      }
      q.kp = pick_job(rng);
    } while (matched.contains({p.candidate, q.kp}));
    tries = 0;
    do {
      if (++tries > budget) {
        throw NumericError("sample_quadruples: rejection budget exceeded for job " +
                           std::to_string(p.job));
      }
      q.ip = pick_cand(rng);
    } while (matched.contains({q.ip, p.job}));
    out.push_back(q);
  }
  return out;
}

// -log(sigmoid(x)) = softplus(-x), stable for all finite x.
inline double neg_log_sigmoid(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Scores of one quadruple's three pairs.
struct QuadrupleScores {
  double pos = 0.0;       // y(i,k)
  double neg_job = 0.0;   // y(i,k')
  double neg_cand = 0.0;  // y(i',k)
};

inline double quadruple_term(const QuadrupleScores& s) {
  return neg_log_sigmoid(s.pos - 0.5 * s.neg_job - 0.5 * s.neg_cand);
}

inline double bpr_term(const QuadrupleScores& s) {
  return 0.5 * (neg_log_sigmoid(s.pos - s.neg_job) + neg_log_sigmoid(s.pos - s.neg_cand));
}

// Batch mean of the quadruple loss, or of the pairwise BPR loss when quadruple = false.
inline double main_loss(std::span<const QuadrupleScores> scores, bool quadruple = true) {
  if (scores.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : scores) acc += quadruple ? quadruple_term(s) : bpr_term(s);
  return acc / static_cast<double>(scores.size());
}

inline double joint_loss(double main, double ssl, double lambda) {
  if (!(lambda >= 0.0)) throw InputError("joint_loss: lambda must be >= 0");
  return main + lambda * ssl;
}

// Contrastive negatives: the other users of the mini-batch, or S users sampled
// from the whole side per anchor.
struct SslNegatives {
  enum class Mode { InBatch, Sampled } mode = Mode::InBatch;
  std::uint32_t samples = 0;

  friend bool operator==(const SslNegatives&, const SslNegatives&) = default;
};

// One side's contrastive inputs. pools empty => in-batch (every anchor's pool is
// the anchor list). Otherwise pools[a] lists user indices and contains anchors[a].
struct ContrastiveGroup {
  Side side = Side::Candidate;
  std::vector<std::uint32_t> anchors;
  std::vector<std::vector<std::uint32_t>> pools;
};

struct TrainingBatch {
  std::vector<Quadruple> quadruples;
  ContrastiveGroup candidates{Side::Candidate, {}, {}};
  ContrastiveGroup jobs{Side::Job, {}, {}};
};

template <typename Rng>
ContrastiveGroup make_contrastive_group(Side side, std::vector<std::uint32_t> anchors,
                                        std::uint32_t side_count, const SslNegatives& neg, Rng& rng) {
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  ContrastiveGroup g{side, std::move(anchors), {}};
  if (neg.mode == SslNegatives::Mode::InBatch) return g;
  std::uniform_int_distribution<std::uint32_t> pick(0, side_count - 1);
  const std::uint32_t s = std::min<std::uint32_t>(neg.samples, side_count - 1);
  g.pools.reserve(g.anchors.size());
  for (std::uint32_t a : g.anchors) {
    std::vector<std::uint32_t> pool{a};
    std::unordered_set<std::uint32_t> seen{a};
    while (pool.size() < s + 1u) {
      std::uint32_t u = pick(rng);
      if (seen.insert(u).second) pool.push_back(u);
    }
    g.pools.push_back(std::move(pool));
  }
  return g;
}

template <typename Rng>
TrainingBatch make_training_batch(std::span<const Pair> batch, const MatchIndex& matched,
                                  const SslNegatives& neg, bool with_ssl, Rng& rng) {
  TrainingBatch tb;
  tb.quadruples = sample_quadruples(batch, matched, rng);
  if (with_ssl) {
    std::vector<std::uint32_t> cands, jobs;
    for (Pair p : batch) {
      cands.push_back(p.candidate);
      jobs.push_back(p.job);
    }
    tb.candidates = make_contrastive_group(Side::Candidate, std::move(cands), matched.candidates(), neg, rng);
    tb.jobs = make_contrastive_group(Side::Job, std::move(jobs), matched.jobs(), neg, rng);
  }
  return tb;
}

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

template <typename Scalar>
void add_row(Matrix<Scalar>* G, std::uint32_t node, const Matrix<Scalar>& Z, std::uint32_t src, double scale) {
  if (G) G->row(node) += static_cast<Scalar>(scale) * Z.row(src);
}

inline std::uint32_t active_node(const NodeLayout& L, Side s, std::uint32_t u) {
  return s == Side::Candidate ? L.candidate_active(u) : L.job_active(u);
}
inline std::uint32_t passive_node(const NodeLayout& L, Side s, std::uint32_t u) {
  return s == Side::Candidate ? L.candidate_passive(u) : L.job_passive(u);
}

}  // namespace detail

// Per anchor i: -log( exp(a_i.p_i/tau) / sum_{i' in pool} [exp(a_i.p_i'/tau) + exp(a_i'.p_i/tau)] ),
// summed over anchors. The pool includes i, so every term is >= ln 2.
// Accumulates dLoss/dZ * scale into G when given.
template <typename Scalar>
double ssl_side_loss(const Matrix<Scalar>& Z, const NodeLayout& L, const ContrastiveGroup& g,
                     double tau, Matrix<Scalar>* G = nullptr, double scale = 1.0) {
  if (!(tau > 0.0)) throw InputError("ssl_loss: tau must be > 0");
  const std::size_t B = g.anchors.size();
  if (B == 0) return 0.0;
  const Eigen::Index d = Z.cols();
  double total = 0.0;

  if (g.pools.empty()) {
    Matrix<double> A(B, d), P(B, d);
    for (std::size_t a = 0; a < B; ++a) {
      A.row(a) = Z.row(detail::active_node(L, g.side, g.anchors[a])).template cast<double>();
      P.row(a) = Z.row(detail::passive_node(L, g.side, g.anchors[a])).template cast<double>();
    }
    Matrix<double> S = (A * P.transpose()) / tau;  // S(a,b) = a_a . p_b / tau
    Matrix<double> C = Matrix<double>::Zero(B, B);  // dLoss/dS
    std::vector<double> terms(2 * B);
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t j = 0; j < B; ++j) {
        terms[j] = S(i, j);
        terms[B + j] = S(j, i);
      }
      const double den = detail::log_sum_exp(terms);
      total += den - S(i, i);
      if (G) {
        C(i, i) -= 1.0;
        for (std::size_t j = 0; j < B; ++j) {
          C(i, j) += std::exp(S(i, j) - den);
          C(j, i) += std::exp(S(j, i) - den);
        }
      }
    }
    if (G) {
      Matrix<double> dA = (C * P) * (scale / tau);
      Matrix<double> dP = (C.transpose() * A) * (scale / tau);
      for (std::size_t a = 0; a < B; ++a) {
        G->row(detail::active_node(L, g.side, g.anchors[a])) += dA.row(a).template cast<Scalar>();
        G->row(detail::passive_node(L, g.side, g.anchors[a])) += dP.row(a).template cast<Scalar>();
      }
    }
    return total;
  }

  for (std::size_t a = 0; a < B; ++a) {
    const std::uint32_t i = g.anchors[a];
    const auto& pool = g.pools[a];
    const std::uint32_t ai = detail::active_node(L, g.side, i);
    const std::uint32_t pi = detail::passive_node(L, g.side, i);
    std::vector<double> terms(2 * pool.size());
    for (std::size_t t = 0; t < pool.size(); ++t) {
      terms[t] = row_dot(Z, ai, detail::passive_node(L, g.side, pool[t])) / tau;
      terms[pool.size() + t] = row_dot(Z, detail::active_node(L, g.side, pool[t]), pi) / tau;
    }
    const double den = detail::log_sum_exp(terms);
    total += den - row_dot(Z, ai, pi) / tau;
    if (G) {
      const double c = scale / tau;
      // the positive's numerator: d(-a_i.p_i/tau)
      detail::add_row(G, ai, Z, pi, -c);
      detail::add_row(G, pi, Z, ai, -c);
      for (std::size_t t = 0; t < pool.size(); ++t) {
        const std::uint32_t pt = detail::passive_node(L, g.side, pool[t]);
        const std::uint32_t at = detail::active_node(L, g.side, pool[t]);
        const double w1 = std::exp(terms[t] - den) * c;
        const double w2 = std::exp(terms[pool.size() + t] - den) * c;
        detail::add_row(G, ai, Z, pt, w1);
        detail::add_row(G, pt, Z, ai, w1);
        detail::add_row(G, at, Z, pi, w2);
        detail::add_row(G, pi, Z, at, w2);
      }
    }
  }
  return total;
}

template <typename Scalar>
double ssl_loss(const Matrix<Scalar>& Z, const NodeLayout& L, const TrainingBatch& b, double tau) {
  return ssl_side_loss(Z, L, b.candidates, tau) + ssl_side_loss(Z, L, b.jobs, tau);
}

template <typename Scalar>
QuadrupleScores quadruple_scores(const Matrix<Scalar>& Z, const NodeLayout& L, const Quadruple& q) {
  return {score_pair(Z, L, q.i, q.k).y, score_pair(Z, L, q.i, q.kp).y, score_pair(Z, L, q.ip, q.k).y};
}

struct LossValue {
  double main = 0.0;
  double ssl = 0.0;
  double total = 0.0;
};

// Loss over final representations Z; accumulates dLoss/dZ into G when given.
template <typename Scalar>
LossValue loss_on_representations(const Matrix<Scalar>& Z, const NodeLayout& L, const VariantConfig& v,
                                  const TrainingBatch& b, double tau, Matrix<Scalar>* G) {
  LossValue out;
  const double inv = b.quadruples.empty() ? 0.0 : 1.0 / static_cast<double>(b.quadruples.size());
  // dy(c,j)/dZ: 1/2 z(j^p) on c^a, 1/2 z(c^a) on j^p, 1/2 z(c^p) on j^a, 1/2 z(j^a) on c^p
  auto push_score_grad = [&](std::uint32_t c, std::uint32_t j, double g) {
    if (!G || g == 0.0) return;
    const double h = 0.5 * g;
    detail::add_row(G, L.candidate_active(c), Z, L.job_passive(j), h);
    detail::add_row(G, L.job_passive(j), Z, L.candidate_active(c), h);
    detail::add_row(G, L.job_active(j), Z, L.candidate_passive(c), h);
    detail::add_row(G, L.candidate_passive(c), Z, L.job_active(j), h);
  };
  double main = 0.0;
  for (const auto& q : b.quadruples) {
    const auto s = quadruple_scores(Z, L, q);
    if (v.quadruple_loss) {
      const double x = s.pos - 0.5 * s.neg_job - 0.5 * s.neg_cand;
      main += neg_log_sigmoid(x);
      const double dx = -sigmoid(-x) * inv;
      push_score_grad(q.i, q.k, dx);
      push_score_grad(q.i, q.kp, -0.5 * dx);
      push_score_grad(q.ip, q.k, -0.5 * dx);
    } else {
      const double x1 = s.pos - s.neg_job;
      const double x2 = s.pos - s.neg_cand;
      main += 0.5 * (neg_log_sigmoid(x1) + neg_log_sigmoid(x2));
      const double d1 = -0.5 * sigmoid(-x1) * inv;
      const double d2 = -0.5 * sigmoid(-x2) * inv;
      push_score_grad(q.i, q.k, d1 + d2);
      push_score_grad(q.i, q.kp, -d1);
      push_score_grad(q.ip, q.k, -d2);
    }
  }
  out.main = main * inv;
  if (v.ssl_weight > 0.0) {
    out.ssl = ssl_side_loss(Z, L, b.candidates, tau, G, v.ssl_weight) +
              ssl_side_loss(Z, L, b.jobs, tau, G, v.ssl_weight);
  }
  out.total = joint_loss(out.main, out.ssl, v.ssl_weight);
  return out;
}

template <typename Scalar>
struct Gradients {
  Matrix<Scalar> E;
  std::vector<Matrix<Scalar>> W;
};

// Chain rule from dL/dZ back to E and W: dZ0 = P dZ with P the (symmetric)
// layer-averaging operator; the first d_e columns are dE, the last d_t columns
// contract with the frozen document rows into dW.
template <typename Scalar>
Gradients<Scalar> backprop_to_params(const ModelParams<Scalar>& p, const HybridOperator<Scalar>& op,
                                     const Matrix<Scalar>& dZ, std::uint32_t layers) {
  Matrix<Scalar> dZ0 = layer_average(op, dZ, layers);
  Gradients<Scalar> g;
  g.E = dZ0.leftCols(p.dims.d_e);
  g.W.assign(p.W.size(), Matrix<Scalar>::Zero(p.dims.d_t, p.dims.d_o));
  if (p.shared_projection()) {
    g.W[0].noalias() = dZ0.rightCols(p.dims.d_t).transpose() * p.T;
  } else {
    for (Eigen::Index r = 0; r < dZ0.rows(); ++r) {
      auto& gw = g.W[p.projection_index(static_cast<std::uint32_t>(r))];
      gw.noalias() += dZ0.row(r).tail(p.dims.d_t).transpose() * p.T.row(r);
    }
  }
  if (!g.E.allFinite()) throw NumericError("non-finite gradient in preference embeddings E");
  for (const auto& w : g.W) {
    if (!w.allFinite()) throw NumericError("non-finite gradient in projection W");
  }
  return g;
}

// Full forward pass from parameters; fills grads when non-null.
template <typename Scalar>
LossValue forward_backward(const ModelParams<Scalar>& p, const HybridOperator<Scalar>& op,
                           const VariantConfig& v, const TrainingBatch& b, double tau,
                           Gradients<Scalar>* grads) {
  Matrix<Scalar> Z = layer_average(op, node_init(p), v.layers);
  if (!grads) return loss_on_representations<Scalar>(Z, p.layout, v, b, tau, nullptr);
  Matrix<Scalar> dZ = Matrix<Scalar>::Zero(Z.rows(), Z.cols());
  LossValue lv = loss_on_representations(Z, p.layout, v, b, tau, &dZ);
  *grads = backprop_to_params(p, op, dZ, v.layers);
  return lv;
}

// ---------------------------------------------------------------------------
// Adam (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected)

template <typename Scalar>
struct AdamState {
  Matrix<Scalar> mE, vE;
  std::vector<Matrix<Scalar>> mW, vW;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ModelParams<Scalar>& p) {
    AdamState s;
    s.mE = Matrix<Scalar>::Zero(p.E.rows(), p.E.cols());
    s.vE = s.mE;
    for (const auto& w : p.W) {
      s.mW.push_back(Matrix<Scalar>::Zero(w.rows(), w.cols()));
      s.vW.push_back(Matrix<Scalar>::Zero(w.rows(), w.cols()));
    }
    return s;
  }
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

namespace detail {

template <typename Scalar>
void adam_update(Matrix<Scalar>& param, const Matrix<Scalar>& grad, Matrix<Scalar>& m, Matrix<Scalar>& v,
                 const AdamHyper& h, double bc1, double bc2) {
  const auto total = param.size();
  Scalar* x = param.data();
  const Scalar* g = grad.data();
  Scalar* mm = m.data();
  Scalar* vv = v.data();
  for (Eigen::Index t = 0; t < total; ++t) {
    const double gi = static_cast<double>(g[t]);
    const double mi = h.beta1 * static_cast<double>(mm[t]) + (1.0 - h.beta1) * gi;
    const double vi = h.beta2 * static_cast<double>(vv[t]) + (1.0 - h.beta2) * gi * gi;
    mm[t] = static_cast<Scalar>(mi);
    vv[t] = static_cast<Scalar>(vi);
    const double mhat = mi / bc1;
    const double vhat = vi / bc2;
    x[t] = static_cast<Scalar>(static_cast<double>(x[t]) - h.lr * mhat / (std::sqrt(vhat) + h.eps));
  }
}

}  // namespace detail

// Increments state.step, then applies one bias-corrected Adam update.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& p, const Gradients<Scalar>& g, AdamState<Scalar>& s, const AdamHyper& h) {
  ++s.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.step));
  detail::adam_update(p.E, g.E, s.mE, s.vE, h, bc1, bc2);
  for (std::size_t w = 0; w < p.W.size(); ++w) detail::adam_update(p.W[w], g.W[w], s.mW[w], s.vW[w], h, bc1, bc2);
}

}  // namespace dpgnn
