#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dpgnn/corpus.hpp"
#include "dpgnn/dpgraph.hpp"
#include "dpgnn/error.hpp"
#include "dpgnn/linalg.hpp"

namespace dpgnn {

struct ModelDims {
  std::uint32_t d_e = 128;  // preference embedding
  std::uint32_t d_t = 32;   // projected document part
  std::uint32_t d_o = 0;    // raw document dimension (from the embedding files)

  std::uint32_t d() const { return d_e + d_t; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Structural switches behind the ablations plus the propagation hyper-parameters.
struct VariantConfig {
  bool dual_graph = true;      // false: one node per user ("no-dpg")
  bool quadruple_loss = true;  // false: pairwise BPR ("no-ql")
  double ssl_weight = 0.05;    // lambda; 0 disables the contrastive term ("no-ssl")
  double omega = 1.0;
  std::uint32_t layers = 3;
  SelfEdgeMode self_edges = SelfEdgeMode::AsMatch;

  void validate() const {
    if (!(ssl_weight >= 0.0) || !std::isfinite(ssl_weight)) throw InputError("lambda must be >= 0");
    if (!(omega >= 0.0) || !std::isfinite(omega)) throw InputError("omega must be >= 0");
  }

  friend bool operator==(const VariantConfig&, const VariantConfig&) = default;
};

// Applies a named ablation on top of a base configuration.
inline VariantConfig apply_variant(VariantConfig v, std::string_view name) {
  if (name == "full") return v;
  if (name == "no-dpg") v.dual_graph = false;
  else if (name == "no-ql") v.quadruple_loss = false;
  else if (name == "no-ssl") v.ssl_weight = 0.0;
  else throw InputError("unknown variant '" + std::string(name) + "' (full|no-dpg|no-ql|no-ssl)");
  return v;
}

inline DualGraph build_variant_graph(const InteractionSets& train, std::uint32_t n, std::uint32_t m,
                                     const VariantConfig& v) {
  return v.dual_graph ? build_graph(train, n, m, v.self_edges) : build_single_graph(train, n, m);
}

// Learnable E and W plus the frozen document rows T. Both nodes of a user share
// that user's T row. W holds one matrix (shared) or two (candidate, job).
template <typename Scalar>
struct ModelParams {
  NodeLayout layout;
  ModelDims dims;
  Matrix<Scalar> E;               // node_count x d_e
  std::vector<Matrix<Scalar>> W;  // each d_t x d_o
  Matrix<Scalar> T;               // node_count x d_o, frozen

  bool shared_projection() const { return W.size() == 1; }
  std::size_t projection_index(std::uint32_t node) const {
    return shared_projection() ? 0 : (layout.owner(node).side == Side::Job ? 1 : 0);
  }
};

template <typename Scalar>
Matrix<Scalar> build_doc_matrix(const NodeLayout& layout, const DocEmbeddingTable& candidates,
                                const DocEmbeddingTable& jobs) {
  if (candidates.count() != layout.n || jobs.count() != layout.m) {
    throw InputError("document tables do not match user counts");
  }
  if (candidates.dim != jobs.dim) throw InputError("candidate and job document dims differ");
  Matrix<Scalar> T(layout.node_count(), candidates.dim);
  for (std::uint32_t node = 0; node < layout.node_count(); ++node) {
    UserRef u = layout.owner(node);
    auto row = (u.side == Side::Candidate ? candidates : jobs).row(u.index);
    for (std::uint32_t c = 0; c < candidates.dim; ++c) T(node, c) = static_cast<Scalar>(row[c]);
  }
  return T;
}

// Xavier-uniform E (fan_in = fan_out = d_e) and W (fans d_t, d_o).
template <typename Scalar>
ModelParams<Scalar> init_params(std::uint64_t seed, const NodeLayout& layout, ModelDims dims,
                                Matrix<Scalar> T, bool shared_projection = true) {
  if (dims.d_e == 0 || dims.d_t == 0) throw InputError("d_e and d_t must be > 0");
  if (T.rows() != static_cast<Eigen::Index>(layout.node_count())) {
    throw InputError("document matrix rows != node count");
  }
  dims.d_o = static_cast<std::uint32_t>(T.cols());
  if (dims.d_o == 0) throw InputError("document dimension must be > 0");
  ModelParams<Scalar> p;
  p.layout = layout;
  p.dims = dims;
  p.T = std::move(T);
  std::mt19937_64 rng(seed);
  const double e_bound = std::sqrt(6.0 / (2.0 * dims.d_e));
  std::uniform_real_distribution<double> ue(-e_bound, e_bound);
  p.E.resize(layout.node_count(), dims.d_e);
  for (Eigen::Index r = 0; r < p.E.rows(); ++r)
    for (Eigen::Index c = 0; c < p.E.cols(); ++c) p.E(r, c) = static_cast<Scalar>(ue(rng));
  const double w_bound = std::sqrt(6.0 / (dims.d_t + dims.d_o));
  std::uniform_real_distribution<double> uw(-w_bound, w_bound);
  p.W.resize(shared_projection ? 1 : 2);
  for (auto& w : p.W) {
    w.resize(dims.d_t, dims.d_o);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(uw(rng));
  }
  return p;
}

// Row n = [E[n] ; W * T[n]].
template <typename Scalar>
Matrix<Scalar> node_init(const ModelParams<Scalar>& p) {
  const auto nodes = static_cast<Eigen::Index>(p.layout.node_count());
  if (p.E.rows() != nodes || p.E.cols() != p.dims.d_e || p.T.rows() != nodes ||
      p.T.cols() != p.dims.d_o) {
    throw InputError("node_init: parameter shapes disagree with layout/dims");
  }
  for (const auto& w : p.W) {
    if (w.rows() != p.dims.d_t || w.cols() != p.dims.d_o) throw InputError("node_init: W shape mismatch");
  }
  Matrix<Scalar> Z0(nodes, p.dims.d());
  Z0.leftCols(p.dims.d_e) = p.E;
  if (p.shared_projection()) {
    Z0.rightCols(p.dims.d_t).noalias() = p.T * p.W[0].transpose();
  } else {
    for (Eigen::Index r = 0; r < nodes; ++r) {
      const auto& w = p.W[p.projection_index(static_cast<std::uint32_t>(r))];
      Z0.row(r).tail(p.dims.d_t).noalias() = p.T.row(r) * w.transpose();
    }
  }
  return Z0;
}

// (1/(L+1)) * sum_{l=0..L} A^l X. A is symmetric, so this also maps dL/dZ to dL/dZ0.
template <typename Scalar>
Matrix<Scalar> layer_average(const HybridOperator<Scalar>& op, const Matrix<Scalar>& X,
                             std::uint32_t layers, std::vector<Matrix<Scalar>>* keep = nullptr) {
  Matrix<Scalar> acc = X;
  Matrix<Scalar> cur = X;
  Matrix<Scalar> next;
  if (keep) keep->assign(1, X);
  for (std::uint32_t l = 1; l <= layers; ++l) {
    op.apply(cur, next);
    if (!next.allFinite()) {
      throw NumericError("propagation diverged: non-finite values at layer " + std::to_string(l));
    }
    acc += next;
    cur.swap(next);
    if (keep) keep->push_back(cur);
  }
  if (layers > 0) acc *= static_cast<Scalar>(1.0 / (layers + 1.0));
  return acc;
}

template <typename Scalar>
struct PropagatedState {
  std::vector<Matrix<Scalar>> layers;  // Z^(0) .. Z^(L)
  Matrix<Scalar> Z;                    // layer average
};

template <typename Scalar>
PropagatedState<Scalar> propagate(const ModelParams<Scalar>& p, const DualGraph& g,
                                  const VariantConfig& v) {
  if (g.layout() != p.layout) throw InputError("propagate: graph and parameters disagree on layout");
  HybridOperator<Scalar> op(g, v.omega);
  PropagatedState<Scalar> st;
  Matrix<Scalar> Z0 = node_init(p);
  if (!Z0.allFinite()) throw NumericError("propagation diverged: non-finite initial representations");
  st.Z = layer_average(op, Z0, v.layers, &st.layers);
  return st;
}

struct PairScores {
  double r = 0.0;  // candidate -> job intention
  double s = 0.0;  // job -> candidate intention
  double y = 0.0;  // matching score
};

template <typename Scalar>
double row_dot(const Matrix<Scalar>& Z, std::uint32_t a, std::uint32_t b) {
  double acc = 0.0;
  const Scalar* x = Z.row(a).data();
  const Scalar* y = Z.row(b).data();
  for (Eigen::Index c = 0; c < Z.cols(); ++c) acc += static_cast<double>(x[c]) * static_cast<double>(y[c]);
  return acc;
}

// r = z(c^a).z(j^p), s = z(j^a).z(c^p), y = (r + s) / 2. In the single layout
// active and passive nodes coincide, so r = s = y.
template <typename Scalar>
PairScores score_pair(const Matrix<Scalar>& Z, const NodeLayout& L, std::uint32_t i, std::uint32_t k) {
  if (i >= L.n || k >= L.m) throw InputError("score_pair: index out of range");
  PairScores out;
  out.r = row_dot(Z, L.candidate_active(i), L.job_passive(k));
  out.s = row_dot(Z, L.job_active(k), L.candidate_passive(i));
  out.y = 0.5 * out.r + 0.5 * out.s;
  return out;
}

}  // namespace dpgnn
