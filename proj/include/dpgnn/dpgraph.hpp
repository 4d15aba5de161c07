#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dpgnn/corpus.hpp"
#include "dpgnn/error.hpp"
#include "dpgnn/linalg.hpp"

namespace dpgnn {

// Flat node numbering. With two nodes per user (dual layout):
//   candidate active i, candidate passive n+i, job active 2n+k, job passive 2n+m+k.
// The single layout (one node per user) maps candidate i -> i and job k -> n+k,
// so active and passive lookups coincide.
struct NodeLayout {
  std::uint32_t n = 0;
  std::uint32_t m = 0;
  bool dual = true;

  std::uint32_t node_count() const { return dual ? 2 * (n + m) : n + m; }
  std::uint32_t candidate_active(std::uint32_t i) const { return i; }
  std::uint32_t candidate_passive(std::uint32_t i) const { return dual ? n + i : i; }
  std::uint32_t job_active(std::uint32_t k) const { return dual ? 2 * n + k : n + k; }
  std::uint32_t job_passive(std::uint32_t k) const { return dual ? 2 * n + m + k : n + k; }

  // Owner of a node: the user whose document row it shares.
  UserRef owner(std::uint32_t node) const {
    if (dual) {
      if (node < n) return {Side::Candidate, node};
      if (node < 2 * n) return {Side::Candidate, node - n};
      if (node < 2 * n + m) return {Side::Job, node - 2 * n};
      return {Side::Job, node - 2 * n - m};
    }
    if (node < n) return {Side::Candidate, node};
    return {Side::Job, node - n};
  }

  friend bool operator==(const NodeLayout&, const NodeLayout&) = default;
};

// Enum order doubles as dedupe priority: a MatchEdge wins over a UniEdge on the same node pair.
enum class EdgeClass : std::uint8_t { Match = 0, Uni = 1, SelfAssoc = 2 };
inline constexpr std::array<EdgeClass, 3> kEdgeClasses = {EdgeClass::Match, EdgeClass::Uni,
                                                          EdgeClass::SelfAssoc};

constexpr std::string_view to_string(EdgeClass c) {
  switch (c) {
    case EdgeClass::Match: return "match";
    case EdgeClass::Uni: return "uni";
    case EdgeClass::SelfAssoc: return "self";
  }
  return "?";
}

enum class SelfEdgeMode : std::uint8_t { AsMatch, AsUni, Off };

constexpr std::string_view to_string(SelfEdgeMode m) {
  switch (m) {
    case SelfEdgeMode::AsMatch: return "as_match";
    case SelfEdgeMode::AsUni: return "as_uni";
    case SelfEdgeMode::Off: return "off";
  }
  return "?";
}

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  EdgeClass cls = EdgeClass::Match;
};

// Symmetric CSR for one edge class: every undirected edge appears as two arcs.
struct ClassAdjacency {
  std::vector<std::uint32_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> coeff;  // 1/sqrt(|N_row| |N_col|)

  std::size_t arc_count() const { return col.size(); }
};

class DualGraph {
 public:
  DualGraph() = default;

  // Deduplicates node pairs (lowest EdgeClass wins) and precomputes coefficients.
  DualGraph(NodeLayout layout, SelfEdgeMode self_mode, std::vector<Edge> edges)
      : layout_(layout), self_mode_(self_mode) {
    const std::uint32_t nodes = layout.node_count();
    for (auto& e : edges) {
      if (e.a >= nodes || e.b >= nodes) throw InputError("graph edge references unknown node");
      if (e.a == e.b) throw InputError("graph edge is a self loop");
      if (e.a > e.b) std::swap(e.a, e.b);
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
      if (x.a != y.a) return x.a < y.a;
      if (x.b != y.b) return x.b < y.b;
      return x.cls < y.cls;
    });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const Edge& x, const Edge& y) { return x.a == y.a && x.b == y.b; }),
                edges.end());
    edges_ = std::move(edges);

    degree_.assign(nodes, 0);
    for (const auto& e : edges_) {
      ++degree_[e.a];
      ++degree_[e.b];
    }
    for (EdgeClass c : kEdgeClasses) {
      auto& adj = adjacency_[static_cast<int>(c)];
      adj.row_ptr.assign(nodes + 1, 0);
      for (const auto& e : edges_) {
        if (e.cls != c) continue;
        ++adj.row_ptr[e.a + 1];
        ++adj.row_ptr[e.b + 1];
      }
      for (std::uint32_t i = 0; i < nodes; ++i) adj.row_ptr[i + 1] += adj.row_ptr[i];
      adj.col.resize(adj.row_ptr[nodes]);
      adj.coeff.resize(adj.row_ptr[nodes]);
      std::vector<std::uint32_t> fill(adj.row_ptr.begin(), adj.row_ptr.end() - 1);
      for (const auto& e : edges_) {
        if (e.cls != c) continue;
        const double w = coefficient(e.a, e.b);
        adj.col[fill[e.a]] = e.b;
        adj.coeff[fill[e.a]++] = w;
        adj.col[fill[e.b]] = e.a;
        adj.coeff[fill[e.b]++] = w;
      }
    }
  }

  const NodeLayout& layout() const { return layout_; }
  SelfEdgeMode self_mode() const { return self_mode_; }
  std::uint32_t node_count() const { return layout_.node_count(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::uint32_t>& degrees() const { return degree_; }
  const ClassAdjacency& adjacency(EdgeClass c) const { return adjacency_[static_cast<int>(c)]; }

  std::size_t edge_count() const { return edges_.size(); }
  std::size_t edge_count(EdgeClass c) const { return adjacency(c).arc_count() / 2; }

  // Edge weight in the propagation operator for the configured self-edge mode.
  double propagation_weight(EdgeClass c, double omega) const {
    switch (c) {
      case EdgeClass::Match: return 1.0;
      case EdgeClass::Uni: return omega;
      case EdgeClass::SelfAssoc:
        return self_mode_ == SelfEdgeMode::AsUni ? omega : (self_mode_ == SelfEdgeMode::AsMatch ? 1.0 : 0.0);
    }
    return 0.0;
  }

  // Edges feeding the match-weighted (true) or omega-weighted (false) term.
  std::size_t term_edge_count(bool match_term) const {
    std::size_t count = edge_count(match_term ? EdgeClass::Match : EdgeClass::Uni);
    if (self_mode_ == (match_term ? SelfEdgeMode::AsMatch : SelfEdgeMode::AsUni)) {
      count += edge_count(EdgeClass::SelfAssoc);
    }
    return count;
  }

  double coefficient(std::uint32_t a, std::uint32_t b) const {
    return 1.0 / std::sqrt(static_cast<double>(degree_[a]) * static_cast<double>(degree_[b]));
  }

 private:
  NodeLayout layout_;
  SelfEdgeMode self_mode_ = SelfEdgeMode::AsMatch;
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> degree_;
  std::array<ClassAdjacency, 3> adjacency_;
};

// Dual-perspective graph from a reconciled training split:
//   apply (c,j)    -> UniEdge   (c^a, j^p)
//   reachout (j,c) -> UniEdge   (j^a, c^p)
//   match (c,j)    -> MatchEdge (c^a, j^p) and (j^a, c^p)
//   every user     -> SelfAssocEdge (x^a, x^p) unless mode Off
inline DualGraph build_graph(const InteractionSets& train, std::uint32_t n, std::uint32_t m,
                             SelfEdgeMode self_mode) {
  NodeLayout L{n, m, true};
  std::vector<Edge> edges;
  edges.reserve(train.apply.size() + train.reach_out.size() + 2 * train.match.size() +
                (self_mode == SelfEdgeMode::Off ? 0 : n + m));
  auto check = [&](Pair p) {
    if (p.candidate >= n || p.job >= m) throw InputError("build_graph: pair out of range");
  };
  for (Pair p : train.apply) {
    check(p);
    edges.push_back({L.candidate_active(p.candidate), L.job_passive(p.job), EdgeClass::Uni});
  }
  for (Pair p : train.reach_out) {
    check(p);
    edges.push_back({L.job_active(p.job), L.candidate_passive(p.candidate), EdgeClass::Uni});
  }
  for (Pair p : train.match) {
    check(p);
    edges.push_back({L.candidate_active(p.candidate), L.job_passive(p.job), EdgeClass::Match});
    edges.push_back({L.job_active(p.job), L.candidate_passive(p.candidate), EdgeClass::Match});
  }
  if (self_mode != SelfEdgeMode::Off) {
    for (std::uint32_t i = 0; i < n; ++i) {
      edges.push_back({L.candidate_active(i), L.candidate_passive(i), EdgeClass::SelfAssoc});
    }
    for (std::uint32_t k = 0; k < m; ++k) {
      edges.push_back({L.job_active(k), L.job_passive(k), EdgeClass::SelfAssoc});
    }
  }
  return DualGraph(L, self_mode, std::move(edges));
}

// Conventional bipartite graph, one node per user: every training pair becomes
// one undirected edge (match class if matched, unidirectional otherwise).
inline DualGraph build_single_graph(const InteractionSets& train, std::uint32_t n, std::uint32_t m) {
  NodeLayout L{n, m, false};
  std::vector<Edge> edges;
  auto add = [&](Pair p, EdgeClass c) {
    if (p.candidate >= n || p.job >= m) throw InputError("build_graph: pair out of range");
    edges.push_back({L.candidate_active(p.candidate), L.job_active(p.job), c});
  };
  for (Pair p : train.apply) add(p, EdgeClass::Uni);
  for (Pair p : train.reach_out) add(p, EdgeClass::Uni);
  for (Pair p : train.match) add(p, EdgeClass::Match);
  return DualGraph(L, SelfEdgeMode::Off, std::move(edges));
}

// Y[r] = sum over class-c neighbours u of coeff(r,u) * X[u].
template <typename Scalar>
Matrix<Scalar> class_adjacency_apply(const DualGraph& g, EdgeClass c, const Matrix<Scalar>& X) {
  if (X.rows() != static_cast<Eigen::Index>(g.node_count())) {
    throw InputError("class_adjacency_apply: row count " + std::to_string(X.rows()) +
                     " != node count " + std::to_string(g.node_count()));
  }
  const auto& adj = g.adjacency(c);
  Matrix<Scalar> Y = Matrix<Scalar>::Zero(X.rows(), X.cols());
  for (std::uint32_t r = 0; r < g.node_count(); ++r) {
    for (std::uint32_t a = adj.row_ptr[r]; a < adj.row_ptr[r + 1]; ++a) {
      Y.row(r) += static_cast<Scalar>(adj.coeff[a]) * X.row(adj.col[a]);
    }
  }
  return Y;
}

// The combined symmetric operator A_match + omega * A_uni (+ self term), fused
// into one CSR so each propagation layer is a single sparse pass.
template <typename Scalar>
class HybridOperator {
 public:
  HybridOperator(const DualGraph& g, double omega) : rows_(g.node_count()) {
    row_ptr_.assign(rows_ + 1, 0);
    std::array<double, 3> weight{};
    for (EdgeClass c : kEdgeClasses) weight[static_cast<int>(c)] = g.propagation_weight(c, omega);
    for (std::uint32_t r = 0; r < rows_; ++r) {
      for (EdgeClass c : kEdgeClasses) {
        if (weight[static_cast<int>(c)] == 0.0) continue;
        const auto& adj = g.adjacency(c);
        row_ptr_[r + 1] += adj.row_ptr[r + 1] - adj.row_ptr[r];
      }
      row_ptr_[r + 1] += row_ptr_[r];
    }
    col_.reserve(row_ptr_[rows_]);
    val_.reserve(row_ptr_[rows_]);
    for (std::uint32_t r = 0; r < rows_; ++r) {
      for (EdgeClass c : kEdgeClasses) {
        const double w = weight[static_cast<int>(c)];
        if (w == 0.0) continue;
        const auto& adj = g.adjacency(c);
        for (std::uint32_t a = adj.row_ptr[r]; a < adj.row_ptr[r + 1]; ++a) {
          col_.push_back(adj.col[a]);
          val_.push_back(static_cast<Scalar>(w * adj.coeff[a]));
        }
      }
    }
  }

  std::uint32_t rows() const { return rows_; }

  void apply(const Matrix<Scalar>& X, Matrix<Scalar>& Y) const {
    Y.setZero(X.rows(), X.cols());
    for (std::uint32_t r = 0; r < rows_; ++r) {
      auto yr = Y.row(r);
      for (std::uint32_t a = row_ptr_[r]; a < row_ptr_[r + 1]; ++a) {
        yr.noalias() += val_[a] * X.row(col_[a]);
      }
    }
  }

  Matrix<Scalar> apply(const Matrix<Scalar>& X) const {
    Matrix<Scalar> Y;
    apply(X, Y);
    return Y;
  }

 private:
  std::uint32_t rows_ = 0;
  std::vector<std::uint32_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<Scalar> val_;
};

inline std::string graph_summary(const DualGraph& g) {
  std::ostringstream os;
  os << "nodes\t" << g.node_count() << "\n";
  os << "layout\t" << (g.layout().dual ? "dual" : "single") << "\n";
  os << "self_edges\t" << to_string(g.self_mode()) << "\n";
  for (EdgeClass c : kEdgeClasses) os << "edges." << to_string(c) << "\t" << g.edge_count(c) << "\n";
  std::map<std::uint32_t, std::size_t> hist;
  for (auto d : g.degrees()) ++hist[d];
  os << "degree\tnodes\n";
  for (auto [d, count] : hist) os << d << "\t" << count << "\n";
  return os.str();
}

inline void dump_edges(std::ostream& os, const DualGraph& g) {
  os << "src\tdst\tclass\tcoeff\n";
  char buf[32];
  for (const auto& e : g.edges()) {
    std::snprintf(buf, sizeof buf, "%.17g", g.coefficient(e.a, e.b));
    os << e.a << '\t' << e.b << '\t' << to_string(e.cls) << '\t' << buf << '\n';
  }
}

}  // namespace dpgnn
