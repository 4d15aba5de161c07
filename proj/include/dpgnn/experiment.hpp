#pragma once

// Dataset loading, training, checkpoint evaluation and parameter sweeps driven by a RunConfig.

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "dpgnn/checkpoint.hpp"
#include "dpgnn/config.hpp"
#include "dpgnn/corpus.hpp"
#include "dpgnn/eval.hpp"
#include "dpgnn/trainer.hpp"

namespace dpgnn {

struct LoadedData {
  SplitDataset split;
  DocEmbeddingTable candidate_docs;
  DocEmbeddingTable job_docs;
};

inline LoadedData load_dataset(const RunConfig& cfg) {
  const EventLog log = load_events(cfg.events_path());
  LoadedData d;
  d.candidate_docs = load_doc_embeddings(cfg.candidate_docs_path(), Side::Candidate, log.n, cfg.missing_docs);
  d.job_docs = load_doc_embeddings(cfg.job_docs_path(), Side::Job, log.m, cfg.missing_docs);
  if (d.candidate_docs.dim != d.job_docs.dim) {
    throw InputError("document dims differ: " + cfg.candidate_docs_path().string() + " has " +
                     std::to_string(d.candidate_docs.dim) + ", " + cfg.job_docs_path().string() + " has " +
                     std::to_string(d.job_docs.dim));
  }
  d.split = temporal_split(log, cfg.t_valid, cfg.t_test);
  return d;
}

inline TrainResult run_training(const RunConfig& cfg, const LoadedData& d, std::ostream* progress = nullptr) {
  cfg.validate();
  const VariantConfig v = cfg.effective_variant();
  if (cfg.precision == Precision::F32) return train<float>(d.split, d.candidate_docs, d.job_docs, cfg.train, v, progress);
  return train<double>(d.split, d.candidate_docs, d.job_docs, cfg.train, v, progress);
}

namespace experiment_detail {

template <typename Scalar>
RankingReport evaluate_as(const Checkpoint& c, const LoadedData& d, std::span<const EvalInstance> instances,
                          std::size_t k, bool groups) {
  const DualGraph g = build_variant_graph(d.split.train, d.split.n, d.split.m, c.variant);
  ModelParams<Scalar> p =
      params_from_checkpoint<Scalar>(c, build_doc_matrix<Scalar>(c.layout, d.candidate_docs, d.job_docs));
  const Matrix<Scalar> Z = propagate(p, g, c.variant).Z;
  const auto metrics = score_instances(Z, c.layout, instances, k);
  RankingReport r = aggregate(instances, metrics, k);
  if (groups) {
    r.candidate_groups = sparsity_breakdown(instances, metrics, Side::Candidate,
                                            interaction_counts(d.split.train, Side::Candidate, d.split.n));
    r.job_groups = sparsity_breakdown(instances, metrics, Side::Job, interaction_counts(d.split.train, Side::Job, d.split.m));
  }
  return r;
}

}  // namespace experiment_detail

// Ranks the chosen split's positives against frozen negatives drawn with eval_seed.
inline RankingReport evaluate_checkpoint(const RunConfig& cfg, const LoadedData& d, const Checkpoint& c,
                                         bool sparsity_groups = false) {
  cfg.validate();
  const NodeLayout expected{d.split.n, d.split.m, cfg.effective_variant().dual_graph};
  check_compatible(c, expected, d.candidate_docs.dim);
  const auto& positives = cfg.eval_split == "valid" ? d.split.valid.match : d.split.test.match;
  if (positives.empty()) throw InputError("eval: the " + cfg.eval_split + " split has no matched pairs");
  const auto all = d.split.all_matches();
  const MatchIndex matched(d.split.n, d.split.m, all);
  const auto instances = build_eval_instances(positives, matched, cfg.train.eval_seed, cfg.train.eval_negatives);
  if (cfg.precision == Precision::F32) {
    return experiment_detail::evaluate_as<float>(c, d, instances, cfg.train.k, sparsity_groups);
  }
  return experiment_detail::evaluate_as<double>(c, d, instances, cfg.train.k, sparsity_groups);
}

inline PairScores score_checkpoint_pair(const Checkpoint& c, const LoadedData& d, std::uint32_t candidate,
                                        std::uint32_t job) {
  if (candidate >= d.split.n) {
    throw InputError("score-pair: candidate " + std::to_string(candidate) + " out of range (n=" +
                     std::to_string(d.split.n) + ")");
  }
  if (job >= d.split.m) {
    throw InputError("score-pair: job " + std::to_string(job) + " out of range (m=" + std::to_string(d.split.m) + ")");
  }
  check_compatible(c, NodeLayout{d.split.n, d.split.m, c.layout.dual}, d.candidate_docs.dim);
  const DualGraph g = build_variant_graph(d.split.train, d.split.n, d.split.m, c.variant);
  auto p = params_from_checkpoint<double>(c, build_doc_matrix<double>(c.layout, d.candidate_docs, d.job_docs));
  return score_pair(propagate(p, g, c.variant).Z, c.layout, candidate, job);
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { Layers, Tau, Lambda, Omega };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "layers") return SweepAxis::Layers;
  if (s == "tau") return SweepAxis::Tau;
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "omega") return SweepAxis::Omega;
  throw InputError("sweep: unknown axis '" + s + "' (layers|tau|lambda|omega)");
}

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Layers: return "layers";
    case SweepAxis::Tau: return "tau";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Omega: return "omega";
  }
  return "?";
}

inline const std::vector<double>& default_grid(const RunConfig& cfg, SweepAxis a) {
  switch (a) {
    case SweepAxis::Layers: return cfg.sweep_layers;
    case SweepAxis::Tau: return cfg.sweep_tau;
    case SweepAxis::Lambda: return cfg.sweep_lambda;
    case SweepAxis::Omega: return cfg.sweep_omega;
  }
  return cfg.sweep_layers;
}

// Drops repeated values (first occurrence kept) and reports each one.
inline std::vector<double> dedupe_grid(const std::vector<double>& grid, std::ostream* warn) {
  std::vector<double> out;
  for (double v : grid) {
    if (std::find(out.begin(), out.end(), v) != out.end()) {
      if (warn) *warn << "warning: duplicate sweep value " << config_detail::fmt(v) << " ignored\n";
      continue;
    }
    out.push_back(v);
  }
  return out;
}

inline RunConfig with_axis_value(RunConfig cfg, SweepAxis a, double v) {
  switch (a) {
    case SweepAxis::Layers:
      if (v < 0 || v != static_cast<double>(static_cast<std::uint32_t>(v))) {
        throw InputError("sweep: layers values must be non-negative integers");
      }
      cfg.variant.layers = static_cast<std::uint32_t>(v);
      break;
    case SweepAxis::Tau: cfg.train.tau = v; break;
    case SweepAxis::Lambda: cfg.variant.ssl_weight = v; break;
    case SweepAxis::Omega: cfg.variant.omega = v; break;
  }
  cfg.validate();
  return cfg;
}

struct SweepRow {
  double value = 0.0;
  std::uint32_t best_epoch = 0;
  double val_mrr = 0.0;
  RankingReport report;
};

// One training run per grid value with identical seeds; each run's best checkpoint
// is evaluated on cfg.eval_split.
inline std::vector<SweepRow> sweep(const RunConfig& cfg, const LoadedData& d, SweepAxis axis,
                                   const std::vector<double>& grid, std::ostream* log = nullptr) {
  if (grid.empty()) throw InputError("sweep: empty grid");
  const auto values = dedupe_grid(grid, log);
  std::vector<RunConfig> runs;
  for (double v : values) runs.push_back(with_axis_value(cfg, axis, v));
  std::vector<SweepRow> rows;
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (log) *log << to_string(axis) << " = " << config_detail::fmt(values[t]) << "\n";
    TrainResult r = run_training(runs[t], d, nullptr);
    SweepRow row;
    row.value = values[t];
    row.best_epoch = r.checkpoint.epoch;
    row.val_mrr = r.checkpoint.best_metric;
    row.report = evaluate_checkpoint(runs[t], d, r.checkpoint);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_tsv(std::ostream& os, SweepAxis axis, const std::vector<SweepRow>& rows,
                            std::span<const std::string> header_comments = {}) {
  for (const auto& c : header_comments) os << "# " << c << '\n';
  const std::string k = rows.empty() ? "5" : std::to_string(rows.front().report.k);
  os << to_string(axis) << "\tbest_epoch\tval_mrr\tcand_recall@" << k << "\tcand_ndcg@" << k
     << "\tcand_mrr\tjob_recall@" << k << "\tjob_ndcg@" << k << "\tjob_mrr\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%u\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n",
                  config_detail::fmt(r.value).c_str(), r.best_epoch, r.val_mrr, r.report.candidate.recall,
                  r.report.candidate.ndcg, r.report.candidate.mrr, r.report.job.recall, r.report.job.ndcg,
                  r.report.job.mrr);
    os << buf;
  }
}

}  // namespace dpgnn
