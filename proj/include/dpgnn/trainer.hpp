#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dpgnn/checkpoint.hpp"
#include "dpgnn/corpus.hpp"
#include "dpgnn/dpgraph.hpp"
#include "dpgnn/eval.hpp"
#include "dpgnn/model.hpp"
#include "dpgnn/optim.hpp"

namespace dpgnn {

enum class PropagateEvery : std::uint8_t { Batch, Epoch };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::uint32_t batch_size = 512;
  std::uint32_t max_epochs = 100;
  std::uint32_t patience = 10;
  double tau = 0.2;
  std::uint64_t seed = 2023;
  PropagateEvery propagate_every = PropagateEvery::Batch;
  SslNegatives ssl_negatives;
  std::uint32_t d_e = 128;
  std::uint32_t d_t = 32;
  bool shared_projection = true;
  bool early_stopping = true;
  std::uint32_t eval_negatives = 20;
  std::uint64_t eval_seed = 1;
  std::uint32_t k = 5;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be > 0");
    if (!(tau > 0.0)) throw InputError("tau must be > 0");
    if (patience < 1) throw InputError("patience must be >= 1");
    if (batch_size < 1) throw InputError("batch_size must be >= 1");
    if (d_e == 0 || d_t == 0) throw InputError("d_e and d_t must be > 0");
    if (k == 0) throw InputError("k must be > 0");
    if (ssl_negatives.mode == SslNegatives::Mode::Sampled && ssl_negatives.samples == 0) {
      throw InputError("sampled ssl negatives need S > 0");
    }
  }
};

// Counts epochs without strict improvement of the tracked metric.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::uint32_t patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool update(std::uint32_t epoch, double metric) {
    if (!have_best_ || metric > best_) {
      have_best_ = true;
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
      improved_ = true;
      return false;
    }
    improved_ = false;
    return ++stale_ >= patience_;
  }

  bool improved() const { return improved_; }
  double best() const { return best_; }
  std::uint32_t best_epoch() const { return best_epoch_; }

 private:
  std::uint32_t patience_;
  bool have_best_ = false;
  bool improved_ = false;
  double best_ = 0.0;
  std::uint32_t best_epoch_ = 0;
  std::uint32_t stale_ = 0;
};

struct EpochRecord {
  std::uint32_t epoch = 0;
  double loss_main = 0.0;
  double loss_ssl = 0.0;
  double val_mrr_candidate = std::numeric_limits<double>::quiet_NaN();
  double val_mrr_job = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  Checkpoint checkpoint;  // best validation epoch (last epoch without early stopping)
  std::vector<EpochRecord> history;
};

inline void write_history_tsv(std::ostream& os, std::span<const EpochRecord> h,
                              std::span<const std::string> header_comments = {}) {
  for (const auto& c : header_comments) os << "# " << c << '\n';
  os << "epoch\tloss_main\tloss_ssl\tval_mrr_cand\tval_mrr_job\n";
  char buf[160];
  for (const auto& r : h) {
    std::snprintf(buf, sizeof buf, "%u\t%.17g\t%.17g\t%.17g\t%.17g\n", r.epoch, r.loss_main, r.loss_ssl,
                  r.val_mrr_candidate, r.val_mrr_job);
    os << buf;
  }
}

// Mini-batch training over shuffled training matches. Each batch: propagate
// (every batch, or once per epoch), sample quadruples, joint loss, exact
// gradients, Adam. Validation MRR (mean of both directions) drives early stopping.
template <typename Scalar>
TrainResult train(const SplitDataset& data, const DocEmbeddingTable& candidate_docs,
                  const DocEmbeddingTable& job_docs, const TrainConfig& cfg, const VariantConfig& variant,
                  std::ostream* progress = nullptr) {
  cfg.validate();
  variant.validate();
  const DualGraph graph = build_variant_graph(data.train, data.n, data.m, variant);
  const NodeLayout& layout = graph.layout();
  ModelDims dims{cfg.d_e, cfg.d_t, candidate_docs.dim};
  ModelParams<Scalar> params = init_params<Scalar>(cfg.seed, layout, dims,
                                                   build_doc_matrix<Scalar>(layout, candidate_docs, job_docs),
                                                   cfg.shared_projection);
  AdamState<Scalar> adam = AdamState<Scalar>::zeros_like(params);

  TrainResult result;
  result.checkpoint = make_checkpoint(params, adam, variant, cfg.tau, 0, 0.0);
  if (cfg.max_epochs == 0) return result;
  if (data.train.match.empty()) throw InputError("train: no matched pairs in the training split");

  const auto all_matches = data.all_matches();
  const MatchIndex matched(data.n, data.m, all_matches);
  std::vector<EvalInstance> val_instances;
  if (!data.valid.match.empty()) {
    val_instances = build_eval_instances(data.valid.match, matched, cfg.eval_seed, cfg.eval_negatives);
  } else if (cfg.early_stopping) {
    throw InputError("train: empty validation positives (early stopping needs a validation split)");
  }

  const HybridOperator<Scalar> op(graph, variant.omega);
  const AdamHyper hyper{cfg.learning_rate};
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Pair> order = data.train.match;
  EarlyStopper stopper(cfg.patience);
  const bool with_ssl = variant.ssl_weight > 0.0;

  Matrix<Scalar> Z, dZ;
  for (std::uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double main_sum = 0.0, ssl_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::span<const Pair> batch(order.data() + begin, end - begin);
      if (cfg.propagate_every == PropagateEvery::Batch || begin == 0) {
        Z = layer_average(op, node_init(params), variant.layers);
      }
      TrainingBatch tb = make_training_batch(batch, matched, cfg.ssl_negatives, with_ssl, rng);
      dZ.setZero(Z.rows(), Z.cols());
      LossValue lv = loss_on_representations(Z, layout, variant, tb, cfg.tau, &dZ);
      if (!std::isfinite(lv.total)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      Gradients<Scalar> grads = backprop_to_params(params, op, dZ, variant.layers);
      adam_step(params, grads, adam, hyper);
      main_sum += lv.main;
      ssl_sum += lv.ssl;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_main = main_sum / static_cast<double>(batches);
    rec.loss_ssl = ssl_sum / static_cast<double>(batches);
    bool stop = false;
    if (!val_instances.empty()) {
      Matrix<Scalar> Zv = layer_average(op, node_init(params), variant.layers);
      RankingReport rep = evaluate(Zv, layout, val_instances, cfg.k);
      rec.val_mrr_candidate = rep.candidate.mrr;
      rec.val_mrr_job = rep.job.mrr;
      if (cfg.early_stopping) {
        stop = stopper.update(epoch, rep.mean_mrr());
        if (stopper.improved()) {
          result.checkpoint = make_checkpoint(params, adam, variant, cfg.tau, epoch, stopper.best());
        }
      }
    }
    if (!cfg.early_stopping) {
      const double metric = val_instances.empty() ? 0.0 : 0.5 * (rec.val_mrr_candidate + rec.val_mrr_job);
      result.checkpoint = make_checkpoint(params, adam, variant, cfg.tau, epoch, metric);
    }
    result.history.push_back(rec);
    if (progress) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %3u  main %.5f  ssl %.4f  val_mrr cand %.4f job %.4f\n", epoch,
                    rec.loss_main, rec.loss_ssl, rec.val_mrr_candidate, rec.val_mrr_job);
      *progress << buf << std::flush;
    }
    if (stop) break;
  }
  return result;
}

}  // namespace dpgnn
