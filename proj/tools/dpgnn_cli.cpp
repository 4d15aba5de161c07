// dpgnn command-line entry point.
//
//   dpgnn synth         -c run.cfg             synthetic events + document embeddings
//   dpgnn split         -c run.cfg             temporal split into train/valid/test TSVs
//   dpgnn train         -c run.cfg             train, write checkpoint + history
//   dpgnn eval          -c run.cfg             rank the test split (or valid) with a checkpoint
//   dpgnn sweep         -c run.cfg --axis tau  one training run per grid value
//   dpgnn score-pair    -c run.cfg --candidate 3 --job 7
//   dpgnn inspect-graph -c run.cfg
//
// Exit codes: 0 success, 1 runtime/numeric failure, 2 usage/config/file error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpgnn/dpgnn.hpp"

namespace fs = std::filesystem;
using namespace dpgnn;

namespace {

// Flags shared by every command; each maps onto a config key.
constexpr const char* kOverrideKeys[] = {
    "variant",   "d_e",        "d_t",     "layers",    "omega",      "tau",          "lambda",
    "lr",        "batch_size", "patience", "max_epochs", "seed",     "self_edges",   "eval_negatives",
    "k",         "eval_seed",  "eval_split", "precision", "data_dir", "out_dir",      "checkpoint",
    "t_valid",   "t_test",     "missing_docs", "propagate_every", "ssl_negatives", "ssl_samples",
    "early_stopping", "shared_projection"};

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::optional<std::string>> overrides = std::vector<std::optional<std::string>>(std::size(kOverrideKeys));
};

std::string flag_name(std::string key) {
  for (auto& ch : key) {
    if (ch == '_') ch = '-';
  }
  return "--" + key;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_file, "config file (key = value lines)");
  cmd->add_option("--set", o.sets, "override any config key: key=value (repeatable)");
  for (std::size_t t = 0; t < std::size(kOverrideKeys); ++t) {
    cmd->add_option(flag_name(kOverrideKeys[t]), o.overrides[t], std::string("config key ") + kOverrideKeys[t])
        ->group("Config overrides");
  }
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig cfg = o.config_file.empty() ? RunConfig{} : load_config(o.config_file);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + s + "'");
    set_config_value(cfg, config_detail::trim(s.substr(0, eq)), config_detail::trim(s.substr(eq + 1)));
  }
  for (std::size_t t = 0; t < std::size(kOverrideKeys); ++t) {
    if (o.overrides[t]) set_config_value(cfg, kOverrideKeys[t], *o.overrides[t]);
  }
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

void write_manifest(const RunConfig& cfg, const fs::path& dir, std::string_view command, std::uint64_t seed) {
  write_text_file(dir / "manifest.txt", manifest_text(cfg, command, seed));
}

int cmd_synth(const RunConfig& cfg) {
  cfg.synth.validate();
  const fs::path dir = cfg.data_dir;
  ensure_dir(dir);
  const SyntheticDataset data = generate_synthetic(cfg.synth);
  const auto prov = provenance(cfg, "synth", cfg.synth.seed);
  std::ostringstream events;
  write_events(events, data.log, prov);
  write_text_file(cfg.events_path(), events.str());
  save_doc_embeddings(cfg.candidate_docs_path(), data.candidate_docs);
  save_doc_embeddings(cfg.job_docs_path(), data.job_docs);
  write_manifest(cfg, dir, "synth", cfg.synth.seed);
  std::cout << "wrote " << data.log.events.size() << " events (n=" << data.log.n << ", m=" << data.log.m << ") to "
            << dir.string() << "\n";
  return 0;
}

int cmd_split(const RunConfig& cfg) {
  cfg.validate();
  const EventLog log = load_events(cfg.events_path());
  const SplitDataset s = temporal_split(log, cfg.t_valid, cfg.t_test);
  const fs::path dir = cfg.out_dir;
  ensure_dir(dir);
  const auto prov = provenance(cfg, "split", 0);
  auto write = [&](const char* name, const InteractionSets& sets, std::int64_t day) {
    std::ostringstream os;
    write_events(os, EventLog{log.n, log.m, to_events(sets, day)}, prov);
    write_text_file(dir / name, os.str());
    std::cout << name << "\tmatch " << sets.match.size() << "\tapply " << sets.apply.size() << "\treachout "
              << sets.reach_out.size() << "\n";
  };
  std::int64_t first = log.events.empty() ? 0 : log.events.front().timestamp;
  for (const auto& e : log.events) first = std::min(first, e.timestamp);
  write("train.tsv", s.train, first);
  write("valid.tsv", s.valid, cfg.t_valid);
  write("test.tsv", s.test, cfg.t_test);
  std::cout << "orphan positives: valid " << s.orphan_valid << ", test " << s.orphan_test << "\n";
  write_manifest(cfg, dir, "split", 0);
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const LoadedData d = load_dataset(cfg);
  const fs::path dir = cfg.out_dir;
  ensure_dir(dir);
  TrainResult r = run_training(cfg, d, &std::cout);
  save_checkpoint(r.checkpoint, cfg.checkpoint_path());
  std::ostringstream hist;
  write_history_tsv(hist, r.history, provenance(cfg, "train", cfg.train.seed));
  write_text_file(dir / "history.tsv", hist.str());
  write_manifest(cfg, dir, "train", cfg.train.seed);
  if (!r.history.empty()) {
    const auto& best = r.history[std::max<std::uint32_t>(r.checkpoint.epoch, 1) - 1];
    std::printf("best epoch %u  val_mrr cand %.6f job %.6f\n", r.checkpoint.epoch, best.val_mrr_candidate,
                best.val_mrr_job);
  }
  std::cout << "checkpoint: " << cfg.checkpoint_path().string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, bool groups, const std::string& output) {
  cfg.validate();
  const LoadedData d = load_dataset(cfg);
  const Checkpoint c = load_checkpoint(cfg.checkpoint_path());
  const RankingReport r = evaluate_checkpoint(cfg, d, c, groups);
  auto prov = provenance(cfg, "eval", cfg.train.eval_seed);
  prov.push_back("split=" + cfg.eval_split + " k=" + std::to_string(cfg.train.k) +
                 " negatives=" + std::to_string(cfg.train.eval_negatives));
  std::ostringstream os;
  write_report_tsv(os, r, prov);
  const fs::path path = output.empty() ? fs::path(cfg.out_dir) / "report.tsv" : fs::path(output);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  write_text_file(path, os.str());
  std::cout << format_report_table(r);
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& axis_name, const std::string& grid_text) {
  cfg.validate();
  const SweepAxis axis = parse_axis(axis_name);
  std::vector<double> grid = default_grid(cfg, axis);
  if (!grid_text.empty()) grid = config_detail::to_list("--grid", grid_text);
  const LoadedData d = load_dataset(cfg);
  const fs::path dir = cfg.out_dir;
  ensure_dir(dir);
  const auto rows = sweep(cfg, d, axis, grid, &std::cerr);
  auto prov = provenance(cfg, "sweep", cfg.train.seed);
  prov.push_back("axis=" + to_string(axis) + " split=" + cfg.eval_split);
  std::ostringstream os;
  write_sweep_tsv(os, axis, rows, prov);
  write_text_file(dir / ("sweep_" + to_string(axis) + ".tsv"), os.str());
  std::cout << os.str();
  return 0;
}

int cmd_score_pair(const RunConfig& cfg, std::int64_t candidate, std::int64_t job) {
  const LoadedData d = load_dataset(cfg);
  if (candidate < 0 || job < 0) throw InputError("score-pair: ids must be non-negative");
  const Checkpoint c = load_checkpoint(cfg.checkpoint_path());
  const PairScores s = score_checkpoint_pair(c, d, static_cast<std::uint32_t>(candidate), static_cast<std::uint32_t>(job));
  std::printf("candidate %lld job %lld\nr %.6f\ns %.6f\ny %.6f\n", static_cast<long long>(candidate),
              static_cast<long long>(job), s.r, s.s, s.y);
  return 0;
}

int cmd_inspect(const RunConfig& cfg, const std::string& dump_path) {
  cfg.validate();
  const EventLog log = load_events(cfg.events_path());
  const SplitDataset s = temporal_split(log, cfg.t_valid, cfg.t_test);
  const DualGraph g = build_variant_graph(s.train, s.n, s.m, cfg.effective_variant());
  std::cout << graph_summary(g);
  if (!dump_path.empty()) {
    std::ostringstream os;
    for (const auto& c : provenance(cfg, "inspect-graph", 0)) os << "# " << c << '\n';
    dump_edges(os, g);
    write_text_file(dump_path, os.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpgnn: dual-perspective graph ranking for two-way person-job fit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonOptions o;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset into data_dir");
  auto* split = app.add_subcommand("split", "write the temporal train/valid/test split to out_dir");
  auto* train = app.add_subcommand("train", "train and write the best checkpoint and history to out_dir");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on eval_split");
  auto* sweep_cmd = app.add_subcommand("sweep", "train/evaluate once per value of one hyper-parameter");
  auto* score = app.add_subcommand("score-pair", "print r, s and y for one candidate-job pair");
  auto* inspect = app.add_subcommand("inspect-graph", "summarize the training graph");
  for (auto* cmd : {synth, split, train, eval, sweep_cmd, score, inspect}) add_common(cmd, o);

  bool groups = false;
  std::string report_path;
  eval->add_flag("--sparsity-groups", groups, "add the five-group sparsity breakdown per side");
  eval->add_option("-o,--output", report_path, "report TSV path (default out_dir/report.tsv)");
  std::string axis, grid;
  sweep_cmd->add_option("--axis", axis, "layers|tau|lambda|omega")->required();
  sweep_cmd->add_option("--grid", grid, "comma-separated values (default: sweep.<axis> from the config)");
  std::int64_t candidate = -1, job = -1;
  score->add_option("--candidate", candidate, "candidate index")->required();
  score->add_option("--job", job, "job index")->required();
  std::string dump;
  inspect->add_option("--dump-edges", dump, "write src/dst/class/coeff TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (*synth) return cmd_synth(cfg);
    if (*split) return cmd_split(cfg);
    if (*train) return cmd_train(cfg);
    if (*eval) return cmd_eval(cfg, groups, report_path);
    if (*sweep_cmd) return cmd_sweep(cfg, axis, grid);
    if (*score) return cmd_score_pair(cfg, candidate, job);
    if (*inspect) return cmd_inspect(cfg, dump);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
