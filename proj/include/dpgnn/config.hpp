#pragma once

// Run configuration: line-oriented `key = value` files with `#` comments.
// Command-line flags are applied through the same setter, after the file.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "dpgnn/corpus.hpp"
#include "dpgnn/error.hpp"
#include "dpgnn/model.hpp"
#include "dpgnn/trainer.hpp"

namespace dpgnn {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Precision : std::uint8_t { F32, F64 };

struct RunConfig {
  TrainConfig train;
  VariantConfig variant;
  std::string variant_name = "full";
  Precision precision = Precision::F64;
  SyntheticSpec synth;

  std::int64_t t_valid = 84;
  std::int64_t t_test = 95;
  std::string eval_split = "test";
  MissingDocPolicy missing_docs = MissingDocPolicy::Error;

  // Inputs default to files inside data_dir; outputs go to out_dir.
  std::string data_dir = "data";
  std::string events;
  std::string candidate_docs;
  std::string job_docs;
  std::string out_dir = "run";
  std::string checkpoint;

  std::vector<double> sweep_layers{0, 1, 2, 3, 4};
  std::vector<double> sweep_tau{0.5, 0.2, 0.1, 0.05, 0.01, 0.005, 0.001};
  std::vector<double> sweep_lambda{0.5, 0.3, 0.2, 0.1, 0.07, 0.05, 0.03, 0.01};
  std::vector<double> sweep_omega{0.0, 0.25, 0.5, 0.75, 1.0};

  std::filesystem::path events_path() const { return events.empty() ? std::filesystem::path(data_dir) / "events.tsv" : std::filesystem::path(events); }
  std::filesystem::path candidate_docs_path() const {
    return candidate_docs.empty() ? std::filesystem::path(data_dir) / "candidates.emb" : std::filesystem::path(candidate_docs);
  }
  std::filesystem::path job_docs_path() const {
    return job_docs.empty() ? std::filesystem::path(data_dir) / "jobs.emb" : std::filesystem::path(job_docs);
  }
  std::filesystem::path checkpoint_path() const {
    return checkpoint.empty() ? std::filesystem::path(out_dir) / "model.ckpt" : std::filesystem::path(checkpoint);
  }

  // Variant after the named ablation is applied on top of the explicit fields.
  VariantConfig effective_variant() const { return apply_variant(variant, variant_name); }

  void validate() const {
    train.validate();
    effective_variant().validate();
    if (t_valid >= t_test) throw InputError("config: t_valid must be < t_test");
    if (eval_split != "test" && eval_split != "valid") throw InputError("config: eval_split must be test|valid");
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t t = 0; t < v.size(); ++t) out += (t ? "," : "") + fmt(v[t]);
  return out;
}

[[noreturn]] inline void bad(const std::string& key, const std::string& value, const std::string& want) {
  throw InputError("config: invalid value '" + value + "' for " + key + " (expected " + want + ")");
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a number");
  return out;
}

template <typename U>
U to_unsigned(const std::string& key, const std::string& v) {
  U out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, v, "true|false");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Canonical key order; also the order of the manifest.
inline const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto add = [&](std::string key, auto set, auto get) { t.push_back({std::move(key), Field{set, get}}); };
    using C = RunConfig;
    using S = const std::string&;

    add("variant", [](C& c, S v) { apply_variant({}, v); c.variant_name = v; }, [](const C& c) { return c.variant_name; });
    add("d_e", [](C& c, S v) { c.train.d_e = to_unsigned<std::uint32_t>("d_e", v); }, [](const C& c) { return std::to_string(c.train.d_e); });
    add("d_t", [](C& c, S v) { c.train.d_t = to_unsigned<std::uint32_t>("d_t", v); }, [](const C& c) { return std::to_string(c.train.d_t); });
    add("layers", [](C& c, S v) { c.variant.layers = to_unsigned<std::uint32_t>("layers", v); }, [](const C& c) { return std::to_string(c.variant.layers); });
    add("omega", [](C& c, S v) { c.variant.omega = to_double("omega", v); }, [](const C& c) { return fmt(c.variant.omega); });
    add("tau", [](C& c, S v) { c.train.tau = to_double("tau", v); }, [](const C& c) { return fmt(c.train.tau); });
    add("lambda", [](C& c, S v) { c.variant.ssl_weight = to_double("lambda", v); }, [](const C& c) { return fmt(c.variant.ssl_weight); });
    add("self_edges",
        [](C& c, S v) {
          if (v == "as_match") c.variant.self_edges = SelfEdgeMode::AsMatch;
          else if (v == "as_uni") c.variant.self_edges = SelfEdgeMode::AsUni;
          else if (v == "off") c.variant.self_edges = SelfEdgeMode::Off;
          else bad("self_edges", v, "as_match|as_uni|off");
        },
        [](const C& c) { return std::string(to_string(c.variant.self_edges)); });
    add("shared_projection", [](C& c, S v) { c.train.shared_projection = to_bool("shared_projection", v); },
        [](const C& c) { return std::string(c.train.shared_projection ? "true" : "false"); });
    add("lr", [](C& c, S v) { c.train.learning_rate = to_double("lr", v); }, [](const C& c) { return fmt(c.train.learning_rate); });
    add("batch_size", [](C& c, S v) { c.train.batch_size = to_unsigned<std::uint32_t>("batch_size", v); }, [](const C& c) { return std::to_string(c.train.batch_size); });
    add("max_epochs", [](C& c, S v) { c.train.max_epochs = to_unsigned<std::uint32_t>("max_epochs", v); }, [](const C& c) { return std::to_string(c.train.max_epochs); });
    add("patience", [](C& c, S v) { c.train.patience = to_unsigned<std::uint32_t>("patience", v); }, [](const C& c) { return std::to_string(c.train.patience); });
    add("early_stopping", [](C& c, S v) { c.train.early_stopping = to_bool("early_stopping", v); },
        [](const C& c) { return std::string(c.train.early_stopping ? "true" : "false"); });
    add("seed", [](C& c, S v) { c.train.seed = to_unsigned<std::uint64_t>("seed", v); }, [](const C& c) { return std::to_string(c.train.seed); });
    add("propagate_every",
        [](C& c, S v) {
          if (v == "batch") c.train.propagate_every = PropagateEvery::Batch;
          else if (v == "epoch") c.train.propagate_every = PropagateEvery::Epoch;
          else bad("propagate_every", v, "batch|epoch");
        },
        [](const C& c) { return std::string(c.train.propagate_every == PropagateEvery::Batch ? "batch" : "epoch"); });
    add("ssl_negatives",
        [](C& c, S v) {
          if (v == "in_batch") c.train.ssl_negatives.mode = SslNegatives::Mode::InBatch;
          else if (v == "sampled") c.train.ssl_negatives.mode = SslNegatives::Mode::Sampled;
          else bad("ssl_negatives", v, "in_batch|sampled");
        },
        [](const C& c) {
          return std::string(c.train.ssl_negatives.mode == SslNegatives::Mode::InBatch ? "in_batch" : "sampled");
        });
    add("ssl_samples", [](C& c, S v) { c.train.ssl_negatives.samples = to_unsigned<std::uint32_t>("ssl_samples", v); },
        [](const C& c) { return std::to_string(c.train.ssl_negatives.samples); });
    add("precision",
        [](C& c, S v) {
          if (v == "32") c.precision = Precision::F32;
          else if (v == "64") c.precision = Precision::F64;
          else bad("precision", v, "32|64");
        },
        [](const C& c) { return std::string(c.precision == Precision::F32 ? "32" : "64"); });
    add("eval_negatives", [](C& c, S v) { c.train.eval_negatives = to_unsigned<std::uint32_t>("eval_negatives", v); },
        [](const C& c) { return std::to_string(c.train.eval_negatives); });
    add("k", [](C& c, S v) { c.train.k = to_unsigned<std::uint32_t>("k", v); }, [](const C& c) { return std::to_string(c.train.k); });
    add("eval_seed", [](C& c, S v) { c.train.eval_seed = to_unsigned<std::uint64_t>("eval_seed", v); },
        [](const C& c) { return std::to_string(c.train.eval_seed); });
    add("eval_split", [](C& c, S v) { c.eval_split = v; }, [](const C& c) { return c.eval_split; });
    add("t_valid", [](C& c, S v) { c.t_valid = to_int("t_valid", v); }, [](const C& c) { return std::to_string(c.t_valid); });
    add("t_test", [](C& c, S v) { c.t_test = to_int("t_test", v); }, [](const C& c) { return std::to_string(c.t_test); });
    add("missing_docs",
        [](C& c, S v) {
          if (v == "error") c.missing_docs = MissingDocPolicy::Error;
          else if (v == "zero") c.missing_docs = MissingDocPolicy::ZeroFill;
          else bad("missing_docs", v, "error|zero");
        },
        [](const C& c) { return std::string(c.missing_docs == MissingDocPolicy::Error ? "error" : "zero"); });
    add("data_dir", [](C& c, S v) { c.data_dir = v; }, [](const C& c) { return c.data_dir; });
    add("events", [](C& c, S v) { c.events = v; }, [](const C& c) { return c.events; });
    add("candidate_docs", [](C& c, S v) { c.candidate_docs = v; }, [](const C& c) { return c.candidate_docs; });
    add("job_docs", [](C& c, S v) { c.job_docs = v; }, [](const C& c) { return c.job_docs; });
    add("out_dir", [](C& c, S v) { c.out_dir = v; }, [](const C& c) { return c.out_dir; });
    add("checkpoint", [](C& c, S v) { c.checkpoint = v; }, [](const C& c) { return c.checkpoint; });

    add("synth.n", [](C& c, S v) { c.synth.n = to_unsigned<std::uint32_t>("synth.n", v); }, [](const C& c) { return std::to_string(c.synth.n); });
    add("synth.m", [](C& c, S v) { c.synth.m = to_unsigned<std::uint32_t>("synth.m", v); }, [](const C& c) { return std::to_string(c.synth.m); });
    add("synth.d_latent", [](C& c, S v) { c.synth.d_latent = to_unsigned<std::uint32_t>("synth.d_latent", v); },
        [](const C& c) { return std::to_string(c.synth.d_latent); });
    add("synth.apply_rate", [](C& c, S v) { c.synth.apply_rate = to_double("synth.apply_rate", v); },
        [](const C& c) { return fmt(c.synth.apply_rate); });
    add("synth.reachout_rate", [](C& c, S v) { c.synth.reachout_rate = to_double("synth.reachout_rate", v); },
        [](const C& c) { return fmt(c.synth.reachout_rate); });
    add("synth.match_threshold", [](C& c, S v) { c.synth.match_threshold = to_double("synth.match_threshold", v); },
        [](const C& c) { return fmt(c.synth.match_threshold); });
    add("synth.asymmetry", [](C& c, S v) { c.synth.asymmetry = to_double("synth.asymmetry", v); },
        [](const C& c) { return fmt(c.synth.asymmetry); });
    add("synth.seed", [](C& c, S v) { c.synth.seed = to_unsigned<std::uint64_t>("synth.seed", v); },
        [](const C& c) { return std::to_string(c.synth.seed); });
    add("synth.d_o", [](C& c, S v) { c.synth.d_o = to_unsigned<std::uint32_t>("synth.d_o", v); }, [](const C& c) { return std::to_string(c.synth.d_o); });
    add("synth.days", [](C& c, S v) { c.synth.days = to_unsigned<std::uint32_t>("synth.days", v); },
        [](const C& c) { return std::to_string(c.synth.days); });
    add("synth.intent_scale", [](C& c, S v) { c.synth.intent_scale = to_double("synth.intent_scale", v); },
        [](const C& c) { return fmt(c.synth.intent_scale); });
    add("synth.doc_noise", [](C& c, S v) { c.synth.doc_noise = to_double("synth.doc_noise", v); },
        [](const C& c) { return fmt(c.synth.doc_noise); });

    add("sweep.layers", [](C& c, S v) { c.sweep_layers = to_list("sweep.layers", v); }, [](const C& c) { return fmt_list(c.sweep_layers); });
    add("sweep.tau", [](C& c, S v) { c.sweep_tau = to_list("sweep.tau", v); }, [](const C& c) { return fmt_list(c.sweep_tau); });
    add("sweep.lambda", [](C& c, S v) { c.sweep_lambda = to_list("sweep.lambda", v); }, [](const C& c) { return fmt_list(c.sweep_lambda); });
    add("sweep.omega", [](C& c, S v) { c.sweep_omega = to_list("sweep.omega", v); }, [](const C& c) { return fmt_list(c.sweep_omega); });
    return t;
  }();
  return table;
}

}  // namespace config_detail

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : config_detail::fields()) {
    if (name == key) {
      field.set(cfg, value);
      return;
    }
  }
  throw InputError("config: unknown key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  for (const auto& [name, field] : config_detail::fields()) {
    if (name == key) return field.get(cfg);
  }
  throw InputError("config: unknown key '" + key + "'");
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : config_detail::fields()) out.push_back(f.first);
  return out;
}

// Applies `key = value` lines on top of cfg. Errors carry source:line.
inline void parse_config(std::istream& in, RunConfig& cfg, const std::string& source = "<config>") {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = config_detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InputError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = config_detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = config_detail::trim(std::string_view(body).substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const InputError& e) {
      throw InputError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  parse_config(in, base, path.string());
  return base;
}

// Every key in canonical order; parsing it reproduces the configuration.
inline std::string config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : config_detail::fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

inline std::string config_hash(const RunConfig& cfg) {
  const std::string text = config_text(cfg);
  const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

// Comment lines written at the top of every text output.
inline std::vector<std::string> provenance(const RunConfig& cfg, std::string_view command, std::uint64_t seed) {
  return {"dpgnn " + std::string(kVersion) + " " + std::string(command) + " config_hash=" + config_hash(cfg) +
          " seed=" + std::to_string(seed)};
}

inline std::string manifest_text(const RunConfig& cfg, std::string_view command, std::uint64_t seed) {
  std::string out;
  for (const auto& c : provenance(cfg, command, seed)) out += "# " + c + "\n";
  return out + config_text(cfg);
}

}  // namespace dpgnn
