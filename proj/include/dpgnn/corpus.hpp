#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dpgnn/binio.hpp"
#include "dpgnn/error.hpp"
#include "dpgnn/io.hpp"
#include "dpgnn/types.hpp"

namespace dpgnn {

enum class EventKind : std::uint8_t { Apply, ReachOut, Match };

constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Apply: return "apply";
    case EventKind::ReachOut: return "reachout";
    case EventKind::Match: return "match";
  }
  return "?";
}

struct InteractionEvent {
  EventKind kind = EventKind::Apply;
  std::uint32_t candidate = 0;
  std::uint32_t job = 0;
  std::int64_t timestamp = 0;  // days

  Pair pair() const { return {candidate, job}; }
  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

struct EventLog {
  std::uint32_t n = 0;  // candidates
  std::uint32_t m = 0;  // jobs
  std::vector<InteractionEvent> events;
};

// ---------------------------------------------------------------------------
// Interaction log TSV

namespace detail {

template <typename T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace detail

// Header is `#n=<int>\tm=<int>`; later lines starting with '#' are comments.
inline EventLog parse_events(std::istream& in, const std::string& source = "<events>") {
  EventLog log;
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  auto fail = [&](const std::string& msg) {
    throw InputError(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (!have_header) {
      if (line.size() < 2 || line[0] != '#') fail("missing '#n=<int>\\tm=<int>' header");
      std::string hdr(line.substr(1));
      std::replace(hdr.begin(), hdr.end(), '\t', ' ');
      std::istringstream hs(hdr);
      std::string a, b;
      hs >> a >> b;
      if (a.rfind("n=", 0) != 0 || b.rfind("m=", 0) != 0 ||
          !detail::parse_int(std::string_view(a).substr(2), log.n) ||
          !detail::parse_int(std::string_view(b).substr(2), log.m)) {
        fail("malformed header, expected '#n=<int>\\tm=<int>'");
      }
      have_header = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != 4) fail("malformed line, expected 4 tab-separated columns");
    InteractionEvent ev;
    if (cols[0] == "apply") ev.kind = EventKind::Apply;
    else if (cols[0] == "reachout") ev.kind = EventKind::ReachOut;
    else if (cols[0] == "match") ev.kind = EventKind::Match;
    else fail("unknown kind '" + std::string(cols[0]) + "'");
    if (!detail::parse_int(cols[1], ev.candidate)) fail("malformed candidate index");
    if (!detail::parse_int(cols[2], ev.job)) fail("malformed job index");
    if (!detail::parse_int(cols[3], ev.timestamp)) fail("non-integer timestamp");
    if (ev.timestamp < 0) fail("negative timestamp");
    if (ev.candidate >= log.n) fail("candidate index out of range");
    if (ev.job >= log.m) fail("job index out of range");
    log.events.push_back(ev);
  }
  if (!have_header) {
    line_no = 0;
    fail("empty file");
  }
  return log;
}

inline EventLog load_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse_events(in, path.string());
}

inline void write_events(std::ostream& out, const EventLog& log,
                         std::span<const std::string> comments = {}) {
  out << "#n=" << log.n << "\tm=" << log.m << '\n';
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& e : log.events) {
    out << to_string(e.kind) << '\t' << e.candidate << '\t' << e.job << '\t' << e.timestamp
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splits

// Canonical interaction sets of one split. All vectors sorted and unique.
// reach_out pairs are stored as (candidate, job) with the job as initiator.
struct InteractionSets {
  std::vector<Pair> apply;
  std::vector<Pair> reach_out;
  std::vector<Pair> match;

  bool empty() const { return apply.empty() && reach_out.empty() && match.empty(); }
  friend bool operator==(const InteractionSets&, const InteractionSets&) = default;
};

struct SplitDataset {
  std::uint32_t n = 0;
  std::uint32_t m = 0;
  std::int64_t t_valid_start = 0;
  std::int64_t t_test_start = 0;
  InteractionSets train;
  InteractionSets valid;
  InteractionSets test;
  // valid/test positives with at least one user absent from the training graph
  std::size_t orphan_valid = 0;
  std::size_t orphan_test = 0;

  // Matches from every split; used as the exclusion set for negative sampling.
  std::vector<Pair> all_matches() const {
    std::vector<Pair> out;
    out.reserve(train.match.size() + valid.match.size() + test.match.size());
    for (const auto* s : {&train, &valid, &test}) out.insert(out.end(), s->match.begin(), s->match.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

namespace detail {

inline void sort_unique(std::vector<Pair>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

inline void erase_present(std::vector<Pair>& v, const std::vector<Pair>& sorted_exclude) {
  std::erase_if(v, [&](Pair p) {
    return std::binary_search(sorted_exclude.begin(), sorted_exclude.end(), p);
  });
}

}  // namespace detail

// Dedupe and drop unidirectional records of matched pairs.
inline InteractionSets reconcile(InteractionSets s) {
  detail::sort_unique(s.apply);
  detail::sort_unique(s.reach_out);
  detail::sort_unique(s.match);
  detail::erase_present(s.apply, s.match);
  detail::erase_present(s.reach_out, s.match);
  return s;
}

// Partition by day: train < t_valid_start <= valid < t_test_start <= test.
// Pairs matched in an earlier split are dropped from later splits entirely.
inline SplitDataset temporal_split(std::span<const InteractionEvent> events, std::uint32_t n,
                                   std::uint32_t m, std::int64_t t_valid_start,
                                   std::int64_t t_test_start) {
  if (t_valid_start >= t_test_start) {
    throw InputError("temporal_split: t_valid_start must be < t_test_start");
  }
  SplitDataset ds;
  ds.n = n;
  ds.m = m;
  ds.t_valid_start = t_valid_start;
  ds.t_test_start = t_test_start;

  InteractionSets raw[3];
  for (const auto& e : events) {
    if (e.candidate >= n || e.job >= m) throw InputError("temporal_split: index out of range");
    int bucket = e.timestamp < t_valid_start ? 0 : (e.timestamp < t_test_start ? 1 : 2);
    auto& s = raw[bucket];
    switch (e.kind) {
      case EventKind::Apply: s.apply.push_back(e.pair()); break;
      case EventKind::ReachOut: s.reach_out.push_back(e.pair()); break;
      case EventKind::Match: s.match.push_back(e.pair()); break;
    }
  }
  ds.train = reconcile(std::move(raw[0]));
  ds.valid = reconcile(std::move(raw[1]));
  ds.test = reconcile(std::move(raw[2]));

  // earlier matches leak into later splits: drop every record of those pairs
  auto drop_seen = [](InteractionSets& s, const std::vector<Pair>& seen) {
    detail::erase_present(s.apply, seen);
    detail::erase_present(s.reach_out, seen);
    detail::erase_present(s.match, seen);
  };
  drop_seen(ds.valid, ds.train.match);
  drop_seen(ds.test, ds.train.match);
  drop_seen(ds.test, ds.valid.match);

  if (ds.train.empty()) throw InputError("temporal_split: empty train split after reconciliation");

  std::vector<bool> cand_seen(n, false), job_seen(m, false);
  for (const auto* v : {&ds.train.apply, &ds.train.reach_out, &ds.train.match}) {
    for (Pair p : *v) {
      cand_seen[p.candidate] = true;
      job_seen[p.job] = true;
    }
  }
  auto orphans = [&](const std::vector<Pair>& pos) {
    return static_cast<std::size_t>(std::count_if(pos.begin(), pos.end(), [&](Pair p) {
      return !cand_seen[p.candidate] || !job_seen[p.job];
    }));
  };
  ds.orphan_valid = orphans(ds.valid.match);
  ds.orphan_test = orphans(ds.test.match);
  return ds;
}

inline SplitDataset temporal_split(const EventLog& log, std::int64_t t_valid_start,
                                   std::int64_t t_test_start) {
  return temporal_split(log.events, log.n, log.m, t_valid_start, t_test_start);
}

// Events reproducing one split's sets, stamped with the given day.
inline std::vector<InteractionEvent> to_events(const InteractionSets& s, std::int64_t day) {
  std::vector<InteractionEvent> out;
  for (Pair p : s.apply) out.push_back({EventKind::Apply, p.candidate, p.job, day});
  for (Pair p : s.reach_out) out.push_back({EventKind::ReachOut, p.candidate, p.job, day});
  for (Pair p : s.match) out.push_back({EventKind::Match, p.candidate, p.job, day});
  return out;
}

// Sorted per-user partner lists for O(log deg) membership tests.
class MatchIndex {
 public:
  MatchIndex(std::uint32_t n, std::uint32_t m, std::span<const Pair> matches)
      : by_candidate_(n), by_job_(m) {
    for (Pair p : matches) {
      by_candidate_.at(p.candidate).push_back(p.job);
      by_job_.at(p.job).push_back(p.candidate);
    }
    for (auto& v : by_candidate_) detail_sort(v);
    for (auto& v : by_job_) detail_sort(v);
  }

  bool contains(Pair p) const {
    const auto& v = by_candidate_[p.candidate];
    return std::binary_search(v.begin(), v.end(), p.job);
  }
  const std::vector<std::uint32_t>& jobs_of(std::uint32_t c) const { return by_candidate_[c]; }
  const std::vector<std::uint32_t>& candidates_of(std::uint32_t j) const { return by_job_[j]; }
  std::uint32_t candidates() const { return static_cast<std::uint32_t>(by_candidate_.size()); }
  std::uint32_t jobs() const { return static_cast<std::uint32_t>(by_job_.size()); }

 private:
  static void detail_sort(std::vector<std::uint32_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  std::vector<std::vector<std::uint32_t>> by_candidate_;
  std::vector<std::vector<std::uint32_t>> by_job_;
};

// ---------------------------------------------------------------------------
// Document embedding tables
//
// File: magic "DPFEMB1\0", u32 count, u32 dim, count*dim f32, all little-endian.

inline constexpr char kEmbeddingMagic[8] = {'D', 'P', 'F', 'E', 'M', 'B', '1', '\0'};

struct DocEmbeddingTable {
  Side side = Side::Candidate;
  std::uint32_t dim = 0;
  std::vector<float> values;  // row-major, count*dim

  std::uint32_t count() const { return dim == 0 ? 0 : static_cast<std::uint32_t>(values.size() / dim); }
  std::span<const float> row(std::uint32_t i) const {
    return std::span<const float>(values).subspan(static_cast<std::size_t>(i) * dim, dim);
  }
};

enum class MissingDocPolicy { Error, ZeroFill };

inline std::vector<std::uint8_t> encode_doc_embeddings(const DocEmbeddingTable& t) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + t.values.size() * 4);
  binio::put_bytes(out, kEmbeddingMagic, 8);
  binio::put<std::uint32_t>(out, t.count());
  binio::put<std::uint32_t>(out, t.dim);
  for (float v : t.values) binio::put<float>(out, v);
  return out;
}

inline DocEmbeddingTable decode_doc_embeddings(const std::vector<std::uint8_t>& bytes, Side side,
                                               std::uint32_t expected_count,
                                               MissingDocPolicy policy = MissingDocPolicy::Error,
                                               const std::string& what = "<embeddings>") {
  binio::Reader rd(bytes, what);
  char magic[8];
  if (bytes.size() < 8) throw InputError(what + ": magic mismatch");
  rd.take(magic, 8);
  if (!std::equal(magic, magic + 8, kEmbeddingMagic)) throw InputError(what + ": magic mismatch");
  auto count = rd.get<std::uint32_t>();
  auto dim = rd.get<std::uint32_t>();
  if (dim == 0) throw InputError(what + ": zero dimension");
  if (count > expected_count || (count < expected_count && policy == MissingDocPolicy::Error)) {
    throw InputError(what + ": count mismatch (file has " + std::to_string(count) +
                     " rows, expected " + std::to_string(expected_count) + ")");
  }
  std::size_t total = static_cast<std::size_t>(count) * dim;
  if (rd.remaining() < total * 4) throw InputError(what + ": truncated payload");
  DocEmbeddingTable t;
  t.side = side;
  t.dim = dim;
  t.values.assign(static_cast<std::size_t>(expected_count) * dim, 0.0f);
  for (std::size_t i = 0; i < total; ++i) {
    float v = rd.get<float>();
    if (!std::isfinite(v)) {
      throw InputError(what + ": non-finite value at row " + std::to_string(i / dim));
    }
    t.values[i] = v;
  }
  if (count < expected_count) {
    std::cerr << "warning: " << what << ": " << (expected_count - count) << " " << to_string(side)
              << "(s) without document rows; using zero vectors\n";
  }
  return t;
}

inline DocEmbeddingTable load_doc_embeddings(const std::filesystem::path& path, Side side,
                                             std::uint32_t expected_count,
                                             MissingDocPolicy policy = MissingDocPolicy::Error) {
  return decode_doc_embeddings(read_file_bytes(path), side, expected_count, policy, path.string());
}

inline void save_doc_embeddings(const std::filesystem::path& path, const DocEmbeddingTable& t) {
  write_file_bytes(path, encode_doc_embeddings(t));
}

// ---------------------------------------------------------------------------
// Synthetic two-way preference data

struct SyntheticSpec {
  std::uint32_t n = 1000;
  std::uint32_t m = 800;
  std::uint32_t d_latent = 16;
  double apply_rate = 0.02;
  double reachout_rate = 0.01;
  double match_threshold = 0.3;
  double asymmetry = 0.5;
  std::uint64_t seed = 7;
  std::uint32_t d_o = 64;
  std::uint32_t days = 106;
  // std of the latent intent dot products
  double intent_scale = 2.0;
  // std of the additive noise on document vectors (signal part has unit variance)
  double doc_noise = 1.0;

  void validate() const {
    auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (n == 0 || m == 0) throw InputError("synthetic spec: n and m must be > 0");
    if (d_latent == 0 || d_o == 0 || days == 0) {
      throw InputError("synthetic spec: d_latent, d_o and days must be > 0");
    }
    if (!rate(apply_rate) || !rate(reachout_rate)) {
      throw InputError("synthetic spec: rates must lie in [0,1]");
    }
    if (!(asymmetry >= 0.0 && asymmetry <= 1.0)) {
      throw InputError("synthetic spec: asymmetry must lie in [0,1]");
    }
    if (std::isnan(match_threshold)) throw InputError("synthetic spec: match_threshold is NaN");
    if (!(intent_scale > 0.0) || !(doc_noise >= 0.0)) {
      throw InputError("synthetic spec: intent_scale must be > 0 and doc_noise >= 0");
    }
  }
};

struct SyntheticDataset {
  EventLog log;
  DocEmbeddingTable candidate_docs;
  DocEmbeddingTable job_docs;
};

// Each user gets latent active/passive vectors with corr = 1 - asymmetry.
// A pair is contacted when the candidate applies (p = apply_rate * sigmoid(r))
// or the job reaches out (p = reachout_rate * sigmoid(s)), where r and s are the
// directed intents. A contacted pair matches iff r and s both exceed the
// threshold; otherwise the fired directed records are logged.
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::uint32_t dl = spec.d_latent;
  // entries N(0, s^2) with d*s^4 = intent_scale^2
  const double s = std::sqrt(spec.intent_scale / std::sqrt(static_cast<double>(dl)));
  const double rho = 1.0 - spec.asymmetry;
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  auto draw_side = [&](std::uint32_t count, std::vector<double>& active, std::vector<double>& passive) {
    active.resize(static_cast<std::size_t>(count) * dl);
    passive.resize(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
      double g1 = gauss(rng);
      double g2 = gauss(rng);
      active[i] = s * g1;
      passive[i] = s * (rho * g1 + rho_c * g2);
    }
  };
  std::vector<double> ca, cp, ja, jp;
  draw_side(spec.n, ca, cp);
  draw_side(spec.m, ja, jp);

  auto dot = [dl](const std::vector<double>& a, std::uint32_t i, const std::vector<double>& b,
                  std::uint32_t k) {
    double acc = 0.0;
    const double* x = a.data() + static_cast<std::size_t>(i) * dl;
    const double* y = b.data() + static_cast<std::size_t>(k) * dl;
    for (std::uint32_t t = 0; t < dl; ++t) acc += x[t] * y[t];
    return acc;
  };
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

  SyntheticDataset out;
  out.log.n = spec.n;
  out.log.m = spec.m;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> day(0, static_cast<std::int64_t>(spec.days) - 1);
  for (std::uint32_t c = 0; c < spec.n; ++c) {
    for (std::uint32_t j = 0; j < spec.m; ++j) {
      const double r = dot(ca, c, jp, j);
      const double sc = dot(ja, j, cp, c);
      const bool applied = unif(rng) < spec.apply_rate * sigmoid(r);
      const bool reached = unif(rng) < spec.reachout_rate * sigmoid(sc);
      if (!applied && !reached) continue;
      if (r > spec.match_threshold && sc > spec.match_threshold) {
        out.log.events.push_back({EventKind::Match, c, j, day(rng)});
        continue;
      }
      if (applied) out.log.events.push_back({EventKind::Apply, c, j, day(rng)});
      if (reached) out.log.events.push_back({EventKind::ReachOut, c, j, day(rng)});
    }
  }
  std::stable_sort(out.log.events.begin(), out.log.events.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });

  // docs = fixed random projection of [active; passive] / s, plus noise
  auto project = [&](Side side, std::uint32_t count, const std::vector<double>& active,
                     const std::vector<double>& passive) {
    std::vector<double> proj(static_cast<std::size_t>(spec.d_o) * 2 * dl);
    const double pscale = 1.0 / std::sqrt(2.0 * dl);
    for (auto& v : proj) v = pscale * gauss(rng);
    DocEmbeddingTable t;
    t.side = side;
    t.dim = spec.d_o;
    t.values.resize(static_cast<std::size_t>(count) * spec.d_o);
    for (std::uint32_t u = 0; u < count; ++u) {
      for (std::uint32_t o = 0; o < spec.d_o; ++o) {
        double acc = 0.0;
        const double* row = proj.data() + static_cast<std::size_t>(o) * 2 * dl;
        for (std::uint32_t t2 = 0; t2 < dl; ++t2) {
          acc += row[t2] * active[static_cast<std::size_t>(u) * dl + t2] / s;
          acc += row[dl + t2] * passive[static_cast<std::size_t>(u) * dl + t2] / s;
        }
        acc += spec.doc_noise * gauss(rng);
        t.values[static_cast<std::size_t>(u) * spec.d_o + o] = static_cast<float>(acc);
      }
    }
    return t;
  };
  out.candidate_docs = project(Side::Candidate, spec.n, ca, cp);
  out.job_docs = project(Side::Job, spec.m, ja, jp);
  return out;
}

}  // namespace dpgnn
