#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dpgnn/corpus.hpp"
#include "dpgnn/dpgraph.hpp"
#include "dpgnn/error.hpp"
#include "dpgnn/model.hpp"

namespace dpgnn {

enum class Direction : std::uint8_t { RankJobsForCandidate, RankCandidatesForJob };

constexpr std::string_view to_string(Direction d) {
  return d == Direction::RankJobsForCandidate ? "candidate" : "job";
}

// anchor/positive/negatives are user indices; the direction fixes their sides.
struct EvalInstance {
  Direction direction = Direction::RankJobsForCandidate;
  std::uint32_t anchor = 0;
  std::uint32_t positive = 0;
  std::vector<std::uint32_t> negatives;

  friend bool operator==(const EvalInstance&, const EvalInstance&) = default;
};

// Two instances per positive pair, each with `negatives` distinct partners
// never matched with the anchor in any split.
inline std::vector<EvalInstance> build_eval_instances(std::span<const Pair> positives,
                                                      const MatchIndex& matched, std::uint64_t seed,
                                                      std::uint32_t negatives = 20) {
  std::mt19937_64 rng(seed);
  std::vector<EvalInstance> out;
  out.reserve(2 * positives.size());
  std::vector<std::uint32_t> pool;
  auto sample = [&](std::uint32_t universe, const std::vector<std::uint32_t>& excluded,
                    const char* what, std::uint32_t anchor) {
    pool.clear();
    for (std::uint32_t u = 0; u < universe; ++u) {
      if (!std::binary_search(excluded.begin(), excluded.end(), u)) pool.push_back(u);
    }
    if (pool.size() < negatives) {
      throw InputError(std::string("build_eval_instances: ") + what + " " + std::to_string(anchor) +
                       " has only " + std::to_string(pool.size()) + " eligible negatives");
    }
    for (std::uint32_t t = 0; t < negatives; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, pool.size() - 1);
      std::swap(pool[t], pool[pick(rng)]);
    }
    return std::vector<std::uint32_t>(pool.begin(), pool.begin() + negatives);
  };
  for (Pair p : positives) {
    out.push_back({Direction::RankJobsForCandidate, p.candidate, p.job,
                   sample(matched.jobs(), matched.jobs_of(p.candidate), "candidate", p.candidate)});
    out.push_back({Direction::RankCandidatesForJob, p.job, p.candidate,
                   sample(matched.candidates(), matched.candidates_of(p.job), "job", p.job)});
  }
  return out;
}

struct RankMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  std::size_t rank = 0;
};

// Single relevant item; ties rank the positive last among equals.
inline RankMetrics rank_metrics(std::span<const double> scores, std::size_t positive, std::size_t k = 5) {
  if (positive >= scores.size()) throw InputError("rank_metrics: positive index out of range");
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("rank_metrics: non-finite score");
  }
  std::size_t rank = 1;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t != positive && scores[t] >= scores[positive]) ++rank;
  }
  RankMetrics r;
  r.rank = rank;
  r.mrr = 1.0 / static_cast<double>(rank);
  if (rank <= k) {
    r.recall = 1.0;
    r.precision = 1.0 / static_cast<double>(k);
    r.ndcg = 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  }
  return r;
}

struct MetricMeans {
  double recall = 0.0;
  double precision = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  std::size_t count = 0;
};

struct GroupMetrics {
  std::uint32_t group = 0;  // 1-based, 1 = sparsest
  std::size_t users = 0;
  std::uint64_t interactions = 0;
  MetricMeans metrics;
};

struct RankingReport {
  std::size_t k = 5;
  MetricMeans candidate;  // RankJobsForCandidate
  MetricMeans job;        // RankCandidatesForJob
  std::vector<GroupMetrics> candidate_groups;
  std::vector<GroupMetrics> job_groups;

  double mean_mrr() const { return 0.5 * (candidate.mrr + job.mrr); }
};

inline MetricMeans mean_of(std::span<const RankMetrics> ms) {
  MetricMeans out;
  out.count = ms.size();
  if (ms.empty()) return out;
  for (const auto& m : ms) {
    out.recall += m.recall;
    out.precision += m.precision;
    out.ndcg += m.ndcg;
    out.mrr += m.mrr;
  }
  const double inv = 1.0 / static_cast<double>(ms.size());
  out.recall *= inv;
  out.precision *= inv;
  out.ndcg *= inv;
  out.mrr *= inv;
  return out;
}

// Metrics for each instance, scored with the matching score y. The positive
// occupies slot 0 of the 1 + |negatives| candidate list.
template <typename Scalar>
std::vector<RankMetrics> score_instances(const Matrix<Scalar>& Z, const NodeLayout& L,
                                         std::span<const EvalInstance> instances, std::size_t k = 5) {
  std::vector<RankMetrics> out;
  out.reserve(instances.size());
  std::vector<double> scores;
  for (const auto& inst : instances) {
    scores.clear();
    const bool cand_anchor = inst.direction == Direction::RankJobsForCandidate;
    auto y = [&](std::uint32_t other) {
      return cand_anchor ? score_pair(Z, L, inst.anchor, other).y : score_pair(Z, L, other, inst.anchor).y;
    };
    scores.push_back(y(inst.positive));
    for (auto neg : inst.negatives) scores.push_back(y(neg));
    out.push_back(rank_metrics(scores, 0, k));
  }
  return out;
}

inline RankingReport aggregate(std::span<const EvalInstance> instances, std::span<const RankMetrics> metrics,
                               std::size_t k) {
  std::vector<RankMetrics> cand, job;
  for (std::size_t t = 0; t < instances.size(); ++t) {
    (instances[t].direction == Direction::RankJobsForCandidate ? cand : job).push_back(metrics[t]);
  }
  RankingReport r;
  r.k = k;
  r.candidate = mean_of(cand);
  r.job = mean_of(job);
  return r;
}

template <typename Scalar>
RankingReport evaluate(const Matrix<Scalar>& Z, const NodeLayout& L, std::span<const EvalInstance> instances,
                       std::size_t k = 5) {
  auto ms = score_instances(Z, L, instances, k);
  return aggregate(instances, ms, k);
}

template <typename Scalar>
RankingReport evaluate(const ModelParams<Scalar>& p, const DualGraph& g, const VariantConfig& v,
                       std::span<const EvalInstance> instances, std::size_t k = 5) {
  auto st = propagate(p, g, v);
  return evaluate(st.Z, p.layout, instances, k);
}

// ---------------------------------------------------------------------------
// Sparsity groups

// Training interactions (apply, reach-out and match records) per user of one side.
inline std::vector<std::uint64_t> interaction_counts(const InteractionSets& train, Side side, std::uint32_t count) {
  std::vector<std::uint64_t> c(count, 0);
  for (const auto* v : {&train.apply, &train.reach_out, &train.match}) {
    for (Pair p : *v) ++c.at(side == Side::Candidate ? p.candidate : p.job);
  }
  return c;
}

// Largest deviation of any segment mass from the target for given cut points.
inline double partition_deviation(std::span<const std::uint64_t> sorted_counts, std::span<const std::size_t> cuts,
                                  std::size_t groups) {
  double total = 0.0;
  for (auto c : sorted_counts) total += static_cast<double>(c);
  const double target = total / static_cast<double>(groups);
  double worst = 0.0;
  std::size_t begin = 0;
  for (std::size_t g = 0; g <= cuts.size(); ++g) {
    std::size_t end = g < cuts.size() ? cuts[g] : sorted_counts.size();
    double mass = 0.0;
    for (std::size_t t = begin; t < end; ++t) mass += static_cast<double>(sorted_counts[t]);
    worst = std::max(worst, std::abs(mass - target));
    begin = end;
  }
  return worst;
}

// Cut points (groups-1 of them, strictly increasing) splitting an ascending
// count sequence into contiguous non-empty groups whose largest deviation from
// total/groups is minimal. Binary search on the deviation; feasibility is a
// reachability sweep over prefix positions where each step's landing positions
// form one interval because prefix sums are monotone.
inline std::vector<std::size_t> balanced_cuts(std::span<const std::uint64_t> sorted_counts, std::size_t groups) {
  const std::size_t N = sorted_counts.size();
  if (N < groups) throw InputError("sparsity groups: fewer users than groups");
  std::vector<double> prefix(N + 1, 0.0);
  for (std::size_t t = 0; t < N; ++t) prefix[t + 1] = prefix[t] + static_cast<double>(sorted_counts[t]);
  const double target = prefix[N] / static_cast<double>(groups);

  // reach[g][j]: prefix j reachable with exactly g groups
  auto feasible = [&](double dev, std::vector<std::vector<char>>* reach_out) {
    std::vector<std::vector<char>> reach(groups + 1, std::vector<char>(N + 1, 0));
    reach[0][0] = 1;
    const double eps = 1e-9 * std::max(1.0, prefix[N]);
    for (std::size_t g = 1; g <= groups; ++g) {
      std::vector<int> diff(N + 2, 0);
      for (std::size_t i = 0; i <= N; ++i) {
        if (!reach[g - 1][i]) continue;
        const double lo = prefix[i] + target - dev - eps;
        const double hi = prefix[i] + target + dev + eps;
        auto first = std::lower_bound(prefix.begin() + static_cast<long>(i) + 1, prefix.end(), lo);
        auto last = std::upper_bound(prefix.begin() + static_cast<long>(i) + 1, prefix.end(), hi);
        if (first >= last) continue;
        ++diff[static_cast<std::size_t>(first - prefix.begin())];
        --diff[static_cast<std::size_t>(last - prefix.begin())];
      }
      int run = 0;
      for (std::size_t j = 0; j <= N; ++j) {
        run += diff[j];
        reach[g][j] = run > 0;
      }
    }
    const bool ok = reach[groups][N] != 0;
    if (ok && reach_out) *reach_out = std::move(reach);
    return ok;
  };

  double lo = 0.0, hi = prefix[N] + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, prefix[N]); ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid, nullptr) ? hi : lo) = mid;
  }
  std::vector<std::vector<char>> reach;
  feasible(hi, &reach);
  const double eps = 1e-9 * std::max(1.0, prefix[N]);
  std::vector<std::size_t> cuts(groups - 1);
  std::size_t j = N;
  for (std::size_t g = groups; g >= 2; --g) {
    // latest predecessor that is reachable and lands on j within the deviation
    std::size_t chosen = 0;
    bool found = false;
    for (std::size_t i = j; i-- > 0;) {
      if (!reach[g - 1][i]) continue;
      const double mass = prefix[j] - prefix[i];
      if (std::abs(mass - target) <= hi + eps) {
        chosen = i;
        found = true;
        break;
      }
    }
    if (!found) throw NumericError("sparsity groups: partition reconstruction failed");
    cuts[g - 2] = chosen;
    j = chosen;
  }
  return cuts;
}

// Group (1..groups) of every user, 1 = sparsest; users ordered by (count, index).
inline std::vector<std::uint32_t> sparsity_groups(std::span<const std::uint64_t> counts, std::size_t groups = 5) {
  const auto with = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
  if (static_cast<std::size_t>(with) < groups) {
    throw InputError("sparsity groups: fewer than " + std::to_string(groups) + " users with interactions");
  }
  std::vector<std::uint32_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return counts[a] < counts[b]; });
  std::vector<std::uint64_t> sorted(counts.size());
  for (std::size_t t = 0; t < order.size(); ++t) sorted[t] = counts[order[t]];
  auto cuts = balanced_cuts(sorted, groups);
  std::vector<std::uint32_t> group(counts.size(), 0);
  std::size_t g = 0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    while (g < cuts.size() && t >= cuts[g]) ++g;
    group[order[t]] = static_cast<std::uint32_t>(g + 1);
  }
  return group;
}

// Per-group metric means for one direction; instances are assigned by anchor.
inline std::vector<GroupMetrics> sparsity_breakdown(std::span<const EvalInstance> instances,
                                                    std::span<const RankMetrics> metrics, Side side,
                                                    std::span<const std::uint64_t> counts, std::size_t groups = 5) {
  const auto group_of = sparsity_groups(counts, groups);
  const Direction dir = side == Side::Candidate ? Direction::RankJobsForCandidate : Direction::RankCandidatesForJob;
  std::vector<GroupMetrics> out(groups);
  std::vector<std::vector<RankMetrics>> per(groups);
  for (std::size_t g = 0; g < groups; ++g) out[g].group = static_cast<std::uint32_t>(g + 1);
  for (std::size_t u = 0; u < counts.size(); ++u) {
    auto& gm = out[group_of[u] - 1];
    ++gm.users;
    gm.interactions += counts[u];
  }
  for (std::size_t t = 0; t < instances.size(); ++t) {
    if (instances[t].direction != dir) continue;
    per[group_of.at(instances[t].anchor) - 1].push_back(metrics[t]);
  }
  for (std::size_t g = 0; g < groups; ++g) out[g].metrics = mean_of(per[g]);
  return out;
}

// ---------------------------------------------------------------------------
// Report output

namespace detail {
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace detail

inline void write_report_tsv(std::ostream& os, const RankingReport& r, std::span<const std::string> header_comments = {}) {
  for (const auto& c : header_comments) os << "# " << c << '\n';
  const bool groups = !r.candidate_groups.empty() || !r.job_groups.empty();
  os << "direction\t" << (groups ? "group\t" : "") << "metric\tvalue\n";
  const std::string k = std::to_string(r.k);
  auto rows = [&](std::string_view dir, std::string_view group, const MetricMeans& m) {
    auto line = [&](const std::string& metric, const std::string& value) {
      os << dir << '\t';
      if (groups) os << group << '\t';
      os << metric << '\t' << value << '\n';
    };
    line("recall@" + k, detail::fmt_double(m.recall));
    line("precision@" + k, detail::fmt_double(m.precision));
    line("ndcg@" + k, detail::fmt_double(m.ndcg));
    line("mrr", detail::fmt_double(m.mrr));
    line("count", std::to_string(m.count));
  };
  rows("candidate", "all", r.candidate);
  rows("job", "all", r.job);
  for (const auto& g : r.candidate_groups) rows("candidate", "G" + std::to_string(g.group), g.metrics);
  for (const auto& g : r.job_groups) rows("job", "G" + std::to_string(g.group), g.metrics);
}

inline std::string format_report_table(const RankingReport& r) {
  std::ostringstream os;
  const std::string k = std::to_string(r.k);
  os << std::left << std::setw(12) << "direction" << std::setw(8) << "group" << std::setw(11) << ("R@" + k)
     << std::setw(11) << ("P@" + k) << std::setw(11) << ("NDCG@" + k) << std::setw(11) << "MRR"
     << "count\n";
  auto row = [&](std::string_view dir, const std::string& group, const MetricMeans& m) {
    os << std::left << std::setw(12) << dir << std::setw(8) << group << std::setw(11) << detail::fmt_double(m.recall)
       << std::setw(11) << detail::fmt_double(m.precision) << std::setw(11) << detail::fmt_double(m.ndcg)
       << std::setw(11) << detail::fmt_double(m.mrr) << m.count << "\n";
  };
  row("candidate", "all", r.candidate);
  row("job", "all", r.job);
  for (const auto& g : r.candidate_groups) row("candidate", "G" + std::to_string(g.group), g.metrics);
  for (const auto& g : r.job_groups) row("job", "G" + std::to_string(g.group), g.metrics);
  return os.str();
}

}  // namespace dpgnn
