#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>

namespace dpgnn {

enum class Side : std::uint8_t { Candidate, Job };

constexpr std::string_view to_string(Side s) {
  return s == Side::Candidate ? "candidate" : "job";
}

struct UserRef {
  Side side = Side::Candidate;
  std::uint32_t index = 0;

  friend bool operator==(const UserRef&, const UserRef&) = default;
};

// A (candidate, job) pair. Apply and match sets are keyed by this; reach-out
// sets are also stored as (candidate, job) even though the job initiated.
struct Pair {
  std::uint32_t candidate = 0;
  std::uint32_t job = 0;

  friend auto operator<=>(const Pair&, const Pair&) = default;
};

inline std::uint64_t pair_key(Pair p) {
  return (static_cast<std::uint64_t>(p.candidate) << 32) | p.job;
}

}  // namespace dpgnn

template <>
struct std::hash<dpgnn::Pair> {
  std::size_t operator()(dpgnn::Pair p) const noexcept {
    return std::hash<std::uint64_t>{}(dpgnn::pair_key(p));
  }
};
