#pragma once

#include <cstdint>
#include <string>

#include "seqnat/core.hpp"
#include "seqnat/error.hpp"

namespace seqnat::detail {

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

/// vocab^positions, refusing anything above the enumeration limit.
inline std::uint64_t checked_space(std::size_t vocab, std::size_t positions) {
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < positions; ++i) {
    space *= vocab;
    if (space > kEnumerationLimit) {
      throw BoundExceeded("enumeration of " + std::to_string(vocab) + "^" + std::to_string(positions) +
                          " sentences exceeds the bound of 1e6");
    }
  }
  return space;
}

/// Advances `y` as a base-V odometer over every position except `fixed`
/// (pass y.size() to enumerate all). Returns false after the last one.
inline bool next_sentence(Sentence& y, std::size_t vocab, std::size_t fixed) {
  for (std::size_t t = y.size(); t-- > 0;) {
    if (t == fixed) continue;
    if (static_cast<std::size_t>(++y[t]) < vocab) return true;
    y[t] = 0;
  }
  return false;
}

}  // namespace seqnat::detail
