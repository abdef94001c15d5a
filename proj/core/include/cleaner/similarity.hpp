#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace cleaner::similarity {

struct MatchBlock {
  size_t a_start = 0;
  size_t b_start = 0;
  size_t size = 0;

  bool operator==(const MatchBlock&) const = default;
};

// Leftmost-longest common contiguous block within the half-open ranges
// [a_lo, a_hi) x [b_lo, b_hi): of all maximal blocks, the one starting
// earliest in `a`, then earliest in `b`. Size 0 (anchored at the range
// starts) when the ranges share no byte.
MatchBlock longest_matching_block(std::string_view a, std::string_view b,
                                  size_t a_lo, size_t a_hi,
                                  size_t b_lo, size_t b_hi);

// Full gestalt decomposition: recursively split around each leftmost-longest
// block, merge adjacent blocks, and terminate with a size-0 sentinel at
// (len(a), len(b)). Blocks are strictly increasing in both coordinates and
// non-overlapping. Junk heuristics are deliberately not implemented;
// comparison is per byte.
std::vector<MatchBlock> matching_blocks(std::string_view a, std::string_view b);

// 2*M / (|a|+|b|) where M is the total matched size; 1.0 when both inputs
// are empty.
double ratio(std::string_view a, std::string_view b);

}  // namespace cleaner::similarity
