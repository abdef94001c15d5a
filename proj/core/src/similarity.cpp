#include "cleaner/similarity.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace cleaner::similarity {

namespace {

// Positions of each byte value in b, ascending. Built once per top-level
// query and shared by every recursive range search.
struct PositionIndex {
  std::array<std::vector<size_t>, 256> positions;

  explicit PositionIndex(std::string_view b) {
    for (size_t j = 0; j < b.size(); ++j) {
      positions[static_cast<unsigned char>(b[j])].push_back(j);
    }
  }
};

// Core finder. j2len[j - b_lo + 1] holds the length of the longest common
// suffix ending at (i, j); a strictly-greater update rule yields the
// leftmost-longest winner.
MatchBlock find_longest(std::string_view a, const PositionIndex& index,
                        size_t a_lo, size_t a_hi, size_t b_lo, size_t b_hi) {
  MatchBlock best{a_lo, b_lo, 0};
  const size_t width = b_hi - b_lo + 1;
  std::vector<size_t> j2len(width, 0);
  std::vector<size_t> next(width, 0);
  for (size_t i = a_lo; i < a_hi; ++i) {
    std::fill(next.begin(), next.end(), 0);
    const auto& js = index.positions[static_cast<unsigned char>(a[i])];
    const auto first = std::lower_bound(js.begin(), js.end(), b_lo);
    for (auto it = first; it != js.end() && *it < b_hi; ++it) {
      const size_t j = *it;
      const size_t k = j2len[j - b_lo] + 1;
      next[j - b_lo + 1] = k;
      if (k > best.size) {
        best = MatchBlock{i - k + 1, j - k + 1, k};
      }
    }
    std::swap(j2len, next);
  }
  return best;
}

}  // namespace

MatchBlock longest_matching_block(std::string_view a, std::string_view b,
                                  size_t a_lo, size_t a_hi,
                                  size_t b_lo, size_t b_hi) {
  if (a_hi > a.size() || b_hi > b.size() || a_lo > a_hi || b_lo > b_hi) {
    throw std::out_of_range("longest_matching_block: range out of bounds");
  }
  PositionIndex index(b);
  return find_longest(a, index, a_lo, a_hi, b_lo, b_hi);
}

std::vector<MatchBlock> matching_blocks(std::string_view a, std::string_view b) {
  PositionIndex index(b);
  std::vector<MatchBlock> found;
  std::vector<std::array<size_t, 4>> pending{{0, a.size(), 0, b.size()}};
  while (!pending.empty()) {
    const auto [a_lo, a_hi, b_lo, b_hi] = pending.back();
    pending.pop_back();
    const MatchBlock block = find_longest(a, index, a_lo, a_hi, b_lo, b_hi);
    if (block.size == 0) continue;
    found.push_back(block);
    if (a_lo < block.a_start && b_lo < block.b_start) {
      pending.push_back({a_lo, block.a_start, b_lo, block.b_start});
    }
    if (block.a_start + block.size < a_hi && block.b_start + block.size < b_hi) {
      pending.push_back({block.a_start + block.size, a_hi,
                         block.b_start + block.size, b_hi});
    }
  }
  std::sort(found.begin(), found.end(), [](const MatchBlock& x, const MatchBlock& y) {
    return std::tie(x.a_start, x.b_start, x.size) < std::tie(y.a_start, y.b_start, y.size);
  });

  // Merge blocks that are adjacent in both sequences.
  std::vector<MatchBlock> merged;
  for (const MatchBlock& block : found) {
    if (!merged.empty() && merged.back().a_start + merged.back().size == block.a_start &&
        merged.back().b_start + merged.back().size == block.b_start) {
      merged.back().size += block.size;
    } else {
      merged.push_back(block);
    }
  }
  merged.push_back(MatchBlock{a.size(), b.size(), 0});
  return merged;
}

double ratio(std::string_view a, std::string_view b) {
  const size_t denom = a.size() + b.size();
  if (denom == 0) return 1.0;
  size_t matched = 0;
  for (const MatchBlock& block : matching_blocks(a, b)) matched += block.size;
  return 2.0 * static_cast<double>(matched) / static_cast<double>(denom);
}

}  // namespace cleaner::similarity
