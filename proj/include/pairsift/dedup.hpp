#pragma once

#include "pairsift/image.hpp"
#include "pairsift/types.hpp"

#include <bit>
#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

namespace pairsift {

/// DCT perceptual hash. Bit k = 8u + v (u, v in 0..7 over the low-frequency
/// DCT block) is stored at position 63 - k, so the DC coefficient maps to
/// the most significant bit.
struct PHash64 {
  std::uint64_t bits = 0;

  friend bool operator==(const PHash64&, const PHash64&) = default;
};

/// Luminance-convert, bilinear-resize to 32x32, 2-D DCT-II, keep the 8x8
/// lowest-frequency block, threshold each coefficient against the lower
/// median of all 64. Coefficients below 1e-10 of the block's max magnitude
/// are flushed to zero first so degenerate inputs (e.g. constant images)
/// hash identically regardless of summation order.
PHash64 phash64(const ImageBuffer& image);

/// FNV-1a 64 over the normalized caption: ASCII-lowercased, trimmed, with
/// internal whitespace runs collapsed to single spaces.
std::uint64_t text_hash(std::string_view caption);

inline int hamming_distance(std::uint64_t a, std::uint64_t b) {
  return std::popcount(a ^ b);
}

enum class DedupMode { kImage, kText, kImageAndText };

struct DedupConfig {
  int radius = 2;  // Hamming radius d, 0..16
  DedupMode mode = DedupMode::kImage;
  OperatorId alignment_column = "clip";
};

/// Non-empty member set; groups partition the hashed corpus.
struct DuplicateGroup {
  std::vector<SampleId> member_ids;  // sorted ascending
};

struct DedupHashes {
  std::map<SampleId, std::uint64_t> image;
  std::map<SampleId, std::uint64_t> text;
};

/// Transitive closure of the duplicate relation. Image mode: Hamming
/// distance <= radius, with candidate pairs found by splitting the 64 bits
/// into radius+1 contiguous chunks (pairs sharing any chunk are verified
/// exactly). Text mode: exact text-hash equality. image_and_text: every
/// edge must satisfy both. Returned groups are sorted by first member id.
std::vector<DuplicateGroup> cluster_duplicates(const DedupHashes& hashes,
                                               const DedupConfig& config);

/// One survivor per group: highest alignment score, missing scores ranking
/// below all present ones, ties by ascending id. Order follows the group
/// order of the input.
std::vector<SampleId> retain_best(const std::vector<DuplicateGroup>& groups,
                                  const std::map<SampleId, double>& alignment);

}  // namespace pairsift
