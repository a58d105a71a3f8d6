#include "pairsift/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace pairsift {

namespace {

constexpr int kHashSide = 32;
constexpr int kBlockSide = 8;

// Orthonormal DCT-II basis, built once: B(u, x) = a_u cos((2x+1) u pi / 64).
const Matrix& dct_basis() {
  static const Matrix basis = [] {
    Matrix b(kHashSide, kHashSide);
    const double pi = std::acos(-1.0);
    for (int u = 0; u < kHashSide; ++u) {
      const double alpha =
          u == 0 ? std::sqrt(1.0 / kHashSide) : std::sqrt(2.0 / kHashSide);
      for (int x = 0; x < kHashSide; ++x) {
        b(u, x) = alpha * std::cos((2 * x + 1) * u * pi / (2.0 * kHashSide));
      }
    }
    return b;
  }();
  return basis;
}

Matrix resize_bilinear(const Matrix& src, int out_h, int out_w) {
  const Eigen::Index in_h = src.rows();
  const Eigen::Index in_w = src.cols();
  Matrix dst(out_h, out_w);
  const double sy = static_cast<double>(in_h) / out_h;
  const double sx = static_cast<double>(in_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
    const Eigen::Index y0 = static_cast<Eigen::Index>(fy);
    const Eigen::Index y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
      const Eigen::Index x0 = static_cast<Eigen::Index>(fx);
      const Eigen::Index x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = src(y0, x0) + wx * (src(y0, x1) - src(y0, x0));
      const double bot = src(y1, x0) + wx * (src(y1, x1) - src(y1, x0));
      dst(y, x) = top + wy * (bot - top);
    }
  }
  return dst;
}

struct UnionFind {
  std::vector<std::size_t> parent;

  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }

  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Contiguous chunk boundaries splitting 64 bits into `parts` nearly equal
// pieces; the leading chunks take the extra bit.
std::vector<std::pair<int, int>> chunk_layout(int parts) {
  std::vector<std::pair<int, int>> chunks;
  const int base = 64 / parts;
  const int extra = 64 % parts;
  int offset = 0;
  for (int i = 0; i < parts; ++i) {
    const int width = base + (i < extra ? 1 : 0);
    chunks.emplace_back(offset, width);
    offset += width;
  }
  return chunks;
}

std::uint64_t chunk_value(std::uint64_t hash, std::pair<int, int> chunk) {
  const auto [offset, width] = chunk;
  const std::uint64_t mask =
      width == 64 ? ~0ULL : ((1ULL << width) - 1ULL);
  return (hash >> offset) & mask;
}

}  // namespace

PHash64 phash64(const ImageBuffer& image) {
  const Matrix lum = luminance_plane(image);
  const Matrix small = resize_bilinear(lum, kHashSide, kHashSide);
  const Matrix& basis = dct_basis();
  const Matrix coeffs = basis * small * basis.transpose();

  double block[kBlockSide * kBlockSide];
  double max_abs = 0.0;
  for (int u = 0; u < kBlockSide; ++u) {
    for (int v = 0; v < kBlockSide; ++v) {
      block[u * kBlockSide + v] = coeffs(u, v);
      max_abs = std::max(max_abs, std::abs(coeffs(u, v)));
    }
  }
  // Flush numerical dust so degenerate inputs hash identically no matter how
  // the DCT sums were ordered.
  const double floor = 1e-10 * max_abs;
  for (double& c : block) {
    if (std::abs(c) <= floor) c = 0.0;
  }

  double sorted[kBlockSide * kBlockSide];
  std::copy(std::begin(block), std::end(block), std::begin(sorted));
  std::nth_element(std::begin(sorted), std::begin(sorted) + 31, std::end(sorted));
  const double median = sorted[31];  // lower median of 64

  PHash64 hash;
  for (int k = 0; k < kBlockSide * kBlockSide; ++k) {
    if (block[k] > median) {
      hash.bits |= 1ULL << (63 - k);
    }
  }
  return hash;
}

std::uint64_t text_hash(std::string_view caption) {
  // Normalize: ASCII-lowercase, trim, collapse whitespace runs to one space.
  std::string norm;
  norm.reserve(caption.size());
  bool pending_space = false;
  for (unsigned char c : caption) {
    const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                    c == '\v' || c == '\f';
    if (ws) {
      if (!norm.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      norm.push_back(' ');
      pending_space = false;
    }
    norm.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                        : static_cast<char>(c));
  }

  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a offset basis
  for (unsigned char c : norm) {
    h ^= c;
    h *= 0x100000001b3ULL;  // FNV prime
  }
  return h;
}

std::vector<DuplicateGroup> cluster_duplicates(const DedupHashes& hashes,
                                               const DedupConfig& config) {
  if (config.radius < 0 || config.radius > 16) {
    throw std::invalid_argument("dedup radius must be in [0, 16]");
  }

  // Deterministic id universe per mode.
  std::vector<SampleId> ids;
  if (config.mode == DedupMode::kImage) {
    for (const auto& [id, _] : hashes.image) ids.push_back(id);
  } else if (config.mode == DedupMode::kText) {
    for (const auto& [id, _] : hashes.text) ids.push_back(id);
  } else {
    for (const auto& [id, _] : hashes.image) ids.push_back(id);
    for (const auto& [id, _] : hashes.text) {
      if (!hashes.image.count(id)) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
  }
  if (ids.empty()) {
    throw std::invalid_argument("cluster_duplicates: no hashes given");
  }

  UnionFind uf(ids.size());

  const auto image_hash = [&](std::size_t i) { return hashes.image.at(ids[i]); };

  if (config.mode == DedupMode::kImage) {
    // Pigeonhole multi-index: any pair within radius d agrees exactly on at
    // least one of d+1 chunks.
    const auto chunks = chunk_layout(config.radius + 1);
    for (const auto& chunk : chunks) {
      std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        buckets[chunk_value(image_hash(i), chunk)].push_back(i);
      }
      for (const auto& [_, members] : buckets) {
        for (std::size_t a = 0; a < members.size(); ++a) {
          for (std::size_t b = a + 1; b < members.size(); ++b) {
            if (hamming_distance(image_hash(members[a]), image_hash(members[b])) <=
                config.radius) {
              uf.unite(members[a], members[b]);
            }
          }
        }
      }
    }
  } else if (config.mode == DedupMode::kText) {
    std::unordered_map<std::uint64_t, std::size_t> first_with;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::uint64_t h = hashes.text.at(ids[i]);
      auto [it, inserted] = first_with.emplace(h, i);
      if (!inserted) uf.unite(it->second, i);
    }
  } else {
    // Both conditions per edge: exact text equality narrows the candidates,
    // image distance is verified within each text bucket.
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = hashes.text.find(ids[i]);
      if (it == hashes.text.end() || !hashes.image.count(ids[i])) continue;
      buckets[it->second].push_back(i);
    }
    for (const auto& [_, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          if (hamming_distance(image_hash(members[a]), image_hash(members[b])) <=
              config.radius) {
            uf.unite(members[a], members[b]);
          }
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::vector<SampleId>> by_root;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    by_root[uf.find(i)].push_back(ids[i]);
  }
  std::vector<DuplicateGroup> groups;
  groups.reserve(by_root.size());
  for (auto& [_, members] : by_root) {
    std::sort(members.begin(), members.end());
    groups.push_back({std::move(members)});
  }
  std::sort(groups.begin(), groups.end(),
            [](const DuplicateGroup& a, const DuplicateGroup& b) {
              return a.member_ids.front() < b.member_ids.front();
            });
  return groups;
}

std::vector<SampleId> retain_best(const std::vector<DuplicateGroup>& groups,
                                  const std::map<SampleId, double>& alignment) {
  std::vector<SampleId> kept;
  kept.reserve(groups.size());
  for (const DuplicateGroup& group : groups) {
    if (group.member_ids.empty()) {
      throw std::invalid_argument("retain_best: empty duplicate group");
    }
    const SampleId* best = nullptr;
    bool best_scored = false;
    double best_score = 0.0;
    for (const SampleId& id : group.member_ids) {
      auto it = alignment.find(id);
      const bool scored = it != alignment.end() && !is_missing(it->second);
      const double score = scored ? it->second : 0.0;
      bool wins = false;
      if (best == nullptr) {
        wins = true;
      } else if (scored != best_scored) {
        wins = scored;  // any present score outranks missing
      } else if (scored && score != best_score) {
        wins = score > best_score;
      } else {
        wins = id < *best;
      }
      if (wins) {
        best = &id;
        best_scored = scored;
        best_score = score;
      }
    }
    kept.push_back(*best);
  }
  return kept;
}

}  // namespace pairsift
