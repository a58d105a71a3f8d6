#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pairsift/dedup.hpp"
#include "pairsift/rng.hpp"
#include "pairsift/synthbench.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <set>

using namespace pairsift;

namespace {

ImageBuffer gray_image(int w, int h, std::uint8_t value) {
  ImageBuffer img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.pixels.assign(static_cast<std::size_t>(w) * h, value);
  return img;
}

std::vector<std::vector<SampleId>> as_id_lists(const std::vector<DuplicateGroup>& groups) {
  std::vector<std::vector<SampleId>> out;
  for (const auto& g : groups) out.push_back(g.member_ids);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("text_hash") {
  SUBCASE("empty input is the FNV-1a offset basis") {
    CHECK(text_hash("") == 0xcbf29ce484222325ULL);
  }
  SUBCASE("normalization folds case and whitespace") {
    CHECK(text_hash("A  Dog ") == text_hash("a dog"));
    CHECK(text_hash("\t a\nb ") == text_hash("a b"));
  }
  SUBCASE("distinct strings hash differently, matching a reference FNV-1a") {
    CHECK(text_hash("cat") != text_hash("dog"));
    CHECK(text_hash("cat") == oracles::fnv1a("cat"));
    CHECK(text_hash("dog") == oracles::fnv1a("dog"));
  }
}

TEST_CASE("phash64 constant image sets only the DC bit") {
  const ImageBuffer img = gray_image(32, 32, 128);
  CHECK(phash64(img).bits == 0x8000000000000000ULL);
  CHECK(oracles::phash_direct(img) == 0x8000000000000000ULL);
}

TEST_CASE("phash64 rejects degenerate buffers") {
  ImageBuffer empty;
  CHECK_THROWS(phash64(empty));
  ImageBuffer short_pixels = gray_image(4, 4, 0);
  short_pixels.pixels.pop_back();
  CHECK_THROWS(phash64(short_pixels));
}

TEST_CASE("phash64 is deterministic and matches the direct DCT oracle") {
  SplitMix64 rng(2024);
  for (int t = 0; t < 12; ++t) {
    const int w = 8 + static_cast<int>(rng.below(56));
    const int h = 8 + static_cast<int>(rng.below(56));
    ImageBuffer img = gray_image(w, h, 0);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    const PHash64 once = phash64(img);
    CHECK(once == phash64(img));
    CHECK(once.bits == oracles::phash_direct(img));
  }
}

TEST_CASE("phash64 differs on a photometric inverse") {
  SplitMix64 rng(55);
  ImageBuffer img = gray_image(24, 24, 0);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  ImageBuffer inverse = img;
  for (auto& p : inverse.pixels) p = static_cast<std::uint8_t>(255 - p);
  CHECK(phash64(img).bits == oracles::phash_direct(img));
  CHECK(phash64(inverse).bits == oracles::phash_direct(inverse));
  CHECK(hamming_distance(phash64(img).bits, phash64(inverse).bits) >= 1);
}

TEST_CASE("hamming_distance basics") {
  SplitMix64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const std::uint64_t a = rng.next(), b = rng.next();
    CHECK(hamming_distance(a, a) == 0);
    CHECK(hamming_distance(a, b) == hamming_distance(b, a));
  }
  CHECK(hamming_distance(0x0F, 0x0E) == 1);
  CHECK(hamming_distance(0x0F, 0xF0) == 8);
}

TEST_CASE("cluster_duplicates image mode") {
  SUBCASE("radius separates nearby from distant hashes") {
    DedupHashes hashes;
    hashes.image = {{"a", 0x0F}, {"b", 0x0E}, {"c", 0xF0}};
    const auto groups = cluster_duplicates(hashes, {1, DedupMode::kImage, "clip"});
    CHECK(as_id_lists(groups) ==
          std::vector<std::vector<SampleId>>{{"a", "b"}, {"c"}});
  }
  SUBCASE("transitive closure chains near-duplicates") {
    DedupHashes hashes;
    hashes.image = {{"a", 0b000}, {"b", 0b001}, {"c", 0b011}};
    const auto groups = cluster_duplicates(hashes, {1, DedupMode::kImage, "clip"});
    CHECK(as_id_lists(groups) ==
          std::vector<std::vector<SampleId>>{{"a", "b", "c"}});
  }
  SUBCASE("radius zero gives exact-hash classes") {
    DedupHashes hashes;
    hashes.image = {{"a", 7}, {"b", 7}, {"c", 9}};
    const auto groups = cluster_duplicates(hashes, {0, DedupMode::kImage, "clip"});
    CHECK(as_id_lists(groups) ==
          std::vector<std::vector<SampleId>>{{"a", "b"}, {"c"}});
  }
  SUBCASE("radius out of range") {
    DedupHashes hashes;
    hashes.image = {{"a", 1}};
    CHECK_THROWS_AS(cluster_duplicates(hashes, {17, DedupMode::kImage, "clip"}),
                    std::invalid_argument);
    CHECK_THROWS_AS(cluster_duplicates(hashes, {-1, DedupMode::kImage, "clip"}),
                    std::invalid_argument);
  }
  SUBCASE("no hashes at all") {
    CHECK_THROWS(cluster_duplicates({}, {2, DedupMode::kImage, "clip"}));
  }
}

TEST_CASE("cluster_duplicates equals brute force on random corpora") {
  SplitMix64 rng(77);
  for (int radius : {0, 1, 2, 3}) {
    for (int trial = 0; trial < 3; ++trial) {
      DedupHashes hashes;
      const int n = 500 + static_cast<int>(rng.below(1500));
      std::vector<std::uint64_t> pool;
      for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "h%05d", i);
        std::uint64_t value;
        if (!pool.empty() && rng.uniform() < 0.3) {
          // Perturb an existing hash by up to `radius`+1 bits to create
          // near-duplicates and borderline pairs.
          value = pool[rng.below(pool.size())];
          const int flips = static_cast<int>(rng.below(radius + 2));
          for (int f = 0; f < flips; ++f) value ^= 1ULL << rng.below(64);
        } else {
          value = rng.next();
        }
        pool.push_back(value);
        hashes.image[buf] = value;
      }
      const auto fast =
          cluster_duplicates(hashes, {radius, DedupMode::kImage, "clip"});
      CHECK(as_id_lists(fast) == oracles::cluster_brute_force(hashes.image, radius));
    }
  }
}

TEST_CASE("cluster_duplicates text and combined modes") {
  DedupHashes hashes;
  hashes.image = {{"a", 0x00}, {"b", 0x01}, {"c", 0x02}};
  hashes.text = {{"a", 111}, {"b", 111}, {"c", 222}};

  SUBCASE("text mode groups by exact hash equality") {
    const auto groups = cluster_duplicates(hashes, {2, DedupMode::kText, "clip"});
    CHECK(as_id_lists(groups) ==
          std::vector<std::vector<SampleId>>{{"a", "b"}, {"c"}});
  }
  SUBCASE("combined mode requires both conditions per edge") {
    // a-b: image distance 1 and equal text -> duplicates.
    // a-c/b-c: image close but text differs -> kept apart.
    const auto groups =
        cluster_duplicates(hashes, {2, DedupMode::kImageAndText, "clip"});
    CHECK(as_id_lists(groups) ==
          std::vector<std::vector<SampleId>>{{"a", "b"}, {"c"}});

    DedupHashes far = hashes;
    far.image["b"] = ~0ULL;  // same caption, very different image
    const auto groups2 =
        cluster_duplicates(far, {2, DedupMode::kImageAndText, "clip"});
    CHECK(as_id_lists(groups2) ==
          std::vector<std::vector<SampleId>>{{"a"}, {"b"}, {"c"}});
  }
}

TEST_CASE("retain_best") {
  const std::vector<DuplicateGroup> groups = {{{"a", "b", "c"}}};
  SUBCASE("keeps the highest alignment") {
    CHECK(retain_best(groups, {{"a", 0.31}, {"b", 0.29}, {"c", 0.12}}) ==
          std::vector<SampleId>{"a"});
  }
  SUBCASE("ties break by ascending id") {
    CHECK(retain_best({{{"a", "b"}}}, {{"a", 0.5}, {"b", 0.5}}) ==
          std::vector<SampleId>{"a"});
  }
  SUBCASE("singleton keeps itself") {
    CHECK(retain_best({{{"z"}}}, {}) == std::vector<SampleId>{"z"});
  }
  SUBCASE("missing scores rank below any present score") {
    CHECK(retain_best(groups, {{"c", 0.01}}) == std::vector<SampleId>{"c"});
  }
  SUBCASE("empty group is an error") {
    CHECK_THROWS_AS(retain_best({{{}}}, {}), std::invalid_argument);
  }
  SUBCASE("result does not depend on member enumeration order") {
    const std::map<SampleId, double> align = {{"a", 0.2}, {"b", 0.9}, {"c", 0.9}};
    CHECK(retain_best({{{"c", "a", "b"}}}, align) ==
          retain_best({{{"a", "b", "c"}}}, align));
    CHECK(retain_best({{{"c", "a", "b"}}}, align) == std::vector<SampleId>{"b"});
  }
}

TEST_CASE("kept set covers every group exactly once") {
  SplitMix64 rng(123);
  DedupHashes hashes;
  std::uint64_t prev = 0;
  for (int i = 0; i < 400; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "k%04d", i);
    // Every third id is a near-duplicate of its predecessor.
    const std::uint64_t v = (i % 3 == 1) ? (prev ^ 1ULL) : rng.next();
    hashes.image[buf] = v;
    prev = v;
  }
  const auto groups = cluster_duplicates(hashes, {2, DedupMode::kImage, "clip"});
  std::map<SampleId, double> alignment;
  for (const auto& [id, _] : hashes.image) alignment[id] = rng.uniform();
  const auto kept = retain_best(groups, alignment);
  CHECK(kept.size() == groups.size());

  std::set<SampleId> kept_set(kept.begin(), kept.end());
  for (const auto& group : groups) {
    int kept_members = 0;
    for (const auto& id : group.member_ids) kept_members += kept_set.count(id);
    CHECK(kept_members == 1);  // every discarded id shares its group's one survivor
  }
}

TEST_CASE("planted near-duplicate images cluster with their base") {
  SplitMix64 rng(31);
  const ImageBuffer base = synth::random_image(16, 16, rng);
  const ImageBuffer dup = synth::near_duplicate(base, rng, 2);
  DedupHashes hashes;
  hashes.image["base"] = phash64(base).bits;
  hashes.image["dup"] = phash64(dup).bits;
  hashes.image["other"] = phash64(synth::random_image(16, 16, rng)).bits;
  const auto groups = cluster_duplicates(hashes, {2, DedupMode::kImage, "clip"});
  CHECK(groups.size() == 2);
}
