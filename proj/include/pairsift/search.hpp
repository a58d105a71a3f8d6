#pragma once

#include "pairsift/corpus.hpp"
#include "pairsift/labelmodel.hpp"
#include "pairsift/types.hpp"
#include "pairsift/weaklabel.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pairsift {

/// Gold labels for the tiny evaluation set: 1 = clean, 0 = noisy. Used only
/// to evaluate fitted models, never to fit them.
struct TinyEval {
  std::map<SampleId, int> labels;

  bool has_both_classes() const;
};

struct CompositeWeights {
  double alpha1 = 1.0;   // F1 term, must be > 0
  double alpha2 = 0.25;  // overlap
  double alpha3 = 0.25;  // conflict (subtracted)
  double alpha4 = 0.25;  // coverage
};

/// One option index per grid operator; candidates are 0..k-1 and k means
/// "operator excluded", which also makes exclusion sort last in the
/// lexicographic tie order.
struct CandidateCombination {
  std::vector<int> choices;

  int included_count(const LFCandidateGrid& grid) const;
  std::vector<LFSpec> to_lf_specs(const LFCandidateGrid& grid) const;
  std::string encode(const LFCandidateGrid& grid) const;

  friend bool operator==(const CandidateCombination&,
                         const CandidateCombination&) = default;
};

enum class SearchStrategy { kExhaustive, kRandom };

struct SearchConfig {
  SearchStrategy strategy = SearchStrategy::kExhaustive;
  int budget = 64;  // random mode: distinct combinations to evaluate
  std::uint64_t seed = 0;
  double f1_threshold = 0.5;
};

struct SearchRow {
  CandidateCombination combination;
  double f1 = 0.0;
  double coverage = 0.0;
  double overlap = 0.0;
  double conflict = 0.0;
  double metric = 0.0;
};

struct SearchResult {
  CandidateCombination best;
  FitResult best_fit;      // fitted on the tiny matrix of the winner
  double best_metric = 0.0;
  std::vector<SearchRow> rows;  // every evaluated combination
};

/// Concatenates clean (labeled 1) and noisy (labeled 0) pools, then swaps
/// captions pairwise within a seeded random even-sized subset of
/// floor(swap_fraction * |noisy|) noisy samples to inject cross-modal noise.
std::pair<Manifest, TinyEval> build_tiny_eval(const Manifest& clean,
                                              const Manifest& noisy,
                                              double swap_fraction,
                                              std::uint64_t seed);

/// F1 of the clean class under "predict Keep iff score >= threshold";
/// 0 when precision + recall is 0.
double f1_tiny(const std::map<SampleId, double>& scores, const TinyEval& gold,
               double threshold);

/// M = a1 * f1 + a2 * overlap - a3 * conflict + a4 * coverage.
double composite_metric(double f1, const Diagnostics& diag,
                        const CompositeWeights& weights);

/// For each candidate combination: build the tiny label matrix, fit, score
/// the tiny rows, take F1 against the gold labels, compute diagnostics on
/// the full-corpus matrix, and combine into M. Returns the argmax, ties
/// broken by lexicographically smallest choice vector. Exhaustive mode
/// enumerates every combination with at least one included operator; random
/// mode samples `budget` distinct combinations from the seed.
SearchResult search_combinations(const LFCandidateGrid& grid,
                                 const ScoreTable& full_scores,
                                 const ScoreTable& tiny_scores,
                                 const TinyEval& tiny,
                                 const CompositeWeights& weights,
                                 const FitConfig& fit_config,
                                 const SearchConfig& search_config);

}  // namespace pairsift
