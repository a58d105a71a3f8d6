#include "pairsift/search.hpp"

#include "pairsift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace pairsift {

bool TinyEval::has_both_classes() const {
  bool clean = false, noisy = false;
  for (const auto& [_, label] : labels) {
    (label == 1 ? clean : noisy) = true;
  }
  return clean && noisy;
}

int CandidateCombination::included_count(const LFCandidateGrid& grid) const {
  int count = 0;
  for (std::size_t o = 0; o < choices.size(); ++o) {
    if (choices[o] < static_cast<int>(grid.candidates[o].size())) ++count;
  }
  return count;
}

std::vector<LFSpec> CandidateCombination::to_lf_specs(
    const LFCandidateGrid& grid) const {
  std::vector<LFSpec> lfs;
  for (std::size_t o = 0; o < choices.size(); ++o) {
    const int c = choices[o];
    if (c < static_cast<int>(grid.candidates[o].size())) {
      lfs.push_back(grid.candidates[o][static_cast<std::size_t>(c)]);
    }
  }
  return lfs;
}

std::string CandidateCombination::encode(const LFCandidateGrid& grid) const {
  std::string out;
  for (std::size_t o = 0; o < choices.size(); ++o) {
    if (o) out += ';';
    out += grid.operators[o];
    out += '=';
    if (choices[o] < static_cast<int>(grid.candidates[o].size())) {
      out += std::to_string(choices[o]);
    } else {
      out += 'x';
    }
  }
  return out;
}

std::pair<Manifest, TinyEval> build_tiny_eval(const Manifest& clean,
                                              const Manifest& noisy,
                                              double swap_fraction,
                                              std::uint64_t seed) {
  if (clean.empty() || noisy.empty()) {
    throw std::invalid_argument("build_tiny_eval: both pools must be non-empty");
  }
  if (!(swap_fraction >= 0.0 && swap_fraction <= 1.0)) {
    throw std::invalid_argument("build_tiny_eval: swap_fraction must be in [0,1]");
  }
  for (const SampleRecord& rec : noisy.samples) {
    if (clean.find(rec.id) != nullptr) {
      throw std::runtime_error("build_tiny_eval: id '" + rec.id +
                               "' appears in both pools");
    }
  }

  Manifest combined;
  TinyEval gold;
  combined.samples.reserve(clean.size() + noisy.size());
  for (const SampleRecord& rec : clean.samples) {
    combined.samples.push_back(rec);
    gold.labels[rec.id] = 1;
  }
  const std::size_t noisy_begin = combined.samples.size();
  for (const SampleRecord& rec : noisy.samples) {
    combined.samples.push_back(rec);
    gold.labels[rec.id] = 0;
  }

  // Cross-modal noise: swap captions pairwise within a random even-sized
  // subset of the noisy pool; an odd remainder stays untouched.
  std::size_t swap_count = static_cast<std::size_t>(
      std::floor(swap_fraction * static_cast<double>(noisy.size())));
  swap_count -= swap_count % 2;
  if (swap_count >= 2) {
    std::vector<std::size_t> order(noisy.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(seed);
    rng.shuffle(order);
    for (std::size_t k = 0; k + 1 < swap_count; k += 2) {
      SampleRecord& a = combined.samples[noisy_begin + order[k]];
      SampleRecord& b = combined.samples[noisy_begin + order[k + 1]];
      std::swap(a.caption, b.caption);
    }
  }
  combined.rebuild_index();
  return {std::move(combined), std::move(gold)};
}

double f1_tiny(const std::map<SampleId, double>& scores, const TinyEval& gold,
               double threshold) {
  if (!gold.has_both_classes()) {
    throw std::invalid_argument("f1_tiny: gold labels must contain both classes");
  }
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& [id, label] : gold.labels) {
    auto it = scores.find(id);
    if (it == scores.end()) {
      throw std::runtime_error("f1_tiny: no score for gold id '" + id + "'");
    }
    const bool predicted = it->second >= threshold;
    if (predicted && label == 1) ++tp;
    if (predicted && label == 0) ++fp;
    if (!predicted && label == 1) ++fn;
  }
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double composite_metric(double f1, const Diagnostics& diag,
                        const CompositeWeights& weights) {
  if (!(weights.alpha1 > 0.0) || weights.alpha2 < 0.0 || weights.alpha3 < 0.0 ||
      weights.alpha4 < 0.0) {
    throw std::invalid_argument(
        "composite_metric: alpha1 must be > 0 and the rest >= 0");
  }
  return weights.alpha1 * f1 + weights.alpha2 * diag.overlap -
         weights.alpha3 * diag.conflict + weights.alpha4 * diag.coverage;
}

namespace {

// Option counts per operator including the trailing "excluded" choice.
std::vector<int> option_counts(const LFCandidateGrid& grid) {
  std::vector<int> counts;
  counts.reserve(grid.candidates.size());
  for (const auto& c : grid.candidates) {
    counts.push_back(static_cast<int>(c.size()) + 1);
  }
  return counts;
}

bool all_excluded(const std::vector<int>& choices, const std::vector<int>& counts) {
  for (std::size_t o = 0; o < choices.size(); ++o) {
    if (choices[o] != counts[o] - 1) return false;
  }
  return true;
}

std::vector<CandidateCombination> enumerate_all(const std::vector<int>& counts) {
  std::vector<CandidateCombination> out;
  std::vector<int> choices(counts.size(), 0);
  while (true) {
    if (!all_excluded(choices, counts)) {
      out.push_back({choices});
    }
    // Mixed-radix increment, least-significant digit last, so the list comes
    // out in lexicographic order.
    int pos = static_cast<int>(counts.size()) - 1;
    while (pos >= 0) {
      if (++choices[static_cast<std::size_t>(pos)] <
          counts[static_cast<std::size_t>(pos)]) {
        break;
      }
      choices[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return out;
}

std::vector<CandidateCombination> sample_distinct(const std::vector<int>& counts,
                                                  int budget,
                                                  std::uint64_t seed) {
  // Valid combination count with saturation; exhaustive when it fits the
  // budget.
  double total = 1.0;
  for (int c : counts) total *= static_cast<double>(c);
  total -= 1.0;  // the all-excluded assignment
  if (total <= static_cast<double>(budget)) {
    return enumerate_all(counts);
  }

  SplitMix64 rng(seed);
  std::set<std::vector<int>> seen;
  std::vector<CandidateCombination> out;
  while (static_cast<int>(out.size()) < budget) {
    std::vector<int> choices(counts.size());
    for (std::size_t o = 0; o < counts.size(); ++o) {
      choices[o] = static_cast<int>(
          rng.below(static_cast<std::uint64_t>(counts[o])));
    }
    if (all_excluded(choices, counts)) continue;
    if (seen.insert(choices).second) {
      out.push_back({std::move(choices)});
    }
  }
  return out;
}

}  // namespace

SearchResult search_combinations(const LFCandidateGrid& grid,
                                 const ScoreTable& full_scores,
                                 const ScoreTable& tiny_scores,
                                 const TinyEval& tiny,
                                 const CompositeWeights& weights,
                                 const FitConfig& fit_config,
                                 const SearchConfig& search_config) {
  if (grid.operators.empty() || grid.operators.size() != grid.candidates.size()) {
    throw std::invalid_argument("search: malformed candidate grid");
  }
  bool any_candidate = false;
  for (const auto& c : grid.candidates) any_candidate |= !c.empty();
  if (!any_candidate) {
    throw std::invalid_argument("search: grid yields no valid combination");
  }
  if (!tiny.has_both_classes()) {
    throw std::invalid_argument("search: tiny eval must contain both classes");
  }
  for (const OperatorId& op : grid.operators) {
    if (tiny_scores.column_of(op) < 0) {
      throw std::runtime_error("search: tiny scores missing operator '" + op + "'");
    }
    if (full_scores.column_of(op) < 0) {
      throw std::runtime_error("search: full scores missing operator '" + op + "'");
    }
  }

  const std::vector<int> counts = option_counts(grid);
  std::vector<CandidateCombination> combinations;
  if (search_config.strategy == SearchStrategy::kExhaustive) {
    combinations = enumerate_all(counts);
  } else {
    if (search_config.budget < 1) {
      throw std::invalid_argument("search: random mode needs budget >= 1");
    }
    combinations = sample_distinct(counts, search_config.budget,
                                   search_config.seed);
  }

  SearchResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (const CandidateCombination& comb : combinations) {
    const std::vector<LFSpec> lfs = comb.to_lf_specs(grid);
    const LabelMatrix tiny_matrix = build_matrix(lfs, tiny_scores);

    FitResult fitted;
    try {
      fitted = fit(tiny_matrix, fit_config);
    } catch (const std::exception&) {
      continue;  // e.g. every LF abstains on the tiny set: not rankable
    }
    const std::map<SampleId, double> tiny_posts =
        score_all(fitted.params, tiny_matrix);
    const double f1 = f1_tiny(tiny_posts, tiny, search_config.f1_threshold);

    const LabelMatrix full_matrix = build_matrix(lfs, full_scores);
    const Diagnostics diag = diagnostics(full_matrix);
    const double metric = composite_metric(f1, diag, weights);

    result.rows.push_back(
        {comb, f1, diag.coverage, diag.overlap, diag.conflict, metric});

    const bool better =
        !have_best || metric > result.best_metric ||
        (metric == result.best_metric &&
         std::lexicographical_compare(comb.choices.begin(), comb.choices.end(),
                                      result.best.choices.begin(),
                                      result.best.choices.end()));
    if (better) {
      have_best = true;
      result.best = comb;
      result.best_fit = std::move(fitted);
      result.best_metric = metric;
    }
  }

  if (!have_best) {
    throw std::runtime_error("search: no combination could be evaluated");
  }
  return result;
}

}  // namespace pairsift
