#pragma once

#include "pairsift/types.hpp"
#include "pairsift/weaklabel.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace pairsift {

/// Two-class generative model over the label matrix: a latent Keep/Drop
/// label per sample, a class prior, and per-LF accuracy (P(vote = truth |
/// vote)) and propensity (P(vote)). Propensity is independent of the latent
/// class, so posteriors depend on accuracies and the prior only.
struct LabelModelParams {
  double prior = 0.5;          // P(latent = Keep), in (0, 1)
  Vector accuracies;           // per LF, clamped to [0.05, 0.95]
  Vector propensities;         // per LF, vote rate

  Eigen::Index lf_count() const { return accuracies.size(); }
};

struct FitConfig {
  double tolerance = 1e-6;     // max absolute accuracy change
  int max_iterations = 1000;
  double init_accuracy = 0.7;
  double init_prior = 0.5;     // class balance; held fixed during EM
  std::uint64_t seed = 0;      // reserved; EM itself is deterministic
};

struct FitResult {
  LabelModelParams params;
  bool converged = false;
  int iterations = 0;
  std::vector<double> log_likelihood;  // one entry per EM iteration
};

/// EM under LF conditional independence. E-step computes per-row posteriors
/// from the current parameters; M-step re-estimates each accuracy as the
/// expected fraction of that LF's votes matching the latent label. The class
/// prior is supplied (init_prior) and held fixed: letting it float lets
/// asymmetric vote marginals saturate it, which inverts accuracies and ruins
/// the ranking. After convergence the label-swap symmetry is resolved by
/// flipping all parameters when the mean accuracy falls below 0.5.
/// Deterministic: identical matrix and config give identical params.
FitResult fit(const LabelMatrix& matrix, const FitConfig& config = {});

/// P(Keep | row) in (0, 1); abstains contribute no evidence.
double posterior(const LabelModelParams& params,
                 const Eigen::Ref<const LabelColumn>& row);

std::map<SampleId, double> score_all(const LabelModelParams& params,
                                     const LabelMatrix& matrix);

struct LfWeights {
  Vector weights;   // accuracies, reported directly
  Vector log_odds;  // ln(a / (1 - a))
};

LfWeights lf_weights(const LabelModelParams& params);

/// Keep votes over non-abstain votes per row; 0.5 when every LF abstains.
std::map<SampleId, double> majority_vote(const LabelMatrix& matrix);

/// Accuracies drawn uniformly from [0.05, 0.95] with a seeded SplitMix64
/// stream; prior 0.5, propensities 1.
LabelModelParams random_params(int lf_count, std::uint64_t seed);

void write_params_json(const FitResult& result, const std::filesystem::path& path);
FitResult load_params_json(const std::filesystem::path& path);

}  // namespace pairsift
