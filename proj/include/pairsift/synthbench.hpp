#pragma once

#include "pairsift/corpus.hpp"
#include "pairsift/image.hpp"
#include "pairsift/rng.hpp"
#include "pairsift/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pairsift::synth {

struct OperatorModel {
  std::string name;
  bool informative = true;
  double mean_keep = 0.60;
  double mean_drop = 0.40;
  double noise_std = 0.20;
  double missing_rate = 0.05;
};

struct DuplicatePlan {
  int count = 0;     // planted duplicate groups
  int min_size = 2;  // group sizes drawn uniformly from [min_size, max_size]
  int max_size = 4;
  int radius = 2;    // members stay within this pHash Hamming radius of the base
};

struct SynthConfig {
  int n = 10000;
  double prior = 0.5;
  std::vector<OperatorModel> operators;
  DuplicatePlan duplicates{200, 2, 4, 2};
  int image_width = 16;
  int image_height = 16;
  std::uint64_t seed = 0;
  std::string id_prefix = "s";
  int force_label = -1;  // 0 or 1 pins every latent label; used for eval pools
};

/// Five informative operators with decreasing class separation plus two
/// pure-noise columns.
std::vector<OperatorModel> default_operators();

struct GroundTruth {
  std::map<SampleId, int> labels;         // latent quality, 1 = keep-worthy
  std::map<SampleId, int> planted_group;  // only planted members appear
};

struct SynthCorpus {
  Manifest manifest;
  ScoreTable scores;
  DetectionSet detections;
  GroundTruth truth;
  std::map<SampleId, ImageBuffer> images;
};

/// Latent labels ~ Bernoulli(prior); informative operator scores are the
/// class mean plus Gaussian noise, uninformative ones Gaussian noise around
/// zero; cells go missing at each operator's missing_rate. Planted duplicate
/// groups share a base image perturbed within the configured hash radius
/// (verified against the actual hash, falling back to an exact copy).
/// Bit-deterministic per seed.
SynthCorpus generate(const SynthConfig& config);

/// Writes manifest.jsonl, scores.csv, detections.jsonl, truth.csv and
/// images/<id>.pgm beneath dir. Manifest image paths are relative to dir.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

struct SynthMetrics {
  double precision = 0.0;  // fraction of kept with latent label 1
  double recall = 0.0;
  double auc = 0.0;        // of the supplied posteriors against the labels
};

SynthMetrics evaluate(const std::vector<SampleId>& kept,
                      const std::map<SampleId, double>& posteriors,
                      const GroundTruth& truth);

/// Rank-based AUC (ties averaged) of scores against binary labels keyed by
/// id; every scored id must carry a label and both classes must occur.
double auc_score(const std::map<SampleId, double>& scores,
                 const std::map<SampleId, int>& labels);

/// Uniform-noise image helpers used for duplicate planting; exposed for
/// fixture construction in tests.
ImageBuffer random_image(int width, int height, SplitMix64& rng);
ImageBuffer near_duplicate(const ImageBuffer& base, SplitMix64& rng, int radius);

}  // namespace pairsift::synth
