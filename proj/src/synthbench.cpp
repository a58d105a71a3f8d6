#include "pairsift/synthbench.hpp"

#include "pairsift/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace pairsift::synth {

std::vector<OperatorModel> default_operators() {
  return {
      {"clip", true, 0.59, 0.41, 0.20, 0.05},
      {"hclip", true, 0.59, 0.41, 0.20, 0.05},
      {"vclip", true, 0.58, 0.42, 0.20, 0.05},
      {"icc", true, 0.57, 0.43, 0.20, 0.05},
      {"language", true, 0.56, 0.44, 0.20, 0.05},
      {"noise_a", false, 0.50, 0.50, 0.20, 0.05},
      {"noise_b", false, 0.50, 0.50, 0.20, 0.05},
  };
}

ImageBuffer random_image(int width, int height, SplitMix64& rng) {
  ImageBuffer image;
  image.width = width;
  image.height = height;
  image.channels = 1;
  image.pixels.resize(static_cast<std::size_t>(width) * height);
  for (std::uint8_t& p : image.pixels) {
    p = static_cast<std::uint8_t>(rng.below(256));
  }
  return image;
}

ImageBuffer near_duplicate(const ImageBuffer& base, SplitMix64& rng, int radius) {
  const PHash64 base_hash = phash64(base);
  for (int attempt = 0; attempt < 10; ++attempt) {
    ImageBuffer candidate = base;
    const int tweaks = 1 + static_cast<int>(rng.below(3));
    for (int t = 0; t < tweaks; ++t) {
      const std::size_t idx =
          static_cast<std::size_t>(rng.below(candidate.pixels.size()));
      const int delta = 1 + static_cast<int>(rng.below(6));
      const int sign = rng.below(2) == 0 ? -1 : 1;
      const int value = static_cast<int>(candidate.pixels[idx]) + sign * delta;
      candidate.pixels[idx] = static_cast<std::uint8_t>(std::clamp(value, 0, 255));
    }
    if (hamming_distance(phash64(candidate).bits, base_hash.bits) <= radius) {
      return candidate;
    }
  }
  return base;  // exact copy: distance 0 always qualifies
}

SynthCorpus generate(const SynthConfig& config) {
  if (config.n < 1) {
    throw std::invalid_argument("synth: n must be >= 1");
  }
  if (config.force_label < 0 && !(config.prior > 0.0 && config.prior < 1.0)) {
    throw std::invalid_argument("synth: prior must be in (0, 1)");
  }
  for (const OperatorModel& op : config.operators) {
    if (!(op.noise_std > 0.0) || op.missing_rate < 0.0 || op.missing_rate >= 1.0) {
      throw std::invalid_argument("synth: operator '" + op.name +
                                  "' has invalid noise_std or missing_rate");
    }
  }
  const DuplicatePlan& plan = config.duplicates;
  if (plan.count < 0 || (plan.count > 0 && plan.min_size < 2) ||
      plan.max_size < plan.min_size) {
    throw std::invalid_argument("synth: invalid duplicate plan");
  }

  SplitMix64 rng(config.seed);
  SynthCorpus corpus;
  const int n = config.n;

  // Sample ids, fixed width so lexicographic order equals index order.
  std::vector<SampleId> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06d", config.id_prefix.c_str(), i);
    ids[static_cast<std::size_t>(i)] = buf;
  }

  // Latent labels.
  std::vector<int> labels(static_cast<std::size_t>(n));
  if (config.force_label >= 0) {
    std::fill(labels.begin(), labels.end(), config.force_label != 0 ? 1 : 0);
  } else {
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = rng.uniform() < config.prior ? 1 : 0;
    }
  }

  // Planted duplicate groups occupy leading index ranges; members inherit the
  // base sample's label so a group corresponds to one underlying pair.
  std::vector<int> group_of(static_cast<std::size_t>(n), -1);
  std::vector<int> group_sizes;
  {
    int cursor = 0;
    for (int g = 0; g < plan.count; ++g) {
      const int size =
          plan.min_size +
          static_cast<int>(rng.below(
              static_cast<std::uint64_t>(plan.max_size - plan.min_size + 1)));
      if (cursor + size > n) {
        throw std::invalid_argument(
            "synth: duplicate plan does not fit the corpus size");
      }
      for (int k = 0; k < size; ++k) {
        group_of[static_cast<std::size_t>(cursor + k)] = g;
        labels[static_cast<std::size_t>(cursor + k)] =
            labels[static_cast<std::size_t>(cursor)];
      }
      group_sizes.push_back(size);
      cursor += size;
    }
  }

  // Images: group members are hash-radius perturbations of their base.
  ImageBuffer current_base;
  for (int i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    const int g = group_of[si];
    const bool is_base = g < 0 || i == 0 || group_of[static_cast<std::size_t>(i - 1)] != g;
    if (is_base) {
      current_base = random_image(config.image_width, config.image_height, rng);
      corpus.images[ids[si]] = current_base;
    } else {
      corpus.images[ids[si]] = near_duplicate(current_base, rng, plan.radius);
    }
  }

  // Manifest with templated captions; image_path filled in by write_corpus.
  corpus.manifest.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    SampleRecord rec;
    rec.id = ids[si];
    rec.caption = "image-text pair " + ids[si];
    corpus.manifest.samples.push_back(std::move(rec));
  }
  corpus.manifest.rebuild_index();

  // Scores: class-mean plus Gaussian noise for informative operators, pure
  // noise around zero otherwise.
  corpus.scores.sample_ids = ids;
  for (const OperatorModel& op : config.operators) {
    corpus.scores.operator_ids.push_back(op.name);
  }
  corpus.scores.cells = Matrix::Constant(
      n, static_cast<Eigen::Index>(config.operators.size()), kMissing);
  corpus.scores.rebuild_index();
  for (std::size_t c = 0; c < config.operators.size(); ++c) {
    const OperatorModel& op = config.operators[c];
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() < op.missing_rate) continue;
      const std::size_t si = static_cast<std::size_t>(i);
      const double mean =
          op.informative ? (labels[si] == 1 ? op.mean_keep : op.mean_drop) : 0.0;
      corpus.scores.cells(i, static_cast<Eigen::Index>(c)) =
          mean + op.noise_std * rng.normal();
    }
  }

  // Detections: keep-worthy pairs get more and stronger boxes.
  for (int i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    std::vector<double> confs;
    if (labels[si] == 1) {
      const int slots = 2 + static_cast<int>(rng.below(3));
      for (int s = 0; s < slots; ++s) confs.push_back(0.3 + 0.6 * rng.uniform());
    } else {
      const int slots = static_cast<int>(rng.below(3));
      for (int s = 0; s < slots; ++s) confs.push_back(0.6 * rng.uniform());
    }
    corpus.detections.confidences.emplace(ids[si], std::move(confs));
  }

  for (int i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    corpus.truth.labels[ids[si]] = labels[si];
    if (group_of[si] >= 0) {
      corpus.truth.planted_group[ids[si]] = group_of[si];
    }
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");

  Manifest manifest = corpus.manifest;
  for (SampleRecord& rec : manifest.samples) {
    if (corpus.images.count(rec.id)) {
      rec.image_path = "images/" + rec.id + ".pgm";
    }
  }
  write_manifest(manifest, dir / "manifest.jsonl");
  for (const auto& [id, image] : corpus.images) {
    write_pgm(image, dir / "images" / (id + ".pgm"));
  }
  write_score_table(corpus.scores, dir / "scores.csv");
  write_detections(corpus.detections, dir / "detections.jsonl");

  std::ofstream truth(dir / "truth.csv", std::ios::binary);
  if (!truth) {
    throw std::runtime_error("cannot write truth.csv under " + dir.string());
  }
  truth << "sample_id,label,planted_group\n";
  for (const SampleRecord& rec : corpus.manifest.samples) {
    truth << rec.id << ',' << corpus.truth.labels.at(rec.id) << ',';
    auto it = corpus.truth.planted_group.find(rec.id);
    if (it != corpus.truth.planted_group.end()) truth << it->second;
    truth << '\n';
  }
}

double auc_score(const std::map<SampleId, double>& scores,
                 const std::map<SampleId, int>& labels) {
  struct Entry {
    double score;
    int label;
  };
  std::vector<Entry> entries;
  entries.reserve(scores.size());
  for (const auto& [id, score] : scores) {
    auto it = labels.find(id);
    if (it == labels.end()) {
      throw std::runtime_error("auc_score: no label for id '" + id + "'");
    }
    entries.push_back({score, it->second});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  std::int64_t n_pos = 0, n_neg = 0;
  for (const Entry& e : entries) (e.label == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auc_score: both classes required");
  }

  // Mann-Whitney with average ranks over score ties.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].score == entries[i].score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (entries[k].label == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos -
                   static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

SynthMetrics evaluate(const std::vector<SampleId>& kept,
                      const std::map<SampleId, double>& posteriors,
                      const GroundTruth& truth) {
  if (kept.empty()) {
    throw std::invalid_argument("evaluate: kept set is empty");
  }
  std::int64_t kept_pos = 0;
  for (const SampleId& id : kept) {
    auto it = truth.labels.find(id);
    if (it == truth.labels.end()) {
      throw std::runtime_error("evaluate: unknown id '" + id + "'");
    }
    if (it->second == 1) ++kept_pos;
  }
  std::int64_t total_pos = 0;
  for (const auto& [_, label] : truth.labels) {
    if (label == 1) ++total_pos;
  }

  SynthMetrics metrics;
  metrics.precision = static_cast<double>(kept_pos) / static_cast<double>(kept.size());
  metrics.recall = total_pos == 0
                       ? 0.0
                       : static_cast<double>(kept_pos) / static_cast<double>(total_pos);
  metrics.auc = posteriors.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : auc_score(posteriors, truth.labels);
  return metrics;
}

}  // namespace pairsift::synth
