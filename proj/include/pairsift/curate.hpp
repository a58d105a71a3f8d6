#pragma once

#include "pairsift/corpus.hpp"
#include "pairsift/dedup.hpp"
#include "pairsift/labelmodel.hpp"
#include "pairsift/operators.hpp"
#include "pairsift/search.hpp"
#include "pairsift/types.hpp"
#include "pairsift/weaklabel.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pairsift {

struct TinyPoolConfig {
  std::string clean_manifest;
  std::string noisy_manifest;
  std::string scores;      // CSV covering both pools
  std::string detections;  // optional
  double swap_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct CurationConfig {
  std::string manifest;
  std::string scores;
  std::string detections;  // optional unless gdino is selected
  DedupConfig dedup;
  OperatorSelection operators;
  std::vector<int> topk_grid = {20, 30, 40, 50, 60, 70, 80};
  std::vector<double> beta_fractions = {0.0, 0.25, 0.5};
  CompositeWeights composite;
  FitConfig fit;
  SearchConfig search;
  TinyPoolConfig tiny;
  double keep_fraction = 0.40;  // q in (0, 1]
};

/// JSON config mirroring CurationConfig; relative paths are resolved against
/// the config file's directory.
CurationConfig load_curation_config(const std::filesystem::path& path);

/// ceil(q * n), with products within 1e-9 of an integer snapping to that
/// integer first so decimal fractions like 0.40 behave exactly. Clamped to
/// [1, n].
std::size_t top_fraction_count(std::size_t n, double q);

/// The top_fraction_count(n, q) ids by descending score, ties by ascending id.
std::vector<SampleId> select_top_fraction(const std::map<SampleId, double>& scores,
                                          double q);

struct Report {
  std::vector<OperatorId> operators;
  Diagnostics diag;
  Vector weights;
};

/// Per-LF Coverage / Overlaps / Conflicts / Weights rows; weights are the
/// fitted accuracies.
Report emit_report(const Diagnostics& diag, const LabelModelParams& params,
                   const std::vector<OperatorId>& operators);
void write_report_csv(const Report& report, const std::filesystem::path& path);
void write_report_json(const Report& report, const std::filesystem::path& path);

struct PipelineResult {
  std::vector<SampleId> survivors;  // after dedup, manifest order
  std::vector<SampleId> curated;    // final selection, score order
  SearchResult search;
  FitResult fit;
  std::map<SampleId, double> quality;
  Report report;
};

/// Runs dedup -> scoring -> candidate generation -> search -> fit ->
/// top-fraction selection, persisting every stage artifact under out_dir
/// (dedup_kept.txt, dedup_groups.csv, assembled_scores.csv, candidates.json,
/// tiny_eval.csv, search_ranking.csv, search_winner.json, params.json,
/// label_matrix.csv, quality_scores.csv, curated.csv, curated_manifest.jsonl,
/// report.csv, report.json). Any stage failure is rethrown tagged with the
/// stage name. Deterministic for a fixed config.
PipelineResult run_pipeline(const CurationConfig& config,
                            const std::filesystem::path& out_dir);

// Individual stages. Each reads its inputs from the config and from the
// artifacts earlier stages persisted under out_dir, and rewrites its own
// outputs deterministically; run_pipeline is exactly this sequence, so
// re-running a stage reproduces its files byte for byte.
namespace stages {

struct SelectionOutcome {
  std::vector<SampleId> curated;
  std::map<SampleId, double> quality;
};

std::vector<SampleId> dedup(const CurationConfig& config,
                            const std::filesystem::path& out_dir);
ScoreTable score(const CurationConfig& config, const std::filesystem::path& out_dir);
LFCandidateGrid lf_gen(const CurationConfig& config,
                       const std::filesystem::path& out_dir);
SearchResult search(const CurationConfig& config,
                    const std::filesystem::path& out_dir);
FitResult fit_winner(const CurationConfig& config,
                     const std::filesystem::path& out_dir);
SelectionOutcome select(const CurationConfig& config,
                        const std::filesystem::path& out_dir);
Report report(const CurationConfig& config, const std::filesystem::path& out_dir);

}  // namespace stages

}  // namespace pairsift
