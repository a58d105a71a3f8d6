#pragma once

#include "pairsift/corpus.hpp"
#include "pairsift/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pairsift {

/// Keep / Drop vote or an explicit non-vote. Serialized as 1 / 0 / -1.
enum class WeakLabel : std::int8_t { kDrop = 0, kKeep = 1, kAbstain = -1 };

using LabelCells = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;
using LabelColumn = Eigen::Matrix<std::int8_t, Eigen::Dynamic, 1>;

/// One labeling function: score >= b + beta votes Keep, score <= b - beta
/// votes Drop, the open band in between (and missing scores) abstain.
struct LFSpec {
  OperatorId op;
  double b = 0.0;     // boundary center
  double beta = 0.0;  // boundary half-width, >= 0
};

struct LabelMatrix {
  std::vector<SampleId> sample_ids;
  std::vector<LFSpec> lf_specs;
  LabelCells cells;  // rows = samples, cols = LFs, values in {1, 0, -1}

  Eigen::Index rows() const { return cells.rows(); }
  Eigen::Index cols() const { return cells.cols(); }
};

/// Candidate LFs per operator; the "exclude this operator" option is
/// implicit and always available on top of the listed candidates.
struct LFCandidateGrid {
  std::vector<OperatorId> operators;
  std::vector<std::vector<LFSpec>> candidates;  // parallel to operators
};

struct LfDiagnostics {
  double coverage = 0.0;
  double overlap = 0.0;
  double conflict = 0.0;
};

/// Vote-based diagnostics; abstains are non-votes throughout.
struct Diagnostics {
  double coverage = 0.0;  // rows with >= 1 vote
  double overlap = 0.0;   // rows with >= 2 votes
  double conflict = 0.0;  // rows with disagreeing votes
  std::vector<LfDiagnostics> per_lf;
};

LabelColumn apply_lf(const LFSpec& spec, const Vector& scores);

/// Boundary centers from nearest-rank quantiles of each operator's
/// non-missing scores: for TopK percent the rank is ceil(n * (100 - K) /
/// 100), 1-indexed ascending. Half-widths are fractions of the column's
/// population standard deviation. Candidates are ordered K-major then
/// fraction.
LFCandidateGrid generate_candidates(const ScoreTable& scores,
                                    const std::vector<int>& topk_grid,
                                    const std::vector<double>& beta_fractions);

LabelMatrix build_matrix(const std::vector<LFSpec>& lfs, const ScoreTable& scores);

Diagnostics diagnostics(const LabelMatrix& matrix);

/// CSV with header `sample_id,<operator per LF>` and cells in {1, 0, -1}.
/// Loading recovers operator names only; b and beta are not round-tripped.
void write_label_matrix(const LabelMatrix& matrix, const std::filesystem::path& path);
LabelMatrix load_label_matrix(const std::filesystem::path& path);

}  // namespace pairsift
