#pragma once

#include "pairsift/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace pairsift {

struct SampleRecord {
  SampleId id;
  std::string image_path;  // empty when the pair carries no stored image
  std::string caption;
  std::map<std::string, std::string> meta;
};

/// Ordered sample collection; order is load order, ids pairwise distinct.
struct Manifest {
  std::vector<SampleRecord> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }

  /// nullptr when the id is not present. Requires rebuild_index() after any
  /// direct mutation of samples; loaders call it for you.
  const SampleRecord* find(const SampleId& id) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// Dense samples x operators score matrix; rows follow manifest order and
/// missing cells are NaN (see kMissing).
struct ScoreTable {
  std::vector<SampleId> sample_ids;
  std::vector<OperatorId> operator_ids;
  Matrix cells;

  Eigen::Index rows() const { return cells.rows(); }
  Eigen::Index cols() const { return cells.cols(); }

  /// -1 when absent.
  Eigen::Index row_of(const SampleId& id) const;
  Eigen::Index column_of(const OperatorId& op) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, Eigen::Index> row_index_;
};

/// Per-sample detector confidences in [0, 1]; samples without a record
/// resolve to an empty sequence.
struct DetectionSet {
  std::map<SampleId, std::vector<double>> confidences;

  const std::vector<double>& of(const SampleId& id) const;
};

/// Throws when the token is empty or contains whitespace (or a comma, which
/// would corrupt the CSV interfaces).
void validate_sample_id(const std::string& id);

/// JSONL, one object per line with required fields id, image_path, caption
/// and an optional string-valued meta object. A relative image_path is
/// resolved against the manifest's parent directory.
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// CSV with header `sample_id,<op1>,...`. Rows are reordered to manifest
/// order; manifest samples absent from the file become all-missing rows;
/// blank cells become missing.
ScoreTable load_score_table(const std::filesystem::path& path, const Manifest& manifest);

/// Same format, but rows stay in file order and ids are taken as-is. Used to
/// reload persisted intermediate tables whose row order is already canonical.
ScoreTable load_score_table_raw(const std::filesystem::path& path);
void write_score_table(const ScoreTable& table, const std::filesystem::path& path);

/// JSONL with fields id and confidences (array of reals in [0, 1]).
DetectionSet load_detections(const std::filesystem::path& path);
void write_detections(const DetectionSet& detections, const std::filesystem::path& path);

/// CSV `sample_id,quality_score`, descending score, ties by ascending id.
void write_subset(const Manifest& manifest, const std::vector<SampleId>& kept,
                  const std::map<SampleId, double>& scores,
                  const std::filesystem::path& path);

}  // namespace pairsift
