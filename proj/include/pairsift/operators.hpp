#pragma once

#include "pairsift/corpus.hpp"
#include "pairsift/image.hpp"
#include "pairsift/types.hpp"

#include <span>
#include <vector>

namespace pairsift {

// Operators computed natively from pixels / detections. Everything else
// (clip, hclip, vclip, icc, language, ...) is ingested as a score column.
inline constexpr const char* kOpBlurry = "blurry";
inline constexpr const char* kOpGeometry = "geometry";
inline constexpr const char* kOpGdino = "gdino";

struct GdinoThreshold {
  double t = 0.1;
};

/// Population variance of the 3x3 Laplacian response (center -4, cross
/// neighbors +1) over interior pixels. Low values flag flat or blurred
/// images; anything smaller than 3x3 scores 0.
double blur_score(const ImageBuffer& image);

/// min(w/h, h/w) in (0, 1]; 1 exactly for squares. Penalizes extreme
/// aspect ratios.
double geometry_score(int width, int height);

/// Number of detections with confidence strictly above the threshold.
int gdino_count(std::span<const double> confidences, GdinoThreshold threshold = {});

struct OperatorSelection {
  std::vector<OperatorId> selected;
  GdinoThreshold gdino;
};

/// One column per selected operator, in selection order, rows in manifest
/// order. Native columns are computed here; samples without a decodable
/// image get missing cells in blurry/geometry. Ingested columns are copied
/// by sample id from `ingested`; a selected ingested operator missing from
/// that table is an error.
ScoreTable assemble_scores(const Manifest& manifest, const ScoreTable& ingested,
                           const DetectionSet& detections,
                           const OperatorSelection& selection);

}  // namespace pairsift
