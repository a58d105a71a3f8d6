#include "pairsift/operators.hpp"

#include <algorithm>
#include <stdexcept>

namespace pairsift {

double blur_score(const ImageBuffer& image) {
  if (image.width < 3 || image.height < 3) return 0.0;
  const Matrix lum = luminance_plane(image);
  const Eigen::Index h = lum.rows() - 2;
  const Eigen::Index w = lum.cols() - 2;
  // 3x3 Laplacian: cross neighbors minus 4x center, corners zero.
  const Matrix response = lum.block(0, 1, h, w) + lum.block(2, 1, h, w) +
                          lum.block(1, 0, h, w) + lum.block(1, 2, h, w) -
                          4.0 * lum.block(1, 1, h, w);
  const double mean = response.mean();
  return (response.array() - mean).square().sum() /
         static_cast<double>(response.size());
}

double geometry_score(int width, int height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("geometry_score: dimensions must be >= 1");
  }
  const double a = static_cast<double>(width) / height;
  const double b = static_cast<double>(height) / width;
  return std::min(a, b);
}

int gdino_count(std::span<const double> confidences, GdinoThreshold threshold) {
  if (!(threshold.t >= 0.0 && threshold.t < 1.0)) {
    throw std::invalid_argument("gdino_count: threshold must be in [0,1)");
  }
  int count = 0;
  for (double c : confidences) {
    if (!(c >= 0.0 && c <= 1.0)) {
      throw std::invalid_argument("gdino_count: confidence " + format_double(c) +
                                  " outside [0,1]");
    }
    if (c > threshold.t) ++count;  // strictly above, boundary excluded
  }
  return count;
}

ScoreTable assemble_scores(const Manifest& manifest, const ScoreTable& ingested,
                           const DetectionSet& detections,
                           const OperatorSelection& selection) {
  const auto is_native = [](const OperatorId& op) {
    return op == kOpBlurry || op == kOpGeometry || op == kOpGdino;
  };
  // Ingested operators must all be present before any work starts.
  for (const OperatorId& op : selection.selected) {
    if (!is_native(op) && ingested.column_of(op) < 0) {
      throw std::runtime_error("assemble_scores: selected operator '" + op +
                               "' not present in ingested scores");
    }
  }

  ScoreTable table;
  table.operator_ids = selection.selected;
  table.sample_ids.reserve(manifest.size());
  for (const SampleRecord& rec : manifest.samples) {
    table.sample_ids.push_back(rec.id);
  }
  table.rebuild_index();
  const Eigen::Index rows = static_cast<Eigen::Index>(manifest.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(selection.selected.size());
  table.cells = Matrix::Constant(rows, cols, kMissing);

  const bool needs_image =
      std::any_of(selection.selected.begin(), selection.selected.end(),
                  [](const OperatorId& op) {
                    return op == kOpBlurry || op == kOpGeometry;
                  });

  for (Eigen::Index r = 0; r < rows; ++r) {
    const SampleRecord& rec = manifest.samples[static_cast<std::size_t>(r)];
    ImageBuffer image;
    bool has_image = false;
    if (needs_image && !rec.image_path.empty()) {
      try {
        image = decode_image(rec.image_path);
        has_image = true;
      } catch (const std::exception&) {
        has_image = false;  // undecodable image -> missing native cells
      }
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const OperatorId& op = selection.selected[static_cast<std::size_t>(c)];
      if (op == kOpBlurry) {
        if (has_image) table.cells(r, c) = blur_score(image);
      } else if (op == kOpGeometry) {
        if (has_image) {
          table.cells(r, c) = geometry_score(image.width, image.height);
        }
      } else if (op == kOpGdino) {
        const std::vector<double>& confs = detections.of(rec.id);
        table.cells(r, c) =
            static_cast<double>(gdino_count(confs, selection.gdino));
      } else {
        const Eigen::Index src_row = ingested.row_of(rec.id);
        if (src_row >= 0) {
          table.cells(r, c) = ingested.cells(src_row, ingested.column_of(op));
        }
      }
    }
  }
  return table;
}

}  // namespace pairsift
