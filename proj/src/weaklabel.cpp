#include "pairsift/weaklabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pairsift {

namespace {

constexpr std::int8_t kKeepCell = 1;
constexpr std::int8_t kDropCell = 0;
constexpr std::int8_t kAbstainCell = -1;

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  return out;
}

}  // namespace

LabelColumn apply_lf(const LFSpec& spec, const Vector& scores) {
  if (!std::isfinite(spec.b) || !std::isfinite(spec.beta) || spec.beta < 0.0) {
    throw std::invalid_argument("apply_lf: b must be finite and beta >= 0");
  }
  const double hi = spec.b + spec.beta;
  const double lo = spec.b - spec.beta;
  LabelColumn out(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double s = scores(i);
    if (is_missing(s)) {
      out(i) = kAbstainCell;
    } else if (s >= hi) {
      out(i) = kKeepCell;
    } else if (s <= lo) {
      out(i) = kDropCell;
    } else {
      out(i) = kAbstainCell;
    }
  }
  return out;
}

LFCandidateGrid generate_candidates(const ScoreTable& scores,
                                    const std::vector<int>& topk_grid,
                                    const std::vector<double>& beta_fractions) {
  for (int k : topk_grid) {
    if (k <= 0 || k >= 100) {
      throw std::invalid_argument("generate_candidates: TopK values must be in (0, 100)");
    }
  }
  if (topk_grid.empty() || beta_fractions.empty()) {
    throw std::invalid_argument("generate_candidates: empty grid parameters");
  }

  LFCandidateGrid grid;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    const OperatorId& op = scores.operator_ids[static_cast<std::size_t>(c)];
    std::vector<double> present;
    present.reserve(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      if (!is_missing(scores.cells(r, c))) present.push_back(scores.cells(r, c));
    }
    if (present.empty()) {
      throw std::runtime_error("generate_candidates: operator '" + op +
                               "' has no scores");
    }
    std::sort(present.begin(), present.end());
    const std::size_t n = present.size();

    double mean = 0.0;
    for (double v : present) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : present) var += (v - mean) * (v - mean);
    const double stddev = std::sqrt(var / static_cast<double>(n));

    std::vector<LFSpec> candidates;
    candidates.reserve(topk_grid.size() * beta_fractions.size());
    for (int k : topk_grid) {
      // Nearest-rank quantile in integer arithmetic: rank = ceil(n(100-K)/100).
      const std::size_t rank =
          (n * static_cast<std::size_t>(100 - k) + 99) / 100;
      const double b = present[rank - 1];
      for (double f : beta_fractions) {
        if (!(f >= 0.0) || !std::isfinite(f)) {
          throw std::invalid_argument(
              "generate_candidates: beta fractions must be finite and >= 0");
        }
        candidates.push_back({op, b, f * stddev});
      }
    }
    grid.operators.push_back(op);
    grid.candidates.push_back(std::move(candidates));
  }
  return grid;
}

LabelMatrix build_matrix(const std::vector<LFSpec>& lfs, const ScoreTable& scores) {
  LabelMatrix matrix;
  matrix.sample_ids = scores.sample_ids;
  matrix.lf_specs = lfs;
  matrix.cells.resize(scores.rows(), static_cast<Eigen::Index>(lfs.size()));
  for (std::size_t j = 0; j < lfs.size(); ++j) {
    const Eigen::Index col = scores.column_of(lfs[j].op);
    if (col < 0) {
      throw std::runtime_error("build_matrix: unknown operator '" + lfs[j].op + "'");
    }
    matrix.cells.col(static_cast<Eigen::Index>(j)) =
        apply_lf(lfs[j], scores.cells.col(col));
  }
  return matrix;
}

Diagnostics diagnostics(const LabelMatrix& matrix) {
  const Eigen::Index n = matrix.rows();
  const Eigen::Index m = matrix.cols();
  if (n == 0) {
    throw std::invalid_argument("diagnostics: empty label matrix");
  }

  std::int64_t covered = 0, overlapped = 0, conflicted = 0;
  std::vector<std::int64_t> lf_cov(static_cast<std::size_t>(m), 0);
  std::vector<std::int64_t> lf_ovl(static_cast<std::size_t>(m), 0);
  std::vector<std::int64_t> lf_con(static_cast<std::size_t>(m), 0);

  for (Eigen::Index r = 0; r < n; ++r) {
    int votes = 0;
    bool any_keep = false, any_drop = false;
    for (Eigen::Index c = 0; c < m; ++c) {
      const std::int8_t cell = matrix.cells(r, c);
      if (cell == kAbstainCell) continue;
      ++votes;
      (cell == kKeepCell ? any_keep : any_drop) = true;
    }
    if (votes >= 1) ++covered;
    if (votes >= 2) ++overlapped;
    const bool row_conflict = any_keep && any_drop;
    if (row_conflict) ++conflicted;

    for (Eigen::Index c = 0; c < m; ++c) {
      const std::int8_t cell = matrix.cells(r, c);
      if (cell == kAbstainCell) continue;
      const std::size_t j = static_cast<std::size_t>(c);
      ++lf_cov[j];
      if (votes >= 2) ++lf_ovl[j];
      // Another LF disagrees iff some vote of the opposite sign exists.
      if ((cell == kKeepCell && any_drop) || (cell == kDropCell && any_keep)) {
        ++lf_con[j];
      }
    }
  }

  Diagnostics diag;
  const double dn = static_cast<double>(n);
  diag.coverage = static_cast<double>(covered) / dn;
  diag.overlap = static_cast<double>(overlapped) / dn;
  diag.conflict = static_cast<double>(conflicted) / dn;
  diag.per_lf.resize(static_cast<std::size_t>(m));
  for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j) {
    diag.per_lf[j].coverage = static_cast<double>(lf_cov[j]) / dn;
    diag.per_lf[j].overlap = static_cast<double>(lf_ovl[j]) / dn;
    diag.per_lf[j].conflict = static_cast<double>(lf_con[j]) / dn;
  }
  return diag;
}

void write_label_matrix(const LabelMatrix& matrix,
                        const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "sample_id";
  for (const LFSpec& lf : matrix.lf_specs) out << ',' << lf.op;
  out << '\n';
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    out << matrix.sample_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      out << ',' << static_cast<int>(matrix.cells(r, c));
    }
    out << '\n';
  }
}

LabelMatrix load_label_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path.string() + ": missing header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  LabelMatrix matrix;
  std::size_t start = line.find(',');
  if (line.substr(0, start) != "sample_id") {
    throw std::runtime_error(path.string() + ": header must start with 'sample_id'");
  }
  while (start != std::string::npos) {
    const std::size_t next = line.find(',', start + 1);
    matrix.lf_specs.push_back({line.substr(start + 1, next - start - 1), 0.0, 0.0});
    start = next;
  }

  std::vector<std::vector<std::int8_t>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::int8_t> row;
    std::size_t pos = line.find(',');
    matrix.sample_ids.push_back(line.substr(0, pos));
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string cell = line.substr(pos + 1, next - pos - 1);
      if (cell == "1") {
        row.push_back(1);
      } else if (cell == "0") {
        row.push_back(0);
      } else if (cell == "-1") {
        row.push_back(-1);
      } else {
        throw std::runtime_error(path.string() + ": invalid label cell '" + cell +
                                 "'");
      }
      pos = next;
    }
    if (row.size() != matrix.lf_specs.size()) {
      throw std::runtime_error(path.string() + ": ragged row for sample '" +
                               matrix.sample_ids.back() + "'");
    }
    rows.push_back(std::move(row));
  }
  matrix.cells.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(matrix.lf_specs.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      matrix.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return matrix;
}

}  // namespace pairsift
