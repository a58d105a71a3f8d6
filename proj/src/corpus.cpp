#include "pairsift/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pairsift {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  return in;
}

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

std::string require_string(const json& obj, const char* key, std::size_t line_no,
                           const std::filesystem::path& path) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                             ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

// Splits a CSV line; no quoting, cells must not contain commas.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

double parse_finite(const std::string& cell, const std::string& context) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || static_cast<std::size_t>(end - begin) != cell.size() ||
      !std::isfinite(v)) {
    throw std::runtime_error(context + ": non-numeric cell '" + cell + "'");
  }
  return v;
}

// Strips one trailing \r so CRLF inputs parse the same as LF.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

const SampleRecord* Manifest::find(const SampleId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return nullptr;
  return &samples[it->second];
}

void Manifest::rebuild_index() {
  index_.clear();
  index_.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    index_.emplace(samples[i].id, i);
  }
}

Eigen::Index ScoreTable::row_of(const SampleId& id) const {
  if (!row_index_.empty()) {
    auto it = row_index_.find(id);
    return it == row_index_.end() ? -1 : it->second;
  }
  auto it = std::find(sample_ids.begin(), sample_ids.end(), id);
  return it == sample_ids.end() ? -1 : it - sample_ids.begin();
}

Eigen::Index ScoreTable::column_of(const OperatorId& op) const {
  auto it = std::find(operator_ids.begin(), operator_ids.end(), op);
  return it == operator_ids.end() ? -1 : it - operator_ids.begin();
}

void ScoreTable::rebuild_index() {
  row_index_.clear();
  row_index_.reserve(sample_ids.size());
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    row_index_.emplace(sample_ids[i], static_cast<Eigen::Index>(i));
  }
}

const std::vector<double>& DetectionSet::of(const SampleId& id) const {
  static const std::vector<double> kEmpty;
  auto it = confidences.find(id);
  return it == confidences.end() ? kEmpty : it->second;
}

void validate_sample_id(const std::string& id) {
  if (id.empty()) {
    throw std::runtime_error("sample id must be non-empty");
  }
  for (unsigned char c : id) {
    if (std::isspace(c) || c == ',') {
      throw std::runtime_error("sample id '" + id +
                               "' must not contain whitespace or commas");
    }
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");
  Manifest manifest;
  std::unordered_map<std::string, std::size_t> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected a JSON object");
    }
    SampleRecord rec;
    rec.id = require_string(obj, "id", line_no, path);
    validate_sample_id(rec.id);
    rec.image_path = require_string(obj, "image_path", line_no, path);
    rec.caption = require_string(obj, "caption", line_no, path);
    if (!rec.image_path.empty() &&
        std::filesystem::path(rec.image_path).is_relative()) {
      rec.image_path = (base / rec.image_path).string();
    }
    if (auto it = obj.find("meta"); it != obj.end()) {
      if (!it->is_object()) {
        throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                                 ": meta must be an object");
      }
      for (const auto& [k, v] : it->items()) {
        if (!v.is_string()) {
          throw std::runtime_error(path.string() + " line " +
                                   std::to_string(line_no) +
                                   ": meta values must be strings");
        }
        rec.meta[k] = v.get<std::string>();
      }
    }
    if (!seen_ids.emplace(rec.id, line_no).second) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": duplicate sample id '" + rec.id + "'");
    }
    manifest.samples.push_back(std::move(rec));
  }
  manifest.rebuild_index();
  return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (const SampleRecord& rec : manifest.samples) {
    json obj;
    obj["id"] = rec.id;
    obj["image_path"] = rec.image_path;
    obj["caption"] = rec.caption;
    if (!rec.meta.empty()) {
      obj["meta"] = rec.meta;
    }
    out << obj.dump() << '\n';
  }
}

ScoreTable load_score_table(const std::filesystem::path& path,
                            const Manifest& manifest) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line) || line.empty()) {
    throw std::runtime_error(path.string() + ": missing header row");
  }
  const std::vector<std::string> header = split_csv(line);
  if (header.empty() || header[0] != "sample_id") {
    throw std::runtime_error(path.string() +
                             ": header must start with 'sample_id'");
  }

  ScoreTable table;
  table.operator_ids.assign(header.begin() + 1, header.end());
  table.sample_ids.reserve(manifest.size());
  for (const SampleRecord& rec : manifest.samples) {
    table.sample_ids.push_back(rec.id);
  }
  table.rebuild_index();
  const Eigen::Index cols = static_cast<Eigen::Index>(table.operator_ids.size());
  table.cells = Matrix::Constant(static_cast<Eigen::Index>(manifest.size()), cols,
                                 kMissing);

  std::vector<bool> seen(manifest.size(), false);
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    const std::string context = path.string() + " line " + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw std::runtime_error(context + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    }
    const Eigen::Index row = table.row_of(cells[0]);
    if (row < 0) {
      throw std::runtime_error(context + ": unknown sample id '" + cells[0] + "'");
    }
    if (seen[static_cast<std::size_t>(row)]) {
      throw std::runtime_error(context + ": duplicate row for sample id '" +
                               cells[0] + "'");
    }
    seen[static_cast<std::size_t>(row)] = true;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::string& cell = cells[static_cast<std::size_t>(c) + 1];
      if (cell.empty()) continue;  // blank stays missing
      table.cells(row, c) = parse_finite(cell, context);
    }
  }
  return table;
}

ScoreTable load_score_table_raw(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line) || line.empty()) {
    throw std::runtime_error(path.string() + ": missing header row");
  }
  const std::vector<std::string> header = split_csv(line);
  if (header.empty() || header[0] != "sample_id") {
    throw std::runtime_error(path.string() +
                             ": header must start with 'sample_id'");
  }

  ScoreTable table;
  table.operator_ids.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    const std::string context = path.string() + " line " + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw std::runtime_error(context + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    }
    validate_sample_id(cells[0]);
    table.sample_ids.push_back(cells[0]);
    std::vector<double> row(header.size() - 1, kMissing);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (!cells[c].empty()) row[c - 1] = parse_finite(cells[c], context);
    }
    rows.push_back(std::move(row));
  }
  table.cells.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  table.rebuild_index();
  return table;
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "sample_id";
  for (const OperatorId& op : table.operator_ids) out << ',' << op;
  out << '\n';
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    out << table.sample_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      out << ',';
      if (!is_missing(table.cells(r, c))) out << format_double(table.cells(r, c));
    }
    out << '\n';
  }
}

DetectionSet load_detections(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  DetectionSet set;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string context = path.string() + " line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(context + ": malformed JSON (" + e.what() + ")");
    }
    const std::string id = require_string(obj, "id", line_no, path);
    validate_sample_id(id);
    auto it = obj.find("confidences");
    if (it == obj.end() || !it->is_array()) {
      throw std::runtime_error(context + ": missing confidences array");
    }
    std::vector<double> confs;
    confs.reserve(it->size());
    for (const json& v : *it) {
      if (!v.is_number()) {
        throw std::runtime_error(context + ": confidence must be a number");
      }
      const double c = v.get<double>();
      if (!(c >= 0.0 && c <= 1.0)) {
        throw std::runtime_error(context + ": confidence " + format_double(c) +
                                 " outside [0,1]");
      }
      confs.push_back(c);
    }
    if (!set.confidences.emplace(id, std::move(confs)).second) {
      throw std::runtime_error(context + ": duplicate detection record for '" +
                               id + "'");
    }
  }
  return set;
}

void write_detections(const DetectionSet& detections,
                      const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (const auto& [id, confs] : detections.confidences) {
    json obj;
    obj["id"] = id;
    obj["confidences"] = confs;
    out << obj.dump() << '\n';
  }
}

void write_subset(const Manifest& manifest, const std::vector<SampleId>& kept,
                  const std::map<SampleId, double>& scores,
                  const std::filesystem::path& path) {
  struct Row {
    SampleId id;
    double score;
  };
  std::vector<Row> rows;
  rows.reserve(kept.size());
  for (const SampleId& id : kept) {
    if (manifest.find(id) == nullptr) {
      throw std::runtime_error("write_subset: id '" + id + "' not in manifest");
    }
    auto it = scores.find(id);
    if (it == scores.end()) {
      throw std::runtime_error("write_subset: no score for id '" + id + "'");
    }
    rows.push_back({id, it->second});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::ofstream out = open_output(path);
  out << "sample_id,quality_score\n";
  for (const Row& row : rows) {
    out << row.id << ',' << format_double(row.score) << '\n';
  }
}

}  // namespace pairsift
