#include "pairsift/curate.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace pairsift {

using nlohmann::json;

namespace {

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

std::string resolve_path(const json& doc, const char* key,
                         const std::filesystem::path& base, bool required) {
  auto it = doc.find(key);
  if (it != doc.end() && !it->is_string()) {
    throw std::runtime_error(std::string("config: '") + key +
                             "' must be a string path");
  }
  if (it == doc.end() || it->get_ref<const std::string&>().empty()) {
    if (required) {
      throw std::runtime_error(std::string("config: missing required path '") +
                               key + "'");
    }
    return {};
  }
  std::filesystem::path p = it->get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.string();
}

DedupMode parse_mode(const std::string& mode) {
  if (mode == "image") return DedupMode::kImage;
  if (mode == "text") return DedupMode::kText;
  if (mode == "image_and_text") return DedupMode::kImageAndText;
  throw std::runtime_error("config: unknown dedup mode '" + mode + "'");
}

SearchStrategy parse_strategy(const std::string& s) {
  if (s == "exhaustive") return SearchStrategy::kExhaustive;
  if (s == "random") return SearchStrategy::kRandom;
  throw std::runtime_error("config: unknown search strategy '" + s + "'");
}

Manifest load_survivor_manifest(const CurationConfig& config,
                                const std::filesystem::path& out_dir) {
  Manifest manifest = load_manifest(config.manifest);
  const std::filesystem::path kept_path = out_dir / "dedup_kept.txt";
  if (!std::filesystem::exists(kept_path)) return manifest;

  std::ifstream in(kept_path, std::ios::binary);
  std::set<SampleId> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) kept.insert(line);
  }
  Manifest survivors;
  for (SampleRecord& rec : manifest.samples) {
    if (kept.count(rec.id)) survivors.samples.push_back(std::move(rec));
  }
  survivors.rebuild_index();
  return survivors;
}

std::map<SampleId, double> load_quality_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::map<SampleId, double> scores;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    scores[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  return scores;
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

CurationConfig load_curation_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config: " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  const std::filesystem::path base =
      path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  CurationConfig config;
  config.manifest = resolve_path(doc, "manifest", base, true);
  config.scores = resolve_path(doc, "scores", base, true);
  config.detections = resolve_path(doc, "detections", base, false);

  if (auto it = doc.find("dedup"); it != doc.end()) {
    config.dedup.radius = it->value("radius", config.dedup.radius);
    config.dedup.mode = parse_mode(it->value("mode", std::string("image")));
    config.dedup.alignment_column =
        it->value("alignment_column", config.dedup.alignment_column);
  }
  if (auto it = doc.find("operators"); it != doc.end()) {
    config.operators.selected =
        it->value("selected", std::vector<std::string>{});
    config.operators.gdino.t =
        it->value("gdino_threshold", config.operators.gdino.t);
  }
  if (config.operators.selected.empty()) {
    throw std::runtime_error("config: operators.selected must be non-empty");
  }
  {
    std::set<OperatorId> unique(config.operators.selected.begin(),
                                config.operators.selected.end());
    if (unique.size() != config.operators.selected.size()) {
      throw std::runtime_error("config: operators.selected contains duplicates");
    }
  }
  if (auto it = doc.find("candidates"); it != doc.end()) {
    config.topk_grid = it->value("topk", config.topk_grid);
    config.beta_fractions = it->value("beta_fractions", config.beta_fractions);
  }
  if (auto it = doc.find("composite"); it != doc.end()) {
    config.composite.alpha1 = it->value("alpha1", config.composite.alpha1);
    config.composite.alpha2 = it->value("alpha2", config.composite.alpha2);
    config.composite.alpha3 = it->value("alpha3", config.composite.alpha3);
    config.composite.alpha4 = it->value("alpha4", config.composite.alpha4);
  }
  if (auto it = doc.find("fit"); it != doc.end()) {
    config.fit.tolerance = it->value("tolerance", config.fit.tolerance);
    config.fit.max_iterations =
        it->value("max_iterations", config.fit.max_iterations);
    config.fit.init_accuracy = it->value("init_accuracy", config.fit.init_accuracy);
    config.fit.init_prior = it->value("init_prior", config.fit.init_prior);
    config.fit.seed = it->value("seed", config.fit.seed);
  }
  if (auto it = doc.find("search"); it != doc.end()) {
    config.search.strategy =
        parse_strategy(it->value("strategy", std::string("exhaustive")));
    config.search.budget = it->value("budget", config.search.budget);
    config.search.seed = it->value("seed", config.search.seed);
    config.search.f1_threshold =
        it->value("f1_threshold", config.search.f1_threshold);
  }
  if (auto it = doc.find("tiny"); it != doc.end()) {
    config.tiny.clean_manifest = resolve_path(*it, "clean_manifest", base, false);
    config.tiny.noisy_manifest = resolve_path(*it, "noisy_manifest", base, false);
    config.tiny.scores = resolve_path(*it, "scores", base, false);
    config.tiny.detections = resolve_path(*it, "detections", base, false);
    config.tiny.swap_fraction =
        it->value("swap_fraction", config.tiny.swap_fraction);
    config.tiny.seed = it->value("seed", config.tiny.seed);
  }
  config.keep_fraction = doc.value("keep_fraction", config.keep_fraction);
  if (!(config.keep_fraction > 0.0 && config.keep_fraction <= 1.0)) {
    throw std::runtime_error("config: keep_fraction must be in (0, 1]");
  }
  return config;
}

std::size_t top_fraction_count(std::size_t n, double q) {
  if (n == 0) {
    throw std::invalid_argument("top_fraction_count: n must be positive");
  }
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::invalid_argument("top_fraction_count: q must be in (0, 1]");
  }
  // Snap near-integer products before the ceiling so q like 0.40 is exact.
  const double product = q * static_cast<double>(n);
  const double rounded = std::round(product);
  const double k_real = std::abs(product - rounded) <= 1e-9 * std::max(1.0, product)
                            ? rounded
                            : std::ceil(product);
  return std::clamp<std::size_t>(static_cast<std::size_t>(k_real), 1, n);
}

std::vector<SampleId> select_top_fraction(const std::map<SampleId, double>& scores,
                                          double q) {
  if (scores.empty()) {
    throw std::invalid_argument("select_top_fraction: no scores");
  }
  const std::size_t k = top_fraction_count(scores.size(), q);

  std::vector<std::pair<SampleId, double>> rows(scores.begin(), scores.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<SampleId> kept;
  kept.reserve(k);
  for (std::size_t i = 0; i < k; ++i) kept.push_back(rows[i].first);
  return kept;
}

Report emit_report(const Diagnostics& diag, const LabelModelParams& params,
                   const std::vector<OperatorId>& operators) {
  if (diag.per_lf.size() != operators.size() ||
      static_cast<std::size_t>(params.lf_count()) != operators.size()) {
    throw std::invalid_argument("emit_report: LF count mismatch");
  }
  Report report;
  report.operators = operators;
  report.diag = diag;
  report.weights = params.accuracies;
  return report;
}

void write_report_csv(const Report& report, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "Operators,Coverage,Overlaps,Conflicts,Weights\n";
  for (std::size_t j = 0; j < report.operators.size(); ++j) {
    out << report.operators[j] << ',' << format_double(report.diag.per_lf[j].coverage)
        << ',' << format_double(report.diag.per_lf[j].overlap) << ','
        << format_double(report.diag.per_lf[j].conflict) << ','
        << format_double(report.weights(static_cast<Eigen::Index>(j))) << '\n';
  }
}

void write_report_json(const Report& report, const std::filesystem::path& path) {
  json rows = json::array();
  for (std::size_t j = 0; j < report.operators.size(); ++j) {
    rows.push_back({{"operator", report.operators[j]},
                    {"coverage", report.diag.per_lf[j].coverage},
                    {"overlaps", report.diag.per_lf[j].overlap},
                    {"conflicts", report.diag.per_lf[j].conflict},
                    {"weights", report.weights(static_cast<Eigen::Index>(j))}});
  }
  json doc;
  doc["per_operator"] = rows;
  doc["global"] = {{"coverage", report.diag.coverage},
                   {"overlap", report.diag.overlap},
                   {"conflict", report.diag.conflict}};
  std::ofstream out = open_output(path);
  out << doc.dump(2) << '\n';
}

namespace stages {

std::vector<SampleId> dedup(const CurationConfig& config,
                            const std::filesystem::path& out_dir) {
  const Manifest manifest = load_manifest(config.manifest);
  if (manifest.empty()) {
    throw std::runtime_error("manifest is empty: " + config.manifest);
  }
  const ScoreTable ingested = load_score_table(config.scores, manifest);

  const Eigen::Index align_col = ingested.column_of(config.dedup.alignment_column);
  if (align_col < 0) {
    throw std::runtime_error("alignment column '" + config.dedup.alignment_column +
                             "' not present in " + config.scores);
  }
  std::map<SampleId, double> alignment;
  for (Eigen::Index r = 0; r < ingested.rows(); ++r) {
    const double v = ingested.cells(r, align_col);
    if (!is_missing(v)) {
      alignment[ingested.sample_ids[static_cast<std::size_t>(r)]] = v;
    }
  }

  const bool want_image = config.dedup.mode != DedupMode::kText;
  const bool want_text = config.dedup.mode != DedupMode::kImage;
  DedupHashes hashes;
  std::vector<SampleId> pass_through;  // samples outside the hashed universe
  for (const SampleRecord& rec : manifest.samples) {
    bool hashed = false;
    if (want_image && !rec.image_path.empty()) {
      try {
        hashes.image[rec.id] = phash64(decode_image(rec.image_path)).bits;
        hashed = true;
      } catch (const std::exception&) {
        // undecodable image: the sample cannot join an image duplicate group
      }
    }
    if (want_text) {
      hashes.text[rec.id] = text_hash(rec.caption);
      hashed = true;
    }
    if (!hashed) pass_through.push_back(rec.id);
  }

  std::vector<DuplicateGroup> groups;
  if (!hashes.image.empty() || !hashes.text.empty()) {
    groups = cluster_duplicates(hashes, config.dedup);
  }
  std::vector<SampleId> kept = retain_best(groups, alignment);
  kept.insert(kept.end(), pass_through.begin(), pass_through.end());
  std::sort(kept.begin(), kept.end());

  {
    std::ofstream out = open_output(out_dir / "dedup_kept.txt");
    for (const SampleId& id : kept) out << id << '\n';
  }
  {
    const std::set<SampleId> kept_set(kept.begin(), kept.end());
    std::ofstream out = open_output(out_dir / "dedup_groups.csv");
    out << "group_id,member_id,alignment_score,kept\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (const SampleId& id : groups[g].member_ids) {
        out << g << ',' << id << ',';
        if (auto it = alignment.find(id); it != alignment.end()) {
          out << format_double(it->second);
        }
        out << ',' << (kept_set.count(id) ? 1 : 0) << '\n';
      }
    }
  }

  // Survivors in manifest order for downstream stages.
  const std::set<SampleId> kept_set(kept.begin(), kept.end());
  std::vector<SampleId> survivors;
  for (const SampleRecord& rec : manifest.samples) {
    if (kept_set.count(rec.id)) survivors.push_back(rec.id);
  }
  return survivors;
}

ScoreTable score(const CurationConfig& config,
                 const std::filesystem::path& out_dir) {
  const Manifest full = load_manifest(config.manifest);
  const ScoreTable ingested = load_score_table(config.scores, full);
  const Manifest survivors = load_survivor_manifest(config, out_dir);
  if (survivors.empty()) {
    throw std::runtime_error("no samples survive deduplication");
  }
  DetectionSet detections;
  if (!config.detections.empty()) {
    detections = load_detections(config.detections);
  }
  const ScoreTable assembled =
      assemble_scores(survivors, ingested, detections, config.operators);
  write_score_table(assembled, out_dir / "assembled_scores.csv");
  return assembled;
}

LFCandidateGrid lf_gen(const CurationConfig& config,
                       const std::filesystem::path& out_dir) {
  const ScoreTable assembled =
      load_score_table_raw(out_dir / "assembled_scores.csv");
  const LFCandidateGrid grid =
      generate_candidates(assembled, config.topk_grid, config.beta_fractions);

  json ops = json::array();
  for (std::size_t o = 0; o < grid.operators.size(); ++o) {
    json cands = json::array();
    for (const LFSpec& lf : grid.candidates[o]) {
      cands.push_back({{"b", lf.b}, {"beta", lf.beta}});
    }
    ops.push_back({{"name", grid.operators[o]}, {"candidates", cands}});
  }
  json doc;
  doc["operators"] = ops;
  std::ofstream out = open_output(out_dir / "candidates.json");
  out << doc.dump(2) << '\n';
  return grid;
}

SearchResult search(const CurationConfig& config,
                    const std::filesystem::path& out_dir) {
  if (config.tiny.clean_manifest.empty() || config.tiny.noisy_manifest.empty() ||
      config.tiny.scores.empty()) {
    throw std::runtime_error(
        "tiny pools not configured (tiny.clean_manifest, tiny.noisy_manifest, "
        "tiny.scores)");
  }

  LFCandidateGrid grid;
  {
    std::ifstream in(out_dir / "candidates.json", std::ios::binary);
    if (!in) {
      throw std::runtime_error("cannot open " +
                               (out_dir / "candidates.json").string());
    }
    json doc = json::parse(in);
    for (const json& op : doc.at("operators")) {
      grid.operators.push_back(op.at("name").get<std::string>());
      std::vector<LFSpec> cands;
      for (const json& c : op.at("candidates")) {
        cands.push_back({grid.operators.back(), c.at("b").get<double>(),
                         c.at("beta").get<double>()});
      }
      grid.candidates.push_back(std::move(cands));
    }
  }
  const ScoreTable assembled =
      load_score_table_raw(out_dir / "assembled_scores.csv");

  const Manifest clean = load_manifest(config.tiny.clean_manifest);
  const Manifest noisy = load_manifest(config.tiny.noisy_manifest);
  auto [tiny_manifest, tiny_gold] =
      build_tiny_eval(clean, noisy, config.tiny.swap_fraction, config.tiny.seed);
  const ScoreTable tiny_ingested =
      load_score_table(config.tiny.scores, tiny_manifest);
  DetectionSet tiny_detections;
  if (!config.tiny.detections.empty()) {
    tiny_detections = load_detections(config.tiny.detections);
  }
  const ScoreTable tiny_assembled = assemble_scores(
      tiny_manifest, tiny_ingested, tiny_detections, config.operators);

  const SearchResult result =
      search_combinations(grid, assembled, tiny_assembled, tiny_gold,
                          config.composite, config.fit, config.search);

  {
    std::ofstream out = open_output(out_dir / "tiny_eval.csv");
    out << "sample_id,label\n";
    for (const SampleRecord& rec : tiny_manifest.samples) {
      out << rec.id << ',' << tiny_gold.labels.at(rec.id) << '\n';
    }
  }
  {
    std::vector<SearchRow> ranked = result.rows;
    std::sort(ranked.begin(), ranked.end(),
              [](const SearchRow& a, const SearchRow& b) {
                if (a.metric != b.metric) return a.metric > b.metric;
                return a.combination.choices < b.combination.choices;
              });
    std::ofstream out = open_output(out_dir / "search_ranking.csv");
    out << "combination,f1,coverage,overlap,conflict,M\n";
    for (const SearchRow& row : ranked) {
      out << row.combination.encode(grid) << ',' << format_double(row.f1) << ','
          << format_double(row.coverage) << ',' << format_double(row.overlap)
          << ',' << format_double(row.conflict) << ','
          << format_double(row.metric) << '\n';
    }
  }
  {
    json lfs = json::array();
    for (const LFSpec& lf : result.best.to_lf_specs(grid)) {
      lfs.push_back({{"op", lf.op}, {"b", lf.b}, {"beta", lf.beta}});
    }
    json doc;
    doc["combination"] = result.best.encode(grid);
    doc["choices"] = result.best.choices;
    doc["metric"] = result.best_metric;
    doc["lf_specs"] = lfs;
    doc["tiny_fit"] = {
        {"prior", result.best_fit.params.prior},
        {"accuracies",
         std::vector<double>(result.best_fit.params.accuracies.data(),
                             result.best_fit.params.accuracies.data() +
                                 result.best_fit.params.accuracies.size())},
        {"converged", result.best_fit.converged},
        {"iterations", result.best_fit.iterations}};
    std::ofstream out = open_output(out_dir / "search_winner.json");
    out << doc.dump(2) << '\n';
  }
  return result;
}

FitResult fit_winner(const CurationConfig& config,
                     const std::filesystem::path& out_dir) {
  std::ifstream in(out_dir / "search_winner.json", std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " +
                             (out_dir / "search_winner.json").string());
  }
  json doc = json::parse(in);
  std::vector<LFSpec> lfs;
  for (const json& lf : doc.at("lf_specs")) {
    lfs.push_back({lf.at("op").get<std::string>(), lf.at("b").get<double>(),
                   lf.at("beta").get<double>()});
  }
  if (lfs.empty()) {
    throw std::runtime_error("search winner has no labeling functions");
  }

  const ScoreTable assembled =
      load_score_table_raw(out_dir / "assembled_scores.csv");
  const LabelMatrix matrix = build_matrix(lfs, assembled);
  const FitResult fitted = fit(matrix, config.fit);

  write_params_json(fitted, out_dir / "params.json");
  write_label_matrix(matrix, out_dir / "label_matrix.csv");

  const std::map<SampleId, double> quality = score_all(fitted.params, matrix);
  std::ofstream out = open_output(out_dir / "quality_scores.csv");
  out << "sample_id,score\n";
  for (const SampleId& id : matrix.sample_ids) {
    out << id << ',' << format_double(quality.at(id)) << '\n';
  }
  return fitted;
}

SelectionOutcome select(const CurationConfig& config,
                        const std::filesystem::path& out_dir) {
  SelectionOutcome outcome;
  outcome.quality = load_quality_scores(out_dir / "quality_scores.csv");
  outcome.curated = select_top_fraction(outcome.quality, config.keep_fraction);

  const Manifest survivors = load_survivor_manifest(config, out_dir);
  write_subset(survivors, outcome.curated, outcome.quality,
               out_dir / "curated.csv");

  // Curated manifest in selection order (score descending, id ascending).
  Manifest curated_manifest;
  for (const SampleId& id : outcome.curated) {
    const SampleRecord* rec = survivors.find(id);
    if (rec == nullptr) {
      throw std::runtime_error("curated id '" + id + "' is not a survivor");
    }
    curated_manifest.samples.push_back(*rec);
  }
  curated_manifest.rebuild_index();
  write_manifest(curated_manifest, out_dir / "curated_manifest.jsonl");
  return outcome;
}

Report report(const CurationConfig&, const std::filesystem::path& out_dir) {
  const LabelMatrix matrix = load_label_matrix(out_dir / "label_matrix.csv");
  const FitResult fitted = load_params_json(out_dir / "params.json");
  std::vector<OperatorId> operators;
  for (const LFSpec& lf : matrix.lf_specs) operators.push_back(lf.op);
  Report rep = emit_report(diagnostics(matrix), fitted.params, operators);
  write_report_csv(rep, out_dir / "report.csv");
  write_report_json(rep, out_dir / "report.json");
  return rep;
}

}  // namespace stages

PipelineResult run_pipeline(const CurationConfig& config,
                            const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  PipelineResult result;
  result.survivors =
      run_stage("dedup", [&] { return stages::dedup(config, out_dir); });
  run_stage("score", [&] { return stages::score(config, out_dir); });
  run_stage("lf-gen", [&] { return stages::lf_gen(config, out_dir); });
  result.search =
      run_stage("search", [&] { return stages::search(config, out_dir); });
  result.fit =
      run_stage("fit", [&] { return stages::fit_winner(config, out_dir); });
  stages::SelectionOutcome outcome =
      run_stage("select", [&] { return stages::select(config, out_dir); });
  result.curated = std::move(outcome.curated);
  result.quality = std::move(outcome.quality);
  result.report =
      run_stage("report", [&] { return stages::report(config, out_dir); });
  return result;
}

}  // namespace pairsift
