#include "pairsift/curate.hpp"
#include "pairsift/synthbench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::string out = ".";
  std::int64_t seed = -1;  // -1: keep the seeds from the config
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config, "config file (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out, "output directory")->required();
  cmd->add_option("--seed", args.seed, "master seed override");
}

pairsift::CurationConfig curation_config(const CommonArgs& args) {
  pairsift::CurationConfig config = pairsift::load_curation_config(args.config);
  if (args.seed >= 0) {
    // One master seed drives both randomized stages.
    config.tiny.seed = static_cast<std::uint64_t>(args.seed);
    config.search.seed = static_cast<std::uint64_t>(args.seed) + 1;
    config.fit.seed = static_cast<std::uint64_t>(args.seed) + 2;
  }
  return config;
}

pairsift::synth::SynthConfig synth_config_from_json(const std::string& path) {
  pairsift::synth::SynthConfig config;
  config.operators = pairsift::synth::default_operators();
  if (path.empty()) return config;

  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config: " + path);
  }
  json doc = json::parse(in);
  config.n = doc.value("n", config.n);
  config.prior = doc.value("prior", config.prior);
  config.seed = doc.value("seed", config.seed);
  config.image_width = doc.value("image_width", config.image_width);
  config.image_height = doc.value("image_height", config.image_height);
  if (auto it = doc.find("duplicates"); it != doc.end()) {
    config.duplicates.count = it->value("count", config.duplicates.count);
    config.duplicates.min_size = it->value("min_size", config.duplicates.min_size);
    config.duplicates.max_size = it->value("max_size", config.duplicates.max_size);
    config.duplicates.radius = it->value("radius", config.duplicates.radius);
  }
  if (auto it = doc.find("operators"); it != doc.end()) {
    config.operators.clear();
    for (const json& op : *it) {
      pairsift::synth::OperatorModel model;
      model.name = op.at("name").get<std::string>();
      model.informative = op.value("informative", model.informative);
      model.mean_keep = op.value("mean_keep", model.mean_keep);
      model.mean_drop = op.value("mean_drop", model.mean_drop);
      model.noise_std = op.value("noise_std", model.noise_std);
      model.missing_rate = op.value("missing_rate", model.missing_rate);
      config.operators.push_back(std::move(model));
    }
  }
  return config;
}

// Stacks two score tables over the same operator set.
pairsift::ScoreTable concat_scores(const pairsift::ScoreTable& a,
                                   const pairsift::ScoreTable& b) {
  pairsift::ScoreTable out;
  out.operator_ids = a.operator_ids;
  out.sample_ids = a.sample_ids;
  out.sample_ids.insert(out.sample_ids.end(), b.sample_ids.begin(),
                        b.sample_ids.end());
  out.cells.resize(a.rows() + b.rows(), a.cols());
  out.cells.topRows(a.rows()) = a.cells;
  out.cells.bottomRows(b.rows()) = b.cells;
  out.rebuild_index();
  return out;
}

int run_synth(const CommonArgs& args, int tiny_per_class) {
  pairsift::synth::SynthConfig config = synth_config_from_json(args.config);
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);

  const fs::path out_dir = args.out;
  const pairsift::synth::SynthCorpus corpus = pairsift::synth::generate(config);
  pairsift::synth::write_corpus(corpus, out_dir);

  // Labeled evaluation pools drawn from the same operator model: clean pairs
  // pinned to label 1, noisy ones to label 0. No images or duplicates needed.
  pairsift::synth::SynthConfig pool = config;
  pool.n = tiny_per_class;
  pool.duplicates = {0, 2, 4, config.duplicates.radius};
  pool.force_label = 1;
  pool.id_prefix = "tc";
  pool.seed = config.seed + 1;
  const pairsift::synth::SynthCorpus clean = pairsift::synth::generate(pool);
  pool.force_label = 0;
  pool.id_prefix = "tn";
  pool.seed = config.seed + 2;
  const pairsift::synth::SynthCorpus noisy = pairsift::synth::generate(pool);

  pairsift::write_manifest(clean.manifest, out_dir / "tiny_clean.jsonl");
  pairsift::write_manifest(noisy.manifest, out_dir / "tiny_noisy.jsonl");
  pairsift::write_score_table(concat_scores(clean.scores, noisy.scores),
                              out_dir / "tiny_scores.csv");
  pairsift::DetectionSet tiny_detections = clean.detections;
  tiny_detections.confidences.insert(noisy.detections.confidences.begin(),
                                     noisy.detections.confidences.end());
  pairsift::write_detections(tiny_detections, out_dir / "tiny_detections.jsonl");

  // Ready-to-run pipeline config over the generated corpus.
  json selected = json::array();
  for (const auto& op : config.operators) selected.push_back(op.name);
  json pipeline = {
      {"manifest", "manifest.jsonl"},
      {"scores", "scores.csv"},
      {"detections", "detections.jsonl"},
      {"dedup",
       {{"radius", config.duplicates.radius},
        {"mode", "image"},
        {"alignment_column", config.operators.front().name}}},
      {"operators", {{"selected", selected}, {"gdino_threshold", 0.1}}},
      {"candidates",
       {{"topk", {20, 30, 40, 50, 60, 70, 80}},
        {"beta_fractions", {0.0, 0.25, 0.5}}}},
      {"composite",
       {{"alpha1", 1.0}, {"alpha2", 0.25}, {"alpha3", 0.25}, {"alpha4", 0.25}}},
      {"fit",
       {{"tolerance", 1e-6},
        {"max_iterations", 1000},
        {"init_accuracy", 0.7},
        {"init_prior", 0.5},
        {"seed", 0}}},
      {"search",
       {{"strategy", "random"},
        {"budget", 256},
        {"seed", config.seed + 3},
        {"f1_threshold", 0.5}}},
      {"tiny",
       {{"clean_manifest", "tiny_clean.jsonl"},
        {"noisy_manifest", "tiny_noisy.jsonl"},
        {"scores", "tiny_scores.csv"},
        {"detections", "tiny_detections.jsonl"},
        {"swap_fraction", 0.5},
        {"seed", config.seed + 4}}},
      {"keep_fraction", 0.40}};
  std::ofstream out(out_dir / "pipeline_config.json", std::ios::binary);
  out << pipeline.dump(2) << '\n';

  std::cout << "synth: wrote " << corpus.manifest.size() << " samples and "
            << 2 * tiny_per_class << " tiny-pool samples to " << out_dir.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairsift: weak-supervision curation of image-text pairs"};
  app.require_subcommand(1);

  CommonArgs dedup_args, score_args, lfgen_args, search_args, fit_args,
      curate_args, report_args, synth_args;
  int tiny_per_class = 250;

  add_common(app.add_subcommand("dedup", "hash, cluster, and keep the best-aligned member per duplicate group"),
             dedup_args, true);
  add_common(app.add_subcommand("score", "assemble operator score columns for dedup survivors"),
             score_args, true);
  add_common(app.add_subcommand("lf-gen", "generate candidate labeling functions from score quantiles"),
             lfgen_args, true);
  add_common(app.add_subcommand("search", "search LF combinations against the tiny labeled set"),
             search_args, true);
  add_common(app.add_subcommand("fit", "fit the label model for the winning combination"),
             fit_args, true);
  add_common(app.add_subcommand("curate", "run the full pipeline"), curate_args, true);
  add_common(app.add_subcommand("report", "emit the per-operator diagnostics/weights report"),
             report_args, true);
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic benchmark corpus");
  add_common(synth_cmd, synth_args, false);
  synth_cmd->add_option("--tiny-per-class", tiny_per_class,
                        "samples per class in the tiny pools");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("synth")) {
      return run_synth(synth_args, tiny_per_class);
    }
    if (app.got_subcommand("dedup")) {
      const auto survivors =
          pairsift::stages::dedup(curation_config(dedup_args), dedup_args.out);
      std::cout << "dedup: kept " << survivors.size() << " samples\n";
    } else if (app.got_subcommand("score")) {
      const auto table =
          pairsift::stages::score(curation_config(score_args), score_args.out);
      std::cout << "score: " << table.rows() << " x " << table.cols()
                << " score table\n";
    } else if (app.got_subcommand("lf-gen")) {
      const auto grid =
          pairsift::stages::lf_gen(curation_config(lfgen_args), lfgen_args.out);
      std::size_t total = 0;
      for (const auto& c : grid.candidates) total += c.size();
      std::cout << "lf-gen: " << total << " candidate LFs over "
                << grid.operators.size() << " operators\n";
    } else if (app.got_subcommand("search")) {
      const auto result =
          pairsift::stages::search(curation_config(search_args), search_args.out);
      std::cout << "search: evaluated " << result.rows.size()
                << " combinations, best M = "
                << pairsift::format_double(result.best_metric) << "\n";
    } else if (app.got_subcommand("fit")) {
      const auto fitted =
          pairsift::stages::fit_winner(curation_config(fit_args), fit_args.out);
      std::cout << "fit: " << (fitted.converged ? "converged" : "not converged")
                << " after " << fitted.iterations << " iterations\n";
    } else if (app.got_subcommand("curate")) {
      const auto result =
          pairsift::run_pipeline(curation_config(curate_args), curate_args.out);
      std::cout << "curate: " << result.survivors.size() << " survivors, "
                << result.curated.size() << " curated\n";
    } else if (app.got_subcommand("report")) {
      const auto rep =
          pairsift::stages::report(curation_config(report_args), report_args.out);
      std::cout << "report: " << rep.operators.size() << " operators\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
