#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "defdts/analysis.hpp"
#include "defdts/corpus.hpp"
#include "defdts/errors.hpp"
#include "defdts/metrics.hpp"
#include "defdts/pipeline.hpp"
#include "defdts/prompt.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void emit_error(const std::string& type, const std::string& message) {
  ordered_json j;
  j["error"] = {{"type", type}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

void write_text(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw defdts::IoError("cannot write " + p.string());
  out << content;
}

std::vector<std::string> load_lexicon(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw defdts::IoError("cannot read " + p.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

struct IngestArgs {
  std::string input;
  std::string format = "canonical";
  std::string output;
  bool synth = false;
  uint64_t seed = 0;
  int n_dialogues = 10;
  int segments_min = 3, segments_max = 5;
  int utterances_min = 2, utterances_max = 6;
  double disjointness = 1.0;
};

int cmd_ingest(const IngestArgs& a) {
  defdts::corpus::Corpus c;
  if (a.synth) {
    defdts::corpus::SynthConfig cfg;
    cfg.seed = a.seed;
    cfg.n_dialogues = a.n_dialogues;
    cfg.segments_per_dialogue = {a.segments_min, a.segments_max};
    cfg.utterances_per_segment = {a.utterances_min, a.utterances_max};
    cfg.vocab_disjointness = a.disjointness;
    c = defdts::corpus::synth_corpus(cfg);
  } else {
    if (a.input.empty()) throw defdts::ConfigError("--input or --synth is required");
    c = defdts::corpus::load_corpus(a.input, a.format);
  }
  defdts::corpus::write_corpus(c, a.output);
  ordered_json j;
  j["name"] = c.name;
  j["n_dialogues"] = c.stats.n_dialogues;
  j["avg_utterances"] = c.stats.avg_utterances;
  j["min_utterances"] = c.stats.min_utterances;
  j["max_utterances"] = c.stats.max_utterances;
  j["avg_segments"] = c.stats.avg_segments;
  j["avg_segment_length"] = c.stats.avg_segment_length;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_run(const std::string& config_path, bool dry_run) {
  auto cfg = defdts::pipeline::ExperimentConfig::load(config_path);
  defdts::pipeline::RunOptions opts;
  opts.dry_run = dry_run;
  auto arts = defdts::pipeline::run(cfg, opts);
  if (dry_run) {
    std::cout << "{\"run_id\": \"" << arts.run_id << "\", \"dry_run\": true}\n";
  } else {
    std::cout << arts.report.to_json() << "\n";
  }
  return 0;
}

int cmd_baseline(const std::string& corpus_path, const std::string& format,
                 const std::string& method, uint64_t seed,
                 const std::string& output) {
  auto c = defdts::corpus::load_corpus(corpus_path, format);
  defdts::pipeline::PredictionFile preds;
  if (method == "random") {
    preds = defdts::pipeline::random_baseline(c, seed);
  } else if (method == "texttiling") {
    preds = defdts::pipeline::texttiling_baseline(c);
  } else {
    throw defdts::ConfigError("unknown baseline method: " + method);
  }
  defdts::pipeline::write_predictions(preds, output);
  auto rep = defdts::pipeline::score(preds, c);
  std::cout << rep.to_json() << "\n";
  return 0;
}

int cmd_score(const std::string& predictions_path, const std::string& corpus_path,
              const std::string& format) {
  auto preds = defdts::pipeline::load_predictions(predictions_path);
  auto c = defdts::corpus::load_corpus(corpus_path, format);
  auto rep = defdts::pipeline::score(preds, c);
  std::cout << rep.to_json() << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path) {
  auto cfg = defdts::pipeline::ExperimentConfig::load(config_path);
  auto runs = defdts::pipeline::ablation_suite(cfg);
  std::string md = defdts::pipeline::ablation_markdown(runs);
  write_text(cfg.output_dir / "ablation.md", md);
  write_text(cfg.output_dir / "ablation.csv", defdts::pipeline::ablation_csv(runs));
  std::cout << md;
  return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& kind,
                const std::string& lexicon_path) {
  auto cfg = defdts::pipeline::ExperimentConfig::load(config_path);
  auto arts = defdts::pipeline::load_run(cfg);
  auto corpus = defdts::corpus::load_corpus(cfg.corpus_path, cfg.corpus_format);
  auto pool = cfg.pool_builtin ? defdts::prompt::builtin_pool(*cfg.pool_builtin)
                               : defdts::prompt::load_pool(*cfg.pool_file);
  fs::path dir = cfg.run_dir();
  std::string md, csv;
  if (kind == "intent") {
    auto table = defdts::analysis::intent_table(arts, corpus, pool);
    md = defdts::analysis::intent_table_markdown(table, pool);
    csv = defdts::analysis::intent_table_csv(table, pool);
  } else if (kind == "kappa") {
    auto rep = defdts::analysis::kappa_report(arts, corpus);
    ordered_json j;
    j["kappa"] = rep.kappa;
    j["band"] = rep.band;
    j["n_labels"] = rep.n_labels;
    md = "| Kappa | Band | Labels |\n|---|---|---|\n| " + std::to_string(rep.kappa) +
         " | " + rep.band + " | " + std::to_string(rep.n_labels) + " |\n";
    csv = "kappa,band,n_labels\n" + std::to_string(rep.kappa) + "," + rep.band + "," +
          std::to_string(rep.n_labels) + "\n";
    std::cout << j.dump(2) << "\n";
  } else if (kind == "cue") {
    std::vector<std::string> lexicon = lexicon_path.empty()
                                           ? defdts::analysis::default_cue_words()
                                           : load_lexicon(lexicon_path);
    auto rep = defdts::analysis::cue_word_report(corpus, arts, pool, lexicon);
    md = defdts::analysis::cue_word_markdown(rep);
    csv = defdts::analysis::cue_word_csv(rep);
  } else {
    throw defdts::ConfigError("unknown analysis kind: " + kind +
                              " (expected intent | kappa | cue)");
  }
  write_text(dir / ("report_" + kind + "_" + arts.run_id + ".md"), md);
  write_text(dir / ("report_" + kind + "_" + arts.run_id + ".csv"), csv);
  if (kind != "kappa") std::cout << md;
  return 0;
}

int cmd_report(const std::string& config_path) {
  auto cfg = defdts::pipeline::ExperimentConfig::load(config_path);
  auto arts = defdts::pipeline::load_run(cfg);
  std::cout << arts.report.to_markdown(defdts::prompt::mode_name(cfg.variant.mode));
  std::cout << arts.report.to_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue topic segmentation experiment runner"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ing = app.add_subcommand("ingest", "Convert or synthesize a corpus");
  ing->add_option("--input", ingest.input, "Source dataset file");
  ing->add_option("--format", ingest.format,
                  "canonical | tiage | superdialseg | dialseg711");
  ing->add_option("--output", ingest.output, "Canonical JSONL output")->required();
  ing->add_flag("--synth", ingest.synth, "Generate a synthetic corpus instead");
  ing->add_option("--seed", ingest.seed, "Synthesis seed");
  ing->add_option("--n-dialogues", ingest.n_dialogues, "Synthetic dialogue count");
  ing->add_option("--segments-min", ingest.segments_min, "Min segments per dialogue");
  ing->add_option("--segments-max", ingest.segments_max, "Max segments per dialogue");
  ing->add_option("--utterances-min", ingest.utterances_min,
                  "Min utterances per segment");
  ing->add_option("--utterances-max", ingest.utterances_max,
                  "Max utterances per segment");
  ing->add_option("--disjointness", ingest.disjointness,
                  "Topic vocabulary disjointness in [0,1]");

  std::string run_config;
  bool dry_run = false;
  auto* runc = app.add_subcommand("run", "Execute an experiment config");
  runc->add_option("--config", run_config, "Experiment config JSON")->required();
  runc->add_flag("--dry-run", dry_run, "Write prompts only, no backend calls");

  std::string bl_corpus, bl_format = "canonical", bl_method, bl_output;
  uint64_t bl_seed = 0;
  auto* bl = app.add_subcommand("baseline", "Run a non-LLM segmenter");
  bl->add_option("--corpus", bl_corpus, "Corpus file")->required();
  bl->add_option("--format", bl_format, "Corpus format tag");
  bl->add_option("--method", bl_method, "random | texttiling")->required();
  bl->add_option("--seed", bl_seed, "Seed for the random segmenter");
  bl->add_option("--output", bl_output, "Prediction JSONL output")->required();

  std::string sc_predictions, sc_corpus, sc_format = "canonical";
  auto* sc = app.add_subcommand("score", "Score a prediction file against gold");
  sc->add_option("--predictions", sc_predictions, "Prediction JSONL")->required();
  sc->add_option("--corpus", sc_corpus, "Corpus file")->required();
  sc->add_option("--format", sc_format, "Corpus format tag");

  std::string ab_config;
  auto* ab = app.add_subcommand("ablate", "Run the six-variant ablation suite");
  ab->add_option("--config", ab_config, "Base experiment config JSON")->required();

  std::string an_config, an_kind, an_lexicon;
  auto* an = app.add_subcommand("analyze", "Emit analysis reports for a run");
  an->add_option("--config", an_config, "Experiment config JSON")->required();
  an->add_option("--kind", an_kind, "intent | kappa | cue")->required();
  an->add_option("--lexicon", an_lexicon, "Cue-word list (one per line)");

  std::string rp_config;
  auto* rp = app.add_subcommand("report", "Print the metric report for a run");
  rp->add_option("--config", rp_config, "Experiment config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ing) return cmd_ingest(ingest);
    if (*runc) return cmd_run(run_config, dry_run);
    if (*bl) return cmd_baseline(bl_corpus, bl_format, bl_method, bl_seed, bl_output);
    if (*sc) return cmd_score(sc_predictions, sc_corpus, sc_format);
    if (*ab) return cmd_ablate(ab_config);
    if (*an) return cmd_analyze(an_config, an_kind, an_lexicon);
    if (*rp) return cmd_report(rp_config);
  } catch (const defdts::IdMismatchError& e) {
    emit_error("IdMismatch", e.what());
    return 2;
  } catch (const defdts::CorpusMismatchError& e) {
    emit_error("CorpusMismatch", e.what());
    return 2;
  } catch (const defdts::ConfigError& e) {
    emit_error("ConfigError", e.what());
    return 1;
  } catch (const defdts::Error& e) {
    emit_error("Error", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("Internal", e.what());
    return 1;
  }
  return 0;
}
