#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "defdts/corpus.hpp"
#include "defdts/errors.hpp"
#include "defdts/pipeline.hpp"

using namespace defdts;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("defdts_pipe_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

pipeline::ExperimentConfig mock_config(const TempDir& dir, int n_dialogues,
                                       uint64_t mock_seed = 0,
                                       double malform = 0.0) {
  corpus::SynthConfig synth;
  synth.seed = 21;
  synth.n_dialogues = n_dialogues;
  corpus::Corpus c = corpus::synth_corpus(synth);
  fs::path corpus_path = dir.path / "corpus.jsonl";
  corpus::write_corpus(c, corpus_path);

  pipeline::ExperimentConfig cfg;
  cfg.corpus_path = corpus_path;
  cfg.pool_builtin = "tiage";
  llm::MockPolicy policy;
  if (malform > 0.0) {
    policy.mode = llm::MockPolicy::Mode::Noisy;
    policy.malform_prob = malform;
    policy.seed = mock_seed;
  }
  cfg.mock = policy;
  cfg.output_dir = dir.path / "runs";
  return cfg;
}

// Directory contents as a path -> bytes map, for byte-identical comparison.
// config.json is skipped: it records absolute paths that differ per test dir.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "config.json") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[fs::relative(entry.path(), root).string()] = os.str();
  }
  return out;
}

}  // namespace

TEST_CASE("experiment config JSON round-trip") {
  TempDir dir("cfg");
  pipeline::ExperimentConfig cfg = mock_config(dir, 2);
  cfg.variant = {prompt::Mode::NoExamples, prompt::Format::Json};
  cfg.scoring_policy = pipeline::ScoringPolicy::Deduced;
  cfg.sample = 1;
  cfg.seed = 42;
  pipeline::ExperimentConfig back = pipeline::ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.run_id() == cfg.run_id());
  CHECK(back.variant.mode == prompt::Mode::NoExamples);
  CHECK(back.scoring_policy == pipeline::ScoringPolicy::Deduced);
  REQUIRE(back.sample.has_value());
  CHECK(*back.sample == 1);
}

TEST_CASE("config validation rules") {
  TempDir dir("cfgbad");
  pipeline::ExperimentConfig cfg = mock_config(dir, 1);
  CHECK_NOTHROW(cfg.validate());

  pipeline::ExperimentConfig no_backend = cfg;
  no_backend.mock.reset();
  CHECK_THROWS_AS(no_backend.validate(), ConfigError);

  pipeline::ExperimentConfig two_pools = cfg;
  two_pools.pool_file = "x.json";
  CHECK_THROWS_AS(two_pools.validate(), ConfigError);

  pipeline::ExperimentConfig bad_policy = cfg;
  bad_policy.scoring_policy = pipeline::ScoringPolicy::Deduced;
  bad_policy.variant.mode = prompt::Mode::NoIntent;
  CHECK_THROWS_AS(bad_policy.validate(), ConfigError);

  CHECK_THROWS_AS(pipeline::ExperimentConfig::from_json("not json"), ConfigError);
}

TEST_CASE("gold echo run scores perfectly and persists artifacts") {
  TempDir dir("gold");
  pipeline::ExperimentConfig cfg = mock_config(dir, 5);
  analysis::RunArtifacts arts = pipeline::run(cfg);
  CHECK(arts.report.pk == 0.0);
  CHECK(arts.report.wd == 0.0);
  CHECK(arts.report.f1 == 1.0);
  CHECK(arts.report.n_dialogues_scored == 5);
  CHECK(arts.report.n_dialogues_errored == 0);
  CHECK(arts.dialogues.size() == 5);

  fs::path rd = cfg.run_dir();
  CHECK(fs::exists(rd / "config.json"));
  CHECK(fs::exists(rd / "predictions.jsonl"));
  CHECK(fs::exists(rd / "report.json"));
  pipeline::PredictionFile preds = pipeline::load_predictions(rd / "predictions.jsonl");
  CHECK(preds.records.size() == 5);
  for (const auto& r : preds.records) {
    CHECK(r.source == "defdts");
    CHECK_FALSE(r.error);
  }

  analysis::RunArtifacts reloaded = pipeline::load_run(cfg);
  CHECK(reloaded.report.f1 == 1.0);
  CHECK(reloaded.dialogues.size() == 5);
}

TEST_CASE("noisy run counts exactly the corrupted dialogues") {
  TempDir dir("noise");
  pipeline::ExperimentConfig cfg = mock_config(dir, 20, 3, 0.2);
  // Independent oracle: a dialogue is corrupted iff the malformed text
  // differs from the same policy with malform disabled.
  corpus::Corpus c = corpus::load_corpus(cfg.corpus_path);
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  llm::MockPolicy clean = *cfg.mock;
  clean.malform_prob = 0.0;
  int expected_errors = 0;
  for (const corpus::Dialogue& d : c.dialogues) {
    if (llm::mock_complete(*cfg.mock, d, pool, cfg.variant) !=
        llm::mock_complete(clean, d, pool, cfg.variant)) {
      ++expected_errors;
    }
  }
  analysis::RunArtifacts arts = pipeline::run(cfg);
  CHECK(arts.report.n_dialogues_errored == expected_errors);
  CHECK(arts.report.n_dialogues_scored + arts.report.n_dialogues_errored == 20);
}

TEST_CASE("resume continues where the previous invocation stopped") {
  TempDir a("resume_a");
  TempDir b("resume_b");
  pipeline::ExperimentConfig cfg_a = mock_config(a, 10);
  pipeline::ExperimentConfig cfg_b = mock_config(b, 10);

  // Uninterrupted reference run.
  int calls_ref = 0;
  pipeline::RunOptions opts_ref;
  opts_ref.on_backend_call = [&](const std::string&) { ++calls_ref; };
  pipeline::run(cfg_a, opts_ref);
  CHECK(calls_ref == 10);

  // Interrupted at 4, then resumed.
  int calls1 = 0;
  pipeline::RunOptions stop4;
  stop4.stop_after_n = 4;
  stop4.on_backend_call = [&](const std::string&) { ++calls1; };
  pipeline::run(cfg_b, stop4);
  CHECK(calls1 == 4);

  int calls2 = 0;
  pipeline::RunOptions rest;
  rest.on_backend_call = [&](const std::string&) { ++calls2; };
  analysis::RunArtifacts resumed = pipeline::run(cfg_b, rest);
  CHECK(calls2 == 6);
  CHECK(resumed.report.f1 == 1.0);

  // Byte-identical artifacts.
  CHECK(snapshot(cfg_a.run_dir()) == snapshot(cfg_b.run_dir()));
}

TEST_CASE("dry run writes prompts and makes zero backend calls") {
  TempDir dir("dry");
  pipeline::ExperimentConfig cfg = mock_config(dir, 3);
  int calls = 0;
  pipeline::RunOptions opts;
  opts.dry_run = true;
  opts.on_backend_call = [&](const std::string&) { ++calls; };
  pipeline::run(cfg, opts);
  CHECK(calls == 0);
  int prompt_files = 0;
  for (const auto& e : fs::directory_iterator(cfg.run_dir())) {
    if (e.path().filename().string().find(".prompt.txt") != std::string::npos) {
      ++prompt_files;
    }
  }
  CHECK(prompt_files == 3);
  CHECK_FALSE(fs::exists(cfg.run_dir() / "predictions.jsonl"));
}

TEST_CASE("sampling is deterministic and order-preserving") {
  TempDir dir("sample");
  pipeline::ExperimentConfig cfg = mock_config(dir, 10);
  cfg.sample = 4;
  cfg.seed = 9;
  analysis::RunArtifacts a = pipeline::run(cfg);
  CHECK(a.dialogues.size() == 4);
  std::vector<std::string> order;
  for (const auto& d : a.dialogues) order.push_back(d.dialogue_id);
  std::vector<std::string> sorted = order;
  // synth ids are zero-padded, lexicographic == corpus order
  CHECK(std::is_sorted(sorted.begin(), sorted.end()));
}

TEST_CASE("score spec examples") {
  corpus::Corpus c;
  c.name = "s";
  for (int di = 0; di < 2; ++di) {
    corpus::Dialogue d;
    d.id = "d" + std::to_string(di);
    std::vector<int> gold = {0, 0, 1, 1};
    for (size_t i = 0; i < gold.size(); ++i) {
      corpus::Utterance u;
      u.index = int(i);
      u.speaker = "A";
      u.text = "t" + std::to_string(i);
      u.gold_segment_id = gold[i];
      d.utterances.push_back(std::move(u));
    }
    c.dialogues.push_back(std::move(d));
  }
  c.stats = corpus::compute_stats(c.dialogues);

  pipeline::PredictionFile gold_preds;
  for (const auto& d : c.dialogues) {
    gold_preds.records.push_back({d.id, corpus::segmentation_of(d), "defdts", false});
  }
  metrics::MetricReport perfect = pipeline::score(gold_preds, c);
  CHECK(perfect.pk == 0.0);
  CHECK(perfect.wd == 0.0);
  CHECK(perfect.f1 == 1.0);

  pipeline::PredictionFile flat;
  for (const auto& d : c.dialogues) {
    corpus::SegmentIds one;
    one.ids = {0, 0, 0, 0};
    flat.records.push_back({d.id, one, "defdts", false});
  }
  metrics::MetricReport rep = pipeline::score(flat, c);
  CHECK(rep.recall == 0.0);
  CHECK(rep.f1 == 0.0);

  pipeline::PredictionFile wrong_ids = gold_preds;
  wrong_ids.records[0].id = "zzz";
  CHECK_THROWS_AS(pipeline::score(wrong_ids, c), IdMismatchError);

  pipeline::PredictionFile errored = gold_preds;
  errored.records[1].error = true;
  errored.records[1].segments.ids.clear();
  metrics::MetricReport partial = pipeline::score(errored, c);
  CHECK(partial.n_dialogues_scored == 1);
  CHECK(partial.n_dialogues_errored == 1);
}

TEST_CASE("prediction file round-trip") {
  TempDir dir("pred");
  pipeline::PredictionFile f;
  corpus::SegmentIds s;
  s.ids = {0, 0, 1};
  f.records.push_back({"d0", s, "random", false});
  f.records.push_back({"d1", {}, "texttiling", true});
  fs::path p = dir.path / "preds.jsonl";
  pipeline::write_predictions(f, p);
  pipeline::PredictionFile back = pipeline::load_predictions(p);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].id == "d0");
  CHECK(back.records[0].segments.ids == std::vector<int>{0, 0, 1});
  CHECK(back.records[1].error);
  CHECK(back.records[1].source == "texttiling");
}

TEST_CASE("baseline prediction files") {
  TempDir dir("base");
  pipeline::ExperimentConfig cfg = mock_config(dir, 4);
  corpus::Corpus c = corpus::load_corpus(cfg.corpus_path);
  pipeline::PredictionFile rnd = pipeline::random_baseline(c, 5);
  CHECK(rnd.records.size() == 4);
  for (const auto& r : rnd.records) CHECK(r.source == "random");
  metrics::MetricReport rep = pipeline::score(rnd, c);
  CHECK(rep.n_dialogues_scored == 4);

  pipeline::PredictionFile tt = pipeline::texttiling_baseline(c);
  CHECK(tt.records.size() == 4);
  for (const auto& r : tt.records) CHECK(r.source == "texttiling");
}

TEST_CASE("ablation suite emits six runs in fixed order") {
  TempDir dir("ablate");
  pipeline::ExperimentConfig cfg = mock_config(dir, 2);
  std::vector<analysis::RunArtifacts> runs = pipeline::ablation_suite(cfg);
  REQUIRE(runs.size() == 6);
  std::vector<prompt::Mode> expected = {
      prompt::Mode::NoAll,     prompt::Mode::NoIntent,
      prompt::Mode::NoExamples, prompt::Mode::NoContext,
      prompt::Mode::NoBidirectional, prompt::Mode::Full};
  for (size_t i = 0; i < runs.size(); ++i) {
    CHECK(runs[i].variant.mode == expected[i]);
    // The gold-echo oracle ignores the variant.
    CHECK(runs[i].report.f1 == 1.0);
  }
  std::string md = pipeline::ablation_markdown(runs);
  CHECK(md.find("NO_ALL") < md.find("FULL"));
}

TEST_CASE("format suite covers NL, JSON, XML in order") {
  TempDir dir("format");
  pipeline::ExperimentConfig cfg = mock_config(dir, 2);
  std::vector<analysis::RunArtifacts> runs = pipeline::format_suite(cfg);
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].variant.format == prompt::Format::Nl);
  CHECK(runs[1].variant.format == prompt::Format::Json);
  CHECK(runs[2].variant.format == prompt::Format::Xml);
  for (const auto& r : runs) CHECK(r.report.f1 == 1.0);
}

TEST_CASE("two full runs are byte-identical") {
  TempDir a("det_a");
  TempDir b("det_b");
  pipeline::run(mock_config(a, 6, 3, 0.2));
  pipeline::run(mock_config(b, 6, 3, 0.2));
  CHECK(snapshot(mock_config(a, 6, 3, 0.2).run_dir()) ==
        snapshot(mock_config(b, 6, 3, 0.2).run_dir()));
}
