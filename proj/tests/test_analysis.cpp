#include <doctest.h>

#include <cctype>
#include <string>
#include <vector>

#include "defdts/analysis.hpp"
#include "defdts/errors.hpp"
#include "defdts/llm_client.hpp"
#include "defdts/parser.hpp"
#include "defdts/prompt.hpp"

using namespace defdts;

namespace {

corpus::Dialogue gold_dialogue(const std::string& id, const std::vector<int>& gold,
                               const std::vector<std::string>& texts = {}) {
  corpus::Dialogue d;
  d.id = id;
  for (size_t i = 0; i < gold.size(); ++i) {
    corpus::Utterance u;
    u.index = int(i);
    u.speaker = i % 2 == 0 ? "A" : "B";
    u.text = i < texts.size() ? texts[i] : "turn " + std::to_string(i);
    u.gold_segment_id = gold[i];
    d.utterances.push_back(std::move(u));
  }
  return d;
}

// Run the mock backend + parser over a corpus to obtain artifacts.
analysis::RunArtifacts run_mock(const corpus::Corpus& c, const prompt::IntentPool& pool,
                                const llm::MockPolicy& policy,
                                const std::string& run_id) {
  analysis::RunArtifacts arts;
  arts.run_id = run_id;
  arts.corpus_name = c.name;
  arts.pool_name = pool.name;
  for (const corpus::Dialogue& d : c.dialogues) {
    std::string text = llm::mock_complete(policy, d, pool, {});
    parser::ParseResult res =
        parser::parse_output(text, d.size(), pool, prompt::Format::Xml, {}, d.id);
    analysis::DialogueArtifact a;
    a.dialogue_id = d.id;
    a.errors = res.errors;
    if (res.scoreable()) {
      a.parsed = res.parsed;
      a.predicted = parser::to_segmentation(*res.parsed, pool);
    }
    arts.dialogues.push_back(std::move(a));
  }
  return arts;
}

corpus::Corpus small_corpus() {
  corpus::Corpus c;
  c.name = "small";
  c.dialogues.push_back(gold_dialogue("d0", {0, 0, 1, 1, 2}));
  c.dialogues.push_back(gold_dialogue("d1", {0, 1, 1, 2, 2, 2}));
  c.stats = corpus::compute_stats(c.dialogues);
  return c;
}

}  // namespace

TEST_CASE("intent table on a gold-echo run has perfect cells") {
  corpus::Corpus c = small_corpus();
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  analysis::RunArtifacts run = run_mock(c, pool, {}, "r0");
  metrics::IntentConfusion t = analysis::intent_table(run, c, pool);
  long total = 0;
  for (const auto& [name, cells] : t.cells) {
    CHECK(cells.fp == 0);
    CHECK(cells.fn == 0);
    if (cells.tp + cells.tn > 0) CHECK(cells.acc == doctest::Approx(1.0));
    total += cells.tp + cells.fp + cells.tn + cells.fn;
  }
  // 4 + 5 non-first utterances.
  CHECK(total == 9);
  std::string md = analysis::intent_table_markdown(t, pool);
  CHECK(md.find("| Intent |") != std::string::npos);
  std::string csv = analysis::intent_table_csv(t, pool);
  CHECK(csv.find("intent,tp,fp,tn,fn,acc") == 0);
}

TEST_CASE("intent table needs at least one scoreable dialogue") {
  corpus::Corpus c = small_corpus();
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  analysis::RunArtifacts empty;
  empty.run_id = "none";
  CHECK_THROWS_AS(analysis::intent_table(empty, c, pool), NoScoreableDialoguesError);
}

TEST_CASE("kappa report on gold echo is perfect") {
  corpus::Corpus c = small_corpus();
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  analysis::RunArtifacts run = run_mock(c, pool, {}, "r0");
  analysis::KappaReport k = analysis::kappa_report(run, c);
  CHECK(k.kappa == doctest::Approx(1.0));
  CHECK(k.band == "almost perfect");
  CHECK(k.n_labels == 9);
}

TEST_CASE("kappa interpretation bands") {
  CHECK(analysis::kappa_band(-0.2) == "none");
  CHECK(analysis::kappa_band(0.1) == "slight");
  CHECK(analysis::kappa_band(0.3) == "fair");
  CHECK(analysis::kappa_band(0.485) == "moderate");
  CHECK(analysis::kappa_band(0.7) == "substantial");
  CHECK(analysis::kappa_band(0.975) == "almost perfect");
}

TEST_CASE("method comparison of a run against itself") {
  corpus::Corpus c = small_corpus();
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  analysis::RunArtifacts run = run_mock(c, pool, {}, "ref");
  analysis::MethodComparison cmp =
      analysis::per_intent_method_comparison({&run}, run, c);
  long ref_total = 0;
  for (const auto& [intent, group] : cmp.by_intent) {
    ref_total += group.n_reference_correct + group.n_reference_wrong;
    if (group.n_reference_correct > 0) {
      CHECK(group.matched_accuracy.at("ref") == doctest::Approx(1.0));
    }
    CHECK(group.co_errors.at("ref") == group.n_reference_wrong);
  }
  CHECK(ref_total == 9);
  CHECK(analysis::method_comparison_markdown(cmp).find("Matched intent") !=
        std::string::npos);
  CHECK(analysis::method_comparison_csv(cmp).find("intent,run,") == 0);
}

TEST_CASE("method comparison detects corpus mismatch") {
  corpus::Corpus c = small_corpus();
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  analysis::RunArtifacts ref = run_mock(c, pool, {}, "ref");
  analysis::RunArtifacts other = ref;
  other.run_id = "other";
  other.corpus_name = "different";
  CHECK_THROWS_AS(analysis::per_intent_method_comparison({&other}, ref, c),
                  CorpusMismatchError);
}

TEST_CASE("co-errors counted when both runs are wrong") {
  corpus::Corpus c = small_corpus();
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  analysis::RunArtifacts ref = run_mock(c, pool, {}, "ref");
  // Make the reference wrong (and the compared run equally wrong) at d0
  // utterance 2 by flipping its emitted label.
  analysis::RunArtifacts wrong = ref;
  wrong.run_id = "wrong";
  auto& a = wrong.dialogues[0].parsed->analyses[2];
  std::string intent = *a.intent;
  a.shift_label = a.shift_label == "YES" ? "NO" : "YES";
  analysis::MethodComparison cmp =
      analysis::per_intent_method_comparison({&wrong}, wrong, c);
  CHECK(cmp.by_intent.at(intent).n_reference_wrong == 1);
  CHECK(cmp.by_intent.at(intent).co_errors.at("wrong") == 1);
}

TEST_CASE("cue word report: skewed cue is significant") {
  corpus::Corpus c;
  c.name = "cue";
  std::vector<int> gold;
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) {
    gold.push_back((i + 1) / 2);
    bool shift = i == 0 || gold[size_t(i)] != gold[size_t(i - 1)];
    texts.push_back(shift ? "anyway new subject entirely" : "plain continuation words");
  }
  c.dialogues.push_back(gold_dialogue("d0", gold, texts));
  c.stats = corpus::compute_stats(c.dialogues);
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  analysis::RunArtifacts run = run_mock(c, pool, {}, "r0");
  analysis::CueWordReport rep =
      analysis::cue_word_report(c, run, pool, {"anyway", "plain", "zebra"});
  CHECK(rep.dropped_rows == std::vector<std::string>{"zebra"});
  CHECK(rep.table.observed.size() == 2);
  CHECK(rep.chi_square.statistic > 0.0);
  CHECK(rep.chi_square.p_value < 0.05);
  CHECK(analysis::cue_word_markdown(rep).find("chi-square") != std::string::npos);
  CHECK(analysis::cue_word_csv(rep).find("cue_word,") == 0);
}

TEST_CASE("default cue lexicon is non-empty and lowercase") {
  const auto& words = analysis::default_cue_words();
  CHECK_FALSE(words.empty());
  for (const std::string& w : words) {
    for (char ch : w) CHECK_FALSE(bool(isupper(static_cast<unsigned char>(ch))));
  }
}
