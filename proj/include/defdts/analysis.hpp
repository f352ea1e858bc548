#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "defdts/corpus.hpp"
#include "defdts/metrics.hpp"
#include "defdts/parser.hpp"
#include "defdts/prompt.hpp"

namespace defdts::analysis {

// Everything a completed run leaves behind that analysis needs.
struct DialogueArtifact {
  std::string dialogue_id;
  std::string prompt_hash;
  std::optional<parser::ParsedDialogue> parsed;  // absent when errored
  std::vector<parser::ParseError> errors;
  std::optional<corpus::SegmentIds> predicted;
};

struct RunArtifacts {
  std::string run_id;
  std::string corpus_name;
  std::string pool_name;
  prompt::PromptVariant variant;
  std::vector<DialogueArtifact> dialogues;
  metrics::MetricReport report;

  const DialogueArtifact* find(const std::string& dialogue_id) const;
};

// Table-5-shaped intent confusion over all scoreable dialogues.
metrics::IntentConfusion intent_table(const RunArtifacts& run,
                                      const corpus::Corpus& corpus,
                                      const prompt::IntentPool& pool);

std::string intent_table_markdown(const metrics::IntentConfusion& confusion,
                                  const prompt::IntentPool& pool);
std::string intent_table_csv(const metrics::IntentConfusion& confusion,
                             const prompt::IntentPool& pool);

struct KappaReport {
  double kappa = 0.0;
  std::string band;  // slight | fair | moderate | substantial | almost perfect
  long n_labels = 0;
};

// Pooled per-utterance YES/NO agreement, first utterances excluded.
KappaReport kappa_report(const RunArtifacts& run, const corpus::Corpus& corpus);
std::string kappa_band(double kappa);

struct MethodComparison {
  // Grouped by the reference run's predicted intent.
  // matched: for utterances the reference got right, per-run accuracy.
  // co_errors: for utterances the reference got wrong, per-run co-error counts.
  struct Group {
    long n_reference_correct = 0;
    long n_reference_wrong = 0;
    std::map<std::string, double> matched_accuracy;  // run_id -> accuracy
    std::map<std::string, long> co_errors;           // run_id -> count
  };
  std::map<std::string, Group> by_intent;
};

MethodComparison per_intent_method_comparison(
    const std::vector<const RunArtifacts*>& runs, const RunArtifacts& reference,
    const corpus::Corpus& corpus);

std::string method_comparison_markdown(const MethodComparison& cmp);
std::string method_comparison_csv(const MethodComparison& cmp);

struct CueWordReport {
  metrics::ContingencyTable table;        // zero-marginal rows already dropped
  std::vector<std::string> dropped_rows;  // words excluded before testing
  metrics::ChiSquareResult chi_square;
};

CueWordReport cue_word_report(const corpus::Corpus& corpus, const RunArtifacts& run,
                              const prompt::IntentPool& pool,
                              const std::vector<std::string>& lexicon);

std::string cue_word_markdown(const CueWordReport& report);
std::string cue_word_csv(const CueWordReport& report);

// Stand-in discourse-marker lexicon (the original study's list is not
// published); also shipped at data/cue_words.txt.
const std::vector<std::string>& default_cue_words();

}  // namespace defdts::analysis
