#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "defdts/corpus.hpp"

namespace defdts::prompt {
struct IntentPool;  // see prompt.hpp
}

namespace defdts::metrics {

using corpus::SegmentIds;

struct MetricReport {
  double pk = 0.0;
  double wd = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int n_dialogues_scored = 0;
  int n_dialogues_errored = 0;

  std::string to_json() const;
  // One row in Table-style column order: Pk, WD, F1.
  std::string to_markdown(const std::string& label) const;
};

struct ConfusionCells {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double acc = 0.0;
};

// Per-intent confusion of deduced shift label vs gold shift. Shift-implying
// intents can only populate tp/fp; non-shift intents only tn/fn.
struct IntentConfusion {
  std::map<std::string, ConfusionCells> cells;  // keyed by intent name
};

struct ContingencyTable {
  std::vector<std::vector<double>> observed;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
};

// Default window: k = max(1, round(N / (2 * n_ref_segments))).
int default_window(const SegmentIds& ref);

double pk_error(const SegmentIds& ref, const SegmentIds& hyp,
                std::optional<int> k = std::nullopt);
double window_diff(const SegmentIds& ref, const SegmentIds& hyp,
                   std::optional<int> k = std::nullopt);

// Boundary-level precision/recall/F1; position 0 is excluded (always a
// segment start for both sides).
std::tuple<double, double, double> boundary_f1(const SegmentIds& ref,
                                               const SegmentIds& hyp);

// Pk/WD averaged per dialogue (unweighted); precision/recall/F1
// micro-averaged over pooled boundary counts.
MetricReport corpus_metrics(
    const std::vector<std::pair<SegmentIds, SegmentIds>>& pairs);

double cohen_kappa(const std::vector<std::string>& a,
                   const std::vector<std::string>& b);

// Per-utterance predicted intents vs gold shift flags (first utterance
// already excluded by the caller).
IntentConfusion intent_confusion(const std::vector<std::string>& intents,
                                 const std::vector<bool>& gold_shift,
                                 const prompt::IntentPool& pool);

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

ChiSquareResult chi_square_test(const ContingencyTable& t);

// Regularized upper incomplete gamma Q(a, x); exposed for the p-value path.
double gamma_q(double a, double x);

// Rows = cue words; columns = {count in shift-intent utterances, count in all
// utterances}. intents_shift[i] says whether utterance i carries a
// shift-implying intent; texts are matched token-wise, case-insensitively.
ContingencyTable cue_word_contingency(const std::vector<std::string>& texts,
                                      const std::vector<bool>& intents_shift,
                                      const std::vector<std::string>& lexicon);

}  // namespace defdts::metrics
