#include "defdts/analysis.hpp"

#include <algorithm>
#include <sstream>

#include "defdts/errors.hpp"

namespace defdts::analysis {

namespace {

// Gold shift flags for utterances 1..N-1 (position 0 excluded everywhere).
std::vector<bool> gold_shifts(const corpus::Dialogue& d) {
  corpus::SegmentIds gold = corpus::segmentation_of(d);
  std::vector<bool> out;
  out.reserve(size_t(d.size()) - 1);
  for (int i = 1; i < d.size(); ++i) {
    out.push_back(gold.ids[size_t(i)] != gold.ids[size_t(i - 1)]);
  }
  return out;
}

const corpus::Dialogue& dialogue_by_id(const corpus::Corpus& c, const std::string& id) {
  for (const corpus::Dialogue& d : c.dialogues) {
    if (d.id == id) return d;
  }
  throw CorpusMismatchError("dialogue '" + id + "' not in corpus " + c.name);
}

}  // namespace

const DialogueArtifact* RunArtifacts::find(const std::string& dialogue_id) const {
  for (const DialogueArtifact& a : dialogues) {
    if (a.dialogue_id == dialogue_id) return &a;
  }
  return nullptr;
}

metrics::IntentConfusion intent_table(const RunArtifacts& run,
                                      const corpus::Corpus& corpus,
                                      const prompt::IntentPool& pool) {
  std::vector<std::string> intents;
  std::vector<bool> gold;
  for (const DialogueArtifact& a : run.dialogues) {
    if (!a.parsed || !a.errors.empty()) continue;
    const corpus::Dialogue& d = dialogue_by_id(corpus, a.dialogue_id);
    std::vector<bool> shifts = gold_shifts(d);
    for (int i = 1; i < d.size(); ++i) {
      const auto& ua = a.parsed->analyses[size_t(i)];
      if (!ua.intent) continue;
      intents.push_back(*ua.intent);
      gold.push_back(shifts[size_t(i - 1)]);
    }
  }
  if (intents.empty()) {
    throw NoScoreableDialoguesError("no scoreable dialogues with intents in run " +
                                    run.run_id);
  }
  return metrics::intent_confusion(intents, gold, pool);
}

std::string intent_table_markdown(const metrics::IntentConfusion& confusion,
                                  const prompt::IntentPool& pool) {
  std::ostringstream os;
  os << "| Intent | TP | FP | TN | FN | Acc |\n|---|---|---|---|---|---|\n";
  for (const prompt::IntentDef& def : pool.intents) {
    auto it = confusion.cells.find(def.name);
    if (it == confusion.cells.end()) continue;
    const auto& c = it->second;
    os << "| " << def.name << " | " << c.tp << " | " << c.fp << " | " << c.tn
       << " | " << c.fn << " | " << c.acc << " |\n";
  }
  return os.str();
}

std::string intent_table_csv(const metrics::IntentConfusion& confusion,
                             const prompt::IntentPool& pool) {
  std::ostringstream os;
  os << "intent,tp,fp,tn,fn,acc\n";
  for (const prompt::IntentDef& def : pool.intents) {
    auto it = confusion.cells.find(def.name);
    if (it == confusion.cells.end()) continue;
    const auto& c = it->second;
    os << def.name << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn
       << ',' << c.acc << '\n';
  }
  return os.str();
}

std::string kappa_band(double kappa) {
  if (kappa < 0.0) return "none";
  if (kappa <= 0.20) return "slight";
  if (kappa <= 0.40) return "fair";
  if (kappa <= 0.60) return "moderate";
  if (kappa <= 0.80) return "substantial";
  return "almost perfect";
}

KappaReport kappa_report(const RunArtifacts& run, const corpus::Corpus& corpus) {
  std::vector<std::string> pred, gold;
  for (const DialogueArtifact& a : run.dialogues) {
    if (!a.parsed || !a.errors.empty()) continue;
    const corpus::Dialogue& d = dialogue_by_id(corpus, a.dialogue_id);
    std::vector<bool> shifts = gold_shifts(d);
    for (int i = 1; i < d.size(); ++i) {
      pred.push_back(a.parsed->analyses[size_t(i)].shift_label);
      gold.push_back(shifts[size_t(i - 1)] ? "YES" : "NO");
    }
  }
  KappaReport r;
  r.kappa = metrics::cohen_kappa(pred, gold);
  r.band = kappa_band(r.kappa);
  r.n_labels = long(pred.size());
  return r;
}

MethodComparison per_intent_method_comparison(
    const std::vector<const RunArtifacts*>& runs, const RunArtifacts& reference,
    const corpus::Corpus& corpus) {
  for (const RunArtifacts* run : runs) {
    if (run->corpus_name != reference.corpus_name) {
      throw CorpusMismatchError("run " + run->run_id + " scored corpus '" +
                                run->corpus_name + "', reference scored '" +
                                reference.corpus_name + "'");
    }
  }
  MethodComparison cmp;
  struct Tally {
    long correct = 0;
    long co_error = 0;
  };
  // by intent -> run -> tallies over reference-correct / reference-wrong sets
  std::map<std::string, std::map<std::string, Tally>> tallies;

  for (const DialogueArtifact& ref_art : reference.dialogues) {
    if (!ref_art.parsed || !ref_art.errors.empty()) continue;
    const corpus::Dialogue& d = dialogue_by_id(corpus, ref_art.dialogue_id);
    std::vector<bool> shifts = gold_shifts(d);
    for (int i = 1; i < d.size(); ++i) {
      const auto& ua = ref_art.parsed->analyses[size_t(i)];
      if (!ua.intent) continue;
      bool gold = shifts[size_t(i - 1)];
      bool ref_correct = (ua.shift_label == "YES") == gold;
      auto& group = cmp.by_intent[*ua.intent];
      ref_correct ? ++group.n_reference_correct : ++group.n_reference_wrong;
      for (const RunArtifacts* run : runs) {
        const DialogueArtifact* other = run->find(ref_art.dialogue_id);
        if (!other || !other->parsed || !other->errors.empty()) continue;
        bool other_correct =
            (other->parsed->analyses[size_t(i)].shift_label == "YES") == gold;
        Tally& t = tallies[*ua.intent][run->run_id];
        if (ref_correct && other_correct) ++t.correct;
        if (!ref_correct && !other_correct) ++t.co_error;
      }
    }
  }
  for (auto& [intent, group] : cmp.by_intent) {
    for (const RunArtifacts* run : runs) {
      const Tally& t = tallies[intent][run->run_id];
      group.matched_accuracy[run->run_id] =
          group.n_reference_correct == 0
              ? 0.0
              : double(t.correct) / double(group.n_reference_correct);
      group.co_errors[run->run_id] = t.co_error;
    }
  }
  return cmp;
}

std::string method_comparison_markdown(const MethodComparison& cmp) {
  std::ostringstream os;
  os << "### Matched intent (accuracy where the reference run is correct)\n\n";
  os << "| Intent | n |";
  std::vector<std::string> run_ids;
  if (!cmp.by_intent.empty()) {
    for (const auto& [rid, acc] : cmp.by_intent.begin()->second.matched_accuracy) {
      (void)acc;
      run_ids.push_back(rid);
      os << " " << rid << " |";
    }
  }
  os << "\n|---|---|";
  for (size_t i = 0; i < run_ids.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& [intent, group] : cmp.by_intent) {
    os << "| " << intent << " | " << group.n_reference_correct << " |";
    for (const std::string& rid : run_ids) os << " " << group.matched_accuracy.at(rid) << " |";
    os << "\n";
  }
  os << "\n### Mismatched case (co-error counts where the reference run is wrong)\n\n";
  os << "| Intent | n |";
  for (const std::string& rid : run_ids) os << " " << rid << " |";
  os << "\n|---|---|";
  for (size_t i = 0; i < run_ids.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& [intent, group] : cmp.by_intent) {
    os << "| " << intent << " | " << group.n_reference_wrong << " |";
    for (const std::string& rid : run_ids) os << " " << group.co_errors.at(rid) << " |";
    os << "\n";
  }
  return os.str();
}

std::string method_comparison_csv(const MethodComparison& cmp) {
  std::ostringstream os;
  os << "intent,run,n_reference_correct,matched_accuracy,n_reference_wrong,co_errors\n";
  for (const auto& [intent, group] : cmp.by_intent) {
    for (const auto& [rid, acc] : group.matched_accuracy) {
      os << intent << ',' << rid << ',' << group.n_reference_correct << ',' << acc
         << ',' << group.n_reference_wrong << ',' << group.co_errors.at(rid) << '\n';
    }
  }
  return os.str();
}

CueWordReport cue_word_report(const corpus::Corpus& corpus, const RunArtifacts& run,
                              const prompt::IntentPool& pool,
                              const std::vector<std::string>& lexicon) {
  std::vector<std::string> texts;
  std::vector<bool> shift_intent;
  for (const DialogueArtifact& a : run.dialogues) {
    if (!a.parsed || !a.errors.empty()) continue;
    const corpus::Dialogue& d = dialogue_by_id(corpus, a.dialogue_id);
    for (int i = 0; i < d.size(); ++i) {
      const auto& ua = a.parsed->analyses[size_t(i)];
      if (!ua.intent) continue;
      const prompt::IntentDef* def = pool.find(*ua.intent);
      if (!def) throw UnknownIntentError("unknown intent '" + *ua.intent + "'");
      texts.push_back(d.utterances[size_t(i)].text);
      shift_intent.push_back(def->implies_shift);
    }
  }
  metrics::ContingencyTable full =
      metrics::cue_word_contingency(texts, shift_intent, lexicon);
  CueWordReport report;
  report.table.col_labels = full.col_labels;
  for (size_t r = 0; r < full.observed.size(); ++r) {
    double row_sum = 0.0;
    for (double v : full.observed[r]) row_sum += v;
    if (row_sum == 0.0) {
      report.dropped_rows.push_back(full.row_labels[r]);
    } else {
      report.table.row_labels.push_back(full.row_labels[r]);
      report.table.observed.push_back(full.observed[r]);
    }
  }
  report.chi_square = metrics::chi_square_test(report.table);
  return report;
}

std::string cue_word_markdown(const CueWordReport& report) {
  std::ostringstream os;
  os << "| Cue word | In shift-intent utterances | In all utterances |\n|---|---|---|\n";
  for (size_t r = 0; r < report.table.observed.size(); ++r) {
    os << "| " << report.table.row_labels[r] << " | " << report.table.observed[r][0]
       << " | " << report.table.observed[r][1] << " |\n";
  }
  os << "\nchi-square(" << report.chi_square.df << ") = " << report.chi_square.statistic
     << ", p = " << report.chi_square.p_value << "\n";
  if (!report.dropped_rows.empty()) {
    os << "\nDropped (absent from corpus):";
    for (const std::string& w : report.dropped_rows) os << " " << w;
    os << "\n";
  }
  return os.str();
}

std::string cue_word_csv(const CueWordReport& report) {
  std::ostringstream os;
  os << "cue_word,shift_count,all_count\n";
  for (size_t r = 0; r < report.table.observed.size(); ++r) {
    os << report.table.row_labels[r] << ',' << report.table.observed[r][0] << ','
       << report.table.observed[r][1] << '\n';
  }
  return os.str();
}

const std::vector<std::string>& default_cue_words() {
  static const std::vector<std::string> kWords = {
      "so",      "anyway",  "well",   "now",    "okay",  "right", "but",
      "actually", "speaking", "besides", "also",  "oh",    "by",    "hey"};
  return kWords;
}

}  // namespace defdts::analysis
