#include "defdts/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "defdts/errors.hpp"
#include "defdts/prompt.hpp"
#include "json.hpp"

namespace defdts::metrics {

namespace {

void check_pair(const SegmentIds& ref, const SegmentIds& hyp) {
  if (ref.size() != hyp.size()) {
    throw LengthMismatchError("ref has " + std::to_string(ref.size()) +
                              " utterances, hyp has " + std::to_string(hyp.size()));
  }
  if (ref.size() < 2) {
    throw DegenerateInputError("segmentation metrics need at least 2 utterances");
  }
}

int resolve_window(const SegmentIds& ref, std::optional<int> k) {
  int n = ref.size();
  int kk = k ? *k : default_window(ref);
  if (kk < 1 || kk > n - 1) {
    throw DegenerateInputError("window size " + std::to_string(kk) +
                               " outside [1, " + std::to_string(n - 1) + "]");
  }
  return kk;
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["pk"] = pk;
  j["wd"] = wd;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["n_dialogues_scored"] = n_dialogues_scored;
  j["n_dialogues_errored"] = n_dialogues_errored;
  return j.dump(2);
}

std::string MetricReport::to_markdown(const std::string& label) const {
  std::ostringstream os;
  os << "| " << label << " | " << pk << " | " << wd << " | " << f1 << " |";
  return os.str();
}

int default_window(const SegmentIds& ref) {
  int n = ref.size();
  int segs = ref.n_segments();
  int k = int(std::lround(double(n) / (2.0 * double(segs))));
  k = std::max(1, k);
  k = std::min(k, n - 1);
  return k;
}

double pk_error(const SegmentIds& ref, const SegmentIds& hyp, std::optional<int> k) {
  check_pair(ref, hyp);
  int kk = resolve_window(ref, k);
  int n = ref.size();
  int disagreements = 0;
  for (int i = 0; i + kk < n; ++i) {
    bool same_ref = ref.ids[size_t(i)] == ref.ids[size_t(i + kk)];
    bool same_hyp = hyp.ids[size_t(i)] == hyp.ids[size_t(i + kk)];
    if (same_ref != same_hyp) ++disagreements;
  }
  return double(disagreements) / double(n - kk);
}

double window_diff(const SegmentIds& ref, const SegmentIds& hyp, std::optional<int> k) {
  check_pair(ref, hyp);
  int kk = resolve_window(ref, k);
  int n = ref.size();
  auto boundaries_inside = [](const SegmentIds& s, int a, int b) {
    int count = 0;
    for (int j = a; j < b; ++j) {
      if (s.ids[size_t(j + 1)] != s.ids[size_t(j)]) ++count;
    }
    return count;
  };
  int disagreements = 0;
  for (int i = 0; i + kk < n; ++i) {
    if (boundaries_inside(ref, i, i + kk) != boundaries_inside(hyp, i, i + kk)) {
      ++disagreements;
    }
  }
  return double(disagreements) / double(n - kk);
}

namespace {

struct F1Counts {
  long tp = 0, fp = 0, fn = 0;
};

F1Counts boundary_counts(const SegmentIds& ref, const SegmentIds& hyp) {
  F1Counts c;
  auto rb = corpus::to_boundaries(ref);
  auto hb = corpus::to_boundaries(hyp);
  for (size_t j = 0; j < rb.bits.size(); ++j) {
    if (rb.bits[j] && hb.bits[j]) ++c.tp;
    else if (!rb.bits[j] && hb.bits[j]) ++c.fp;
    else if (rb.bits[j] && !hb.bits[j]) ++c.fn;
  }
  return c;
}

}  // namespace

std::tuple<double, double, double> boundary_f1(const SegmentIds& ref,
                                               const SegmentIds& hyp) {
  if (ref.size() != hyp.size()) {
    throw LengthMismatchError("boundary_f1: length mismatch");
  }
  if (ref.size() < 2) {
    throw DegenerateInputError("boundary_f1 needs at least 2 utterances");
  }
  F1Counts c = boundary_counts(ref, hyp);
  double precision = safe_div(double(c.tp), double(c.tp + c.fp));
  double recall = safe_div(double(c.tp), double(c.tp + c.fn));
  double f1 = safe_div(2.0 * precision * recall, precision + recall);
  return {precision, recall, f1};
}

MetricReport corpus_metrics(
    const std::vector<std::pair<SegmentIds, SegmentIds>>& pairs) {
  if (pairs.empty()) throw EmptyInputError("corpus_metrics: no pairs");
  MetricReport r;
  F1Counts pooled;
  double pk_sum = 0.0, wd_sum = 0.0;
  for (const auto& [ref, hyp] : pairs) {
    pk_sum += pk_error(ref, hyp);
    wd_sum += window_diff(ref, hyp);
    F1Counts c = boundary_counts(ref, hyp);
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
  }
  r.n_dialogues_scored = int(pairs.size());
  r.pk = pk_sum / double(pairs.size());
  r.wd = wd_sum / double(pairs.size());
  r.precision = safe_div(double(pooled.tp), double(pooled.tp + pooled.fp));
  r.recall = safe_div(double(pooled.tp), double(pooled.tp + pooled.fn));
  r.f1 = safe_div(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

double cohen_kappa(const std::vector<std::string>& a,
                   const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw LengthMismatchError("cohen_kappa: length mismatch");
  if (a.empty()) throw EmptyInputError("cohen_kappa: empty sequences");
  double n = double(a.size());
  long agree = 0;
  std::map<std::string, long> count_a, count_b;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++agree;
    ++count_a[a[i]];
    ++count_b[b[i]];
  }
  double p_o = double(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, ca] : count_a) {
    auto it = count_b.find(label);
    if (it != count_b.end()) p_e += (double(ca) / n) * (double(it->second) / n);
  }
  if (p_e >= 1.0) return p_o >= 1.0 ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

IntentConfusion intent_confusion(const std::vector<std::string>& intents,
                                 const std::vector<bool>& gold_shift,
                                 const prompt::IntentPool& pool) {
  if (intents.size() != gold_shift.size()) {
    throw LengthMismatchError("intent_confusion: length mismatch");
  }
  IntentConfusion out;
  for (const auto& def : pool.intents) out.cells[def.name];  // stable rows
  for (size_t i = 0; i < intents.size(); ++i) {
    const prompt::IntentDef* def = pool.find(intents[i]);
    if (!def) throw UnknownIntentError("unknown intent '" + intents[i] + "'");
    ConfusionCells& c = out.cells[def->name];
    if (def->implies_shift) {
      gold_shift[i] ? ++c.tp : ++c.fp;
    } else {
      gold_shift[i] ? ++c.fn : ++c.tn;
    }
  }
  for (auto& [name, c] : out.cells) {
    long total = c.tp + c.fp + c.tn + c.fn;
    c.acc = total == 0 ? 0.0 : double(c.tp + c.tn) / double(total);
  }
  return out;
}

namespace {

// Regularized lower incomplete gamma P(a, x) by series expansion (x < a + 1).
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by Lentz continued fraction (x >= a + 1).
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 10000; ++i) {
    double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw DegenerateInputError("gamma_q: invalid arguments");
  if (x == 0.0) return 1.0;
  double q = (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
  if (q < 1e-300) return 0.0;
  return std::clamp(q, 0.0, 1.0);
}

ChiSquareResult chi_square_test(const ContingencyTable& t) {
  size_t rows = t.observed.size();
  if (rows < 2) throw DegenerateTableError("need at least 2 rows");
  size_t cols = t.observed.front().size();
  if (cols < 2) throw DegenerateTableError("need at least 2 columns");
  for (const auto& row : t.observed) {
    if (row.size() != cols) throw DegenerateTableError("ragged table");
    for (double v : row) {
      if (v < 0.0) throw DegenerateTableError("negative count");
    }
  }
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) {
      row_sum[r] += t.observed[r][c];
      col_sum[c] += t.observed[r][c];
      total += t.observed[r][c];
    }
  }
  for (double s : row_sum) {
    if (s == 0.0) throw DegenerateTableError("zero row marginal");
  }
  for (double s : col_sum) {
    if (s == 0.0) throw DegenerateTableError("zero column marginal");
  }
  ChiSquareResult res;
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) {
      double expected = row_sum[r] * col_sum[c] / total;
      double diff = t.observed[r][c] - expected;
      res.statistic += diff * diff / expected;
    }
  }
  res.df = int((rows - 1) * (cols - 1));
  res.p_value = gamma_q(double(res.df) / 2.0, res.statistic / 2.0);
  return res;
}

ContingencyTable cue_word_contingency(const std::vector<std::string>& texts,
                                      const std::vector<bool>& intents_shift,
                                      const std::vector<std::string>& lexicon) {
  if (lexicon.empty()) throw EmptyLexiconError("cue-word lexicon is empty");
  if (texts.size() != intents_shift.size()) {
    throw LengthMismatchError("cue_word_contingency: length mismatch");
  }
  ContingencyTable t;
  t.col_labels = {"shift_utterances", "all_utterances"};
  std::map<std::string, std::pair<long, long>> counts;  // word -> (shift, all)
  std::vector<std::string> order;
  for (const std::string& w : lexicon) {
    std::string lw;
    for (char ch : w) lw.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
    if (!counts.count(lw)) order.push_back(lw);
    counts[lw];
  }
  for (size_t i = 0; i < texts.size(); ++i) {
    for (const std::string& tok : tokenize_lower(texts[i])) {
      auto it = counts.find(tok);
      if (it == counts.end()) continue;
      ++it->second.second;
      if (intents_shift[i]) ++it->second.first;
    }
  }
  for (const std::string& w : order) {
    t.row_labels.push_back(w);
    auto [shift, all] = counts[w];
    t.observed.push_back({double(shift), double(all)});
  }
  return t;
}

}  // namespace defdts::metrics
