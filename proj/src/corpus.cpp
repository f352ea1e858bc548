#include "defdts/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "defdts/errors.hpp"
#include "defdts/rng.hpp"
#include "json.hpp"

namespace defdts::corpus {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool Dialogue::has_gold() const {
  return !utterances.empty() &&
         std::all_of(utterances.begin(), utterances.end(),
                     [](const Utterance& u) { return u.gold_segment_id.has_value(); });
}

void Dialogue::validate() const {
  if (utterances.empty()) {
    throw InvariantError("dialogue '" + id + "' has no utterances");
  }
  int n_gold = 0;
  for (size_t i = 0; i < utterances.size(); ++i) {
    const Utterance& u = utterances[i];
    if (u.index != int(i)) {
      throw InvariantError("dialogue '" + id + "': utterance index " +
                           std::to_string(u.index) + " at position " +
                           std::to_string(i));
    }
    if (trim(u.text).empty()) {
      throw InvariantError("dialogue '" + id + "': empty text at index " +
                           std::to_string(i));
    }
    if (u.gold_segment_id) ++n_gold;
  }
  if (n_gold != 0 && n_gold != int(utterances.size())) {
    throw InvariantError("dialogue '" + id + "': partial gold segment ids");
  }
  if (n_gold > 0) {
    for (size_t i = 1; i < utterances.size(); ++i) {
      int prev = *utterances[i - 1].gold_segment_id;
      int cur = *utterances[i].gold_segment_id;
      if (cur != prev && cur != prev + 1) {
        throw InvariantError("dialogue '" + id + "': segment ids must be "
                             "non-decreasing with steps of 1 (got " +
                             std::to_string(prev) + " -> " + std::to_string(cur) +
                             " at index " + std::to_string(i) + ")");
      }
    }
  }
}

void Corpus::validate() const {
  std::set<std::string> ids;
  for (const Dialogue& d : dialogues) {
    d.validate();
    if (!ids.insert(d.id).second) {
      throw InvariantError("duplicate dialogue id '" + d.id + "'");
    }
  }
  CorpusStats s = compute_stats(dialogues);
  if (s.n_dialogues != stats.n_dialogues ||
      s.avg_utterances != stats.avg_utterances ||
      s.min_utterances != stats.min_utterances ||
      s.max_utterances != stats.max_utterances ||
      s.avg_segments != stats.avg_segments ||
      s.avg_segment_length != stats.avg_segment_length) {
    throw InvariantError("corpus '" + name + "': stored stats are stale");
  }
}

int SegmentIds::n_segments() const {
  if (ids.empty()) return 0;
  auto [mn, mx] = std::minmax_element(ids.begin(), ids.end());
  return *mx - *mn + 1;
}

void SegmentIds::validate() const {
  if (ids.empty()) throw InvariantError("empty segmentation");
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0) throw InvariantError("negative segment id");
    if (i > 0 && ids[i] != ids[i - 1] && ids[i] != ids[i - 1] + 1) {
      throw InvariantError("segment ids must be non-decreasing with steps of 1");
    }
  }
}

CorpusStats compute_stats(const std::vector<Dialogue>& dialogues) {
  CorpusStats s;
  s.n_dialogues = int(dialogues.size());
  if (dialogues.empty()) return s;
  long total_utt = 0;
  s.min_utterances = dialogues.front().size();
  s.max_utterances = dialogues.front().size();
  double seg_sum = 0.0, seg_len_sum = 0.0;
  int n_gold = 0;
  for (const Dialogue& d : dialogues) {
    total_utt += d.size();
    s.min_utterances = std::min(s.min_utterances, d.size());
    s.max_utterances = std::max(s.max_utterances, d.size());
    if (d.has_gold()) {
      int n_seg = segmentation_of(d).n_segments();
      seg_sum += n_seg;
      seg_len_sum += double(d.size()) / double(n_seg);
      ++n_gold;
    }
  }
  s.avg_utterances = double(total_utt) / double(dialogues.size());
  if (n_gold > 0) {
    s.avg_segments = seg_sum / n_gold;
    s.avg_segment_length = seg_len_sum / n_gold;
  }
  return s;
}

SegmentIds segmentation_of(const Dialogue& d) {
  if (!d.has_gold()) {
    throw MissingGoldError("dialogue '" + d.id + "' lacks gold segment ids");
  }
  SegmentIds s;
  s.ids.reserve(d.utterances.size());
  for (const Utterance& u : d.utterances) s.ids.push_back(*u.gold_segment_id);
  return s;
}

BoundaryVector to_boundaries(const SegmentIds& s) {
  BoundaryVector b;
  if (s.ids.size() <= 1) return b;
  b.bits.reserve(s.ids.size() - 1);
  for (size_t j = 0; j + 1 < s.ids.size(); ++j) {
    b.bits.push_back(s.ids[j + 1] != s.ids[j] ? 1 : 0);
  }
  return b;
}

SegmentIds from_boundaries(const BoundaryVector& b) {
  SegmentIds s;
  s.ids.reserve(b.bits.size() + 1);
  int cur = 0;
  s.ids.push_back(cur);
  for (uint8_t bit : b.bits) {
    if (bit) ++cur;
    s.ids.push_back(cur);
  }
  return s;
}

namespace {

Dialogue dialogue_from_canonical(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("id") || !j.contains("utterances")) {
    throw SchemaError("missing 'id' or 'utterances' in " + path);
  }
  Dialogue d;
  d.id = j.at("id").get<std::string>();
  const json& utts = j.at("utterances");
  if (!utts.is_array()) {
    throw SchemaError("dialogue '" + d.id + "': 'utterances' is not an array (" + path + ")");
  }
  int idx = 0;
  for (const json& ju : utts) {
    Utterance u;
    u.index = idx++;
    if (!ju.contains("speaker") || !ju.contains("text")) {
      throw SchemaError("dialogue '" + d.id + "': utterance missing 'speaker' or 'text' (" + path + ")");
    }
    u.speaker = ju.at("speaker").get<std::string>();
    u.text = ju.at("text").get<std::string>();
    if (ju.contains("segment_id") && !ju.at("segment_id").is_null()) {
      int sid = ju.at("segment_id").get<int>();
      if (sid < 0) {
        throw SchemaError("dialogue '" + d.id + "': negative segment_id (" + path + ")");
      }
      u.gold_segment_id = sid;
    }
    d.utterances.push_back(std::move(u));
  }
  return d;
}

// Remaps gold ids so they start at 0 and step by exactly 1; adapters call
// this so native id schemes (arbitrary topic ids) satisfy the invariants.
void renumber_gold(Dialogue& d) {
  if (d.utterances.empty() || !d.utterances.front().gold_segment_id) return;
  int out = 0;
  int prev = *d.utterances.front().gold_segment_id;
  d.utterances.front().gold_segment_id = 0;
  for (size_t i = 1; i < d.utterances.size(); ++i) {
    if (!d.utterances[i].gold_segment_id) return;
    int cur = *d.utterances[i].gold_segment_id;
    if (cur != prev) ++out;
    prev = cur;
    d.utterances[i].gold_segment_id = out;
  }
}

std::string pick_string(const json& j, std::initializer_list<const char*> keys,
                        const std::string& ctx) {
  for (const char* k : keys) {
    if (j.contains(k) && j.at(k).is_string()) return j.at(k).get<std::string>();
  }
  throw SchemaError("no usable text field in " + ctx);
}

// TIAGE ships per-utterance topic-shift labels; the adapter accepts either a
// top-level array or {"data": [...]}, utterances under "utterances"/"turns",
// and a shift marker in "topic_shift"/"label" (segment ids accumulate from 0).
// A pre-assigned "segment_id"/"topic_id" wins when present.
Dialogue dialogue_from_tiage(const json& j, int ordinal, const std::string& path) {
  Dialogue d;
  if (j.contains("id") && j.at("id").is_string()) {
    d.id = j.at("id").get<std::string>();
  } else {
    d.id = "tiage-" + std::to_string(ordinal);
  }
  const json* utts = nullptr;
  for (const char* k : {"utterances", "turns", "dialogue"}) {
    if (j.contains(k) && j.at(k).is_array()) {
      utts = &j.at(k);
      break;
    }
  }
  if (!utts) throw SchemaError("dialogue '" + d.id + "': no utterance array (" + path + ")");
  int idx = 0;
  int seg = 0;
  for (const json& ju : *utts) {
    Utterance u;
    u.index = idx;
    u.text = pick_string(ju, {"text", "utterance"}, "dialogue '" + d.id + "'");
    if (ju.contains("speaker") && ju.at("speaker").is_string()) {
      u.speaker = ju.at("speaker").get<std::string>();
    } else if (ju.contains("role") && ju.at("role").is_string()) {
      u.speaker = ju.at("role").get<std::string>();
    } else {
      u.speaker = (idx % 2 == 0) ? "speaker1" : "speaker2";
    }
    if (ju.contains("segment_id") && ju.at("segment_id").is_number()) {
      seg = ju.at("segment_id").get<int>();
    } else if (ju.contains("topic_id") && ju.at("topic_id").is_number()) {
      seg = ju.at("topic_id").get<int>();
    } else {
      int shift = 0;
      for (const char* k : {"topic_shift", "label", "shift"}) {
        if (ju.contains(k) && ju.at(k).is_number()) {
          shift = ju.at(k).get<int>();
          break;
        }
      }
      if (idx > 0 && shift != 0) ++seg;
    }
    u.gold_segment_id = seg;
    d.utterances.push_back(std::move(u));
    ++idx;
  }
  renumber_gold(d);
  return d;
}

// SuperDialseg: {"dial_data": {domain: [dialogue...]}} or a plain list;
// turns carry "utterance", "role", and either "topic_id" or a
// "segmentation_label" marking the last utterance of each segment.
void append_superdialseg_dialogue(std::vector<Dialogue>& out, const json& j,
                                  const std::string& path) {
  Dialogue d;
  if (j.contains("dial_id") && j.at("dial_id").is_string()) {
    d.id = j.at("dial_id").get<std::string>();
  } else if (j.contains("id") && j.at("id").is_string()) {
    d.id = j.at("id").get<std::string>();
  } else {
    d.id = "superdialseg-" + std::to_string(out.size());
  }
  if (!j.contains("turns") || !j.at("turns").is_array()) {
    throw SchemaError("dialogue '" + d.id + "': no 'turns' array (" + path + ")");
  }
  int idx = 0;
  int seg = 0;
  bool pending_break = false;
  for (const json& jt : j.at("turns")) {
    Utterance u;
    u.index = idx;
    u.text = pick_string(jt, {"utterance", "text"}, "dialogue '" + d.id + "'");
    u.speaker = jt.contains("role") && jt.at("role").is_string()
                    ? jt.at("role").get<std::string>()
                    : ((idx % 2 == 0) ? "user" : "agent");
    if (pending_break) {
      ++seg;
      pending_break = false;
    }
    if (jt.contains("topic_id") && jt.at("topic_id").is_number()) {
      seg = jt.at("topic_id").get<int>();
    } else if (jt.contains("segmentation_label") &&
               jt.at("segmentation_label").is_number() &&
               jt.at("segmentation_label").get<int>() == 1) {
      pending_break = true;  // this turn ends the current segment
    }
    u.gold_segment_id = seg;
    d.utterances.push_back(std::move(u));
    ++idx;
  }
  renumber_gold(d);
  out.push_back(std::move(d));
}

std::vector<Dialogue> load_dialseg711_text(std::istream& in) {
  // Plain text: one utterance per line, "====" lines mark topic joins, blank
  // lines separate dialogues. Speakers alternate.
  std::vector<Dialogue> out;
  Dialogue cur;
  int seg = 0;
  auto flush = [&] {
    if (!cur.utterances.empty()) {
      cur.id = "dialseg711-" + std::to_string(out.size());
      out.push_back(std::move(cur));
    }
    cur = Dialogue{};
    seg = 0;
  };
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) {
      flush();
      continue;
    }
    if (t.find_first_not_of('=') == std::string::npos) {
      if (!cur.utterances.empty()) ++seg;
      continue;
    }
    Utterance u;
    u.index = int(cur.utterances.size());
    u.speaker = (u.index % 2 == 0) ? "speaker1" : "speaker2";
    u.text = t;
    u.gold_segment_id = seg;
    cur.utterances.push_back(std::move(u));
  }
  flush();
  return out;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, const std::string& format_tag) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  Corpus c;
  c.name = path.stem().string();
  if (format_tag == "canonical") {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw SchemaError("invalid JSON at " + path.string() + ":" +
                          std::to_string(lineno) + ": " + e.what());
      }
      c.dialogues.push_back(dialogue_from_canonical(j, path.string()));
    }
  } else if (format_tag == "tiage" || format_tag == "superdialseg") {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw SchemaError("invalid JSON in " + path.string() + ": " + e.what());
    }
    if (format_tag == "tiage") {
      const json& arr = j.is_array() ? j : j.contains("data") ? j.at("data") : j;
      if (!arr.is_array()) throw SchemaError("tiage: expected a dialogue array in " + path.string());
      int ord = 0;
      for (const json& jd : arr) c.dialogues.push_back(dialogue_from_tiage(jd, ord++, path.string()));
    } else {
      if (j.is_array()) {
        for (const json& jd : j) append_superdialseg_dialogue(c.dialogues, jd, path.string());
      } else if (j.contains("dial_data") && j.at("dial_data").is_object()) {
        for (const auto& [domain, arr] : j.at("dial_data").items()) {
          (void)domain;
          for (const json& jd : arr) append_superdialseg_dialogue(c.dialogues, jd, path.string());
        }
      } else {
        throw SchemaError("superdialseg: unrecognized top-level shape in " + path.string());
      }
    }
  } else if (format_tag == "dialseg711") {
    c.dialogues = load_dialseg711_text(in);
  } else {
    throw UnknownTagError("unknown corpus format tag: " + format_tag);
  }
  c.stats = compute_stats(c.dialogues);
  for (const Dialogue& d : c.dialogues) d.validate();
  std::set<std::string> ids;
  for (const Dialogue& d : c.dialogues) {
    if (!ids.insert(d.id).second) throw InvariantError("duplicate dialogue id '" + d.id + "'");
  }
  return c;
}

void write_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path.string());
  for (const Dialogue& d : c.dialogues) {
    ordered_json j;
    j["id"] = d.id;
    j["utterances"] = ordered_json::array();
    for (const Utterance& u : d.utterances) {
      ordered_json ju;
      ju["speaker"] = u.speaker;
      ju["text"] = u.text;
      if (u.gold_segment_id) ju["segment_id"] = *u.gold_segment_id;
      j["utterances"].push_back(std::move(ju));
    }
    out << j.dump() << '\n';
  }
}

Corpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.n_dialogues < 1) throw ConfigError("n_dialogues must be >= 1");
  auto check_range = [](std::pair<int, int> r, const char* what) {
    if (r.first < 1 || r.second < r.first) {
      throw ConfigError(std::string(what) + ": empty range");
    }
  };
  check_range(cfg.segments_per_dialogue, "segments_per_dialogue");
  check_range(cfg.utterances_per_segment, "utterances_per_segment");
  if (cfg.vocab_disjointness < 0.0 || cfg.vocab_disjointness > 1.0) {
    throw ConfigError("vocab_disjointness must be in [0, 1]");
  }

  constexpr int kVocabPerTopic = 12;
  const int n_shared =
      int(std::lround(kVocabPerTopic * (1.0 - cfg.vocab_disjointness)));

  Corpus c;
  c.name = "synth";
  for (int di = 0; di < cfg.n_dialogues; ++di) {
    Rng rng(derive_seed(cfg.seed, uint64_t(di)));
    Dialogue d;
    d.id = "synth-" + std::to_string(di);
    int n_segments = rng.uniform_int(cfg.segments_per_dialogue.first,
                                     cfg.segments_per_dialogue.second);
    int idx = 0;
    for (int si = 0; si < n_segments; ++si) {
      // Closed per-topic vocabulary plus an optional shared slice; adjacent
      // segments overlap in at most the shared tokens.
      std::vector<std::string> vocab;
      vocab.reserve(kVocabPerTopic);
      for (int k = 0; k < n_shared; ++k) {
        vocab.push_back("common" + std::to_string(k));
      }
      for (int k = n_shared; k < kVocabPerTopic; ++k) {
        vocab.push_back("d" + std::to_string(di) + "t" + std::to_string(si) +
                        "w" + std::to_string(k));
      }
      int n_utt = rng.uniform_int(cfg.utterances_per_segment.first,
                                  cfg.utterances_per_segment.second);
      for (int ui = 0; ui < n_utt; ++ui) {
        Utterance u;
        u.index = idx++;
        u.speaker = (u.index % 2 == 0) ? "speaker1" : "speaker2";
        int n_tokens = rng.uniform_int(5, 9);
        std::string text;
        for (int t = 0; t < n_tokens; ++t) {
          if (t) text += ' ';
          text += vocab[size_t(rng.uniform_int(0, kVocabPerTopic - 1))];
        }
        u.text = std::move(text);
        u.gold_segment_id = si;
        d.utterances.push_back(std::move(u));
      }
    }
    d.validate();
    c.dialogues.push_back(std::move(d));
  }
  c.stats = compute_stats(c.dialogues);
  return c;
}

}  // namespace defdts::corpus
