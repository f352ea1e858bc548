#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace defdts::corpus {

struct Utterance {
  int index = 0;
  std::string speaker;
  std::string text;
  std::optional<int> gold_segment_id;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;

  int size() const { return int(utterances.size()); }
  bool has_gold() const;

  // Throws InvariantError on any violated invariant: non-empty, contiguous
  // 0-based indices, non-empty trimmed text, and (when gold ids are present)
  // all present, non-decreasing, stepping by exactly 1.
  void validate() const;
};

struct CorpusStats {
  int n_dialogues = 0;
  double avg_utterances = 0.0;
  int min_utterances = 0;
  int max_utterances = 0;
  double avg_segments = 0.0;      // over dialogues with gold ids
  double avg_segment_length = 0.0;
};

struct Corpus {
  std::string name;
  std::vector<Dialogue> dialogues;
  CorpusStats stats;

  void validate() const;  // dialogue invariants + unique ids + stats match
};

// Gold or predicted segmentation: one segment id per utterance.
struct SegmentIds {
  std::vector<int> ids;

  int size() const { return int(ids.size()); }
  int n_segments() const;  // max - min + 1
  void validate() const;
};

// bits[j] == 1 iff utterance j+1 begins a new segment; position 0 is
// implicitly a segment start and is not represented.
struct BoundaryVector {
  std::vector<uint8_t> bits;
};

CorpusStats compute_stats(const std::vector<Dialogue>& dialogues);

SegmentIds segmentation_of(const Dialogue& d);
BoundaryVector to_boundaries(const SegmentIds& s);
SegmentIds from_boundaries(const BoundaryVector& b);  // ids renumbered from 0

// Canonical corpus file: UTF-8 JSON Lines, one dialogue per line. Adapters
// `tiage`, `superdialseg`, `dialseg711` map the datasets' native shapes into
// it (field mapping documented in the README).
Corpus load_corpus(const std::filesystem::path& path,
                   const std::string& format_tag = "canonical");
void write_corpus(const Corpus& c, const std::filesystem::path& path);

struct SynthConfig {
  uint64_t seed = 0;
  int n_dialogues = 10;
  std::pair<int, int> segments_per_dialogue = {3, 5};    // inclusive
  std::pair<int, int> utterances_per_segment = {2, 6};   // inclusive
  double vocab_disjointness = 1.0;                       // in [0, 1]
};

// Deterministic synthetic corpus built by concatenating topic blocks with
// (mostly) closed per-block vocabularies; gold segment ids mark the joins.
Corpus synth_corpus(const SynthConfig& cfg);

}  // namespace defdts::corpus
