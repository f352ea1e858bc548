#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defdts/corpus.hpp"

namespace defdts::baselines {

// Draws a segment count m uniformly from [1, N], then m-1 distinct interior
// boundary positions; deterministic per (dialogue id, seed).
corpus::SegmentIds random_segmenter(const corpus::Dialogue& d, uint64_t seed);

struct TextTilingParams {
  int token_window_w = 20;   // pseudo-sentence size for long utterances
  int block_size_k = 6;      // pseudo-sentences per comparison block
  int smoothing_width = 1;
  // mean - stddev/2 threshold by default; set fixed_threshold to override.
  std::optional<double> fixed_threshold;

  void validate() const;
};

// Hearst-style lexical cohesion: pseudo-sentences, block cosine similarity,
// depth scores, thresholded boundaries snapped to utterance gaps.
corpus::SegmentIds texttiling(const corpus::Dialogue& d,
                              const TextTilingParams& params = {});

const std::vector<std::string>& default_stopwords();

}  // namespace defdts::baselines
