#include "defdts/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "defdts/errors.hpp"
#include "defdts/rng.hpp"

namespace defdts::baselines {

namespace {

std::vector<std::string> tokenize(const std::string& text) {
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

corpus::SegmentIds ids_from_boundary_set(int n, const std::set<int>& boundaries) {
  corpus::SegmentIds s;
  s.ids.reserve(size_t(n));
  int seg = 0;
  for (int i = 0; i < n; ++i) {
    if (i > 0 && boundaries.count(i)) ++seg;
    s.ids.push_back(seg);
  }
  return s;
}

}  // namespace

const std::vector<std::string>& default_stopwords() {
  // Shipped at data/stopwords.txt as well; the algorithm is the contract,
  // not this particular list.
  static const std::vector<std::string> kWords = {
      "a",    "an",   "and",  "are",  "as",   "at",   "be",   "but", "by",
      "do",   "for",  "from", "had",  "has",  "have", "he",   "her", "his",
      "i",    "in",   "is",   "it",   "its",  "me",   "my",   "not", "of",
      "on",   "or",   "she",  "so",   "that", "the",  "their", "they",
      "this", "to",   "was",  "we",   "were", "what", "when", "who", "will",
      "with", "you",  "your"};
  return kWords;
}

corpus::SegmentIds random_segmenter(const corpus::Dialogue& d, uint64_t seed) {
  d.validate();
  int n = d.size();
  Rng rng(derive_seed(seed, fnv1a64(d.id)));
  if (n == 1) return corpus::SegmentIds{{0}};
  int m = rng.uniform_int(1, n);
  // Partial Fisher-Yates over the n-1 interior positions.
  std::vector<int> positions(size_t(n - 1));
  for (int i = 0; i < n - 1; ++i) positions[size_t(i)] = i + 1;
  std::set<int> chosen;
  for (int pick = 0; pick < m - 1; ++pick) {
    int j = rng.uniform_int(pick, n - 2);
    std::swap(positions[size_t(pick)], positions[size_t(j)]);
    chosen.insert(positions[size_t(pick)]);
  }
  return ids_from_boundary_set(n, chosen);
}

void TextTilingParams::validate() const {
  if (token_window_w < 1 || block_size_k < 1 || smoothing_width < 1) {
    throw ConfigError("texttiling parameters must be >= 1");
  }
}

corpus::SegmentIds texttiling(const corpus::Dialogue& d, const TextTilingParams& params) {
  params.validate();
  d.validate();
  int n = d.size();
  if (n < 2) throw DegenerateInputError("texttiling needs at least 2 utterances");

  std::set<std::string> stop(default_stopwords().begin(), default_stopwords().end());

  // Pseudo-sentences: one per utterance, split into w-token chunks only for
  // long utterances. Empty-after-stopwords utterances back off to raw tokens.
  std::vector<std::vector<std::string>> pseudo;
  std::vector<int> pseudo_utt;
  for (const corpus::Utterance& u : d.utterances) {
    std::vector<std::string> raw = tokenize(u.text);
    std::vector<std::string> kept;
    for (const std::string& t : raw) {
      if (!stop.count(t)) kept.push_back(t);
    }
    if (kept.empty()) kept = raw;
    if (kept.empty()) kept = {"<empty>"};
    for (size_t off = 0; off < kept.size(); off += size_t(params.token_window_w)) {
      size_t end = std::min(kept.size(), off + size_t(params.token_window_w));
      pseudo.emplace_back(kept.begin() + long(off), kept.begin() + long(end));
      pseudo_utt.push_back(u.index);
    }
  }
  int p = int(pseudo.size());
  if (p < 2) throw DegenerateInputError("fewer than 2 pseudo-sentences");

  auto block_tf = [&](int lo, int hi) {
    std::map<std::string, double> tf;
    for (int i = lo; i <= hi; ++i) {
      for (const std::string& t : pseudo[size_t(i)]) tf[t] += 1.0;
    }
    return tf;
  };
  auto cosine = [](const std::map<std::string, double>& a,
                   const std::map<std::string, double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [t, v] : a) {
      na += v * v;
      auto it = b.find(t);
      if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [t, v] : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
  };

  std::vector<double> sim(size_t(p - 1));
  for (int g = 0; g + 1 < p; ++g) {
    int lo = std::max(0, g - params.block_size_k + 1);
    int hi = std::min(p - 1, g + params.block_size_k);
    sim[size_t(g)] = cosine(block_tf(lo, g), block_tf(g + 1, hi));
  }

  if (params.smoothing_width > 1) {
    std::vector<double> smoothed(sim.size());
    int half = params.smoothing_width / 2;
    for (int g = 0; g < int(sim.size()); ++g) {
      int lo = std::max(0, g - half);
      int hi = std::min(int(sim.size()) - 1, g + half);
      double acc = 0.0;
      for (int j = lo; j <= hi; ++j) acc += sim[size_t(j)];
      smoothed[size_t(g)] = acc / double(hi - lo + 1);
    }
    sim = std::move(smoothed);
  }

  // Depth score: height of the valley relative to the nearest peaks on each
  // side (monotone walk outward).
  std::vector<double> depth(sim.size(), 0.0);
  for (int g = 0; g < int(sim.size()); ++g) {
    double left = sim[size_t(g)];
    for (int j = g - 1; j >= 0 && sim[size_t(j)] >= left; --j) left = sim[size_t(j)];
    double right = sim[size_t(g)];
    for (int j = g + 1; j < int(sim.size()) && sim[size_t(j)] >= right; ++j) {
      right = sim[size_t(j)];
    }
    depth[size_t(g)] = (left - sim[size_t(g)]) + (right - sim[size_t(g)]);
  }

  double threshold;
  if (params.fixed_threshold) {
    threshold = *params.fixed_threshold;
  } else {
    double mean = 0.0;
    for (double v : depth) mean += v;
    mean /= double(depth.size());
    double var = 0.0;
    for (double v : depth) var += (v - mean) * (v - mean);
    var /= double(depth.size());
    threshold = mean - std::sqrt(var) / 2.0;
    if (threshold <= 0.0) threshold = 0.0;  // flat profiles yield no boundaries
  }

  // One boundary per valley: a gap must clear the threshold and be a local
  // maximum of the depth profile, otherwise a single topic join smeared over
  // several gaps would produce a run of boundaries.
  std::set<int> boundaries;
  for (int g = 0; g < int(depth.size()); ++g) {
    if (depth[size_t(g)] <= threshold) continue;
    if (g > 0 && !(depth[size_t(g)] > depth[size_t(g - 1)])) continue;
    if (g + 1 < int(depth.size()) && !(depth[size_t(g)] >= depth[size_t(g + 1)])) {
      continue;
    }
    // Snap to the utterance gap at or after this pseudo-sentence gap.
    int u_left = pseudo_utt[size_t(g)];
    int u_right = pseudo_utt[size_t(g + 1)];
    int boundary = (u_right != u_left) ? u_right : u_left + 1;
    if (boundary >= 1 && boundary <= n - 1) boundaries.insert(boundary);
  }
  return ids_from_boundary_set(n, boundaries);
}

}  // namespace defdts::baselines
