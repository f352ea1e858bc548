#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "defdts/baselines.hpp"
#include "defdts/corpus.hpp"
#include "defdts/errors.hpp"

using namespace defdts;

namespace {

corpus::Dialogue dialogue_from_texts(const std::string& id,
                                     const std::vector<std::string>& texts) {
  corpus::Dialogue d;
  d.id = id;
  for (size_t i = 0; i < texts.size(); ++i) {
    corpus::Utterance u;
    u.index = int(i);
    u.speaker = i % 2 == 0 ? "A" : "B";
    u.text = texts[i];
    d.utterances.push_back(std::move(u));
  }
  return d;
}

}  // namespace

TEST_CASE("random segmenter basics") {
  corpus::Dialogue single = dialogue_from_texts("one", {"hello"});
  CHECK(baselines::random_segmenter(single, 3).ids == std::vector<int>{0});

  corpus::Dialogue d = dialogue_from_texts(
      "ten", {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
  corpus::SegmentIds s1 = baselines::random_segmenter(d, 7);
  corpus::SegmentIds s2 = baselines::random_segmenter(d, 7);
  CHECK(s1.ids == s2.ids);
  CHECK_NOTHROW(s1.validate());
  CHECK(s1.size() == 10);
  bool differs = baselines::random_segmenter(d, 8).ids != s1.ids ||
                 baselines::random_segmenter(d, 9).ids != s1.ids;
  CHECK(differs);
}

TEST_CASE("random segmenter mean segment count matches uniform expectation") {
  double total = 0.0;
  int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    corpus::Dialogue d = dialogue_from_texts(
        "d" + std::to_string(t), {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
    total += baselines::random_segmenter(d, 41).n_segments();
  }
  double mean = total / trials;
  CHECK(mean == doctest::Approx(5.5).epsilon(0.02));
}

TEST_CASE("random segmenter boundary marginals are uniform") {
  // m-1 boundaries drawn from 9 interior slots; each slot's marginal count
  // should match every other's.
  std::vector<int> counts(9, 0);
  int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    corpus::Dialogue d = dialogue_from_texts(
        "u" + std::to_string(t), {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
    corpus::SegmentIds s = baselines::random_segmenter(d, 99);
    for (int i = 1; i < 10; ++i) {
      if (s.ids[size_t(i)] != s.ids[size_t(i - 1)]) ++counts[size_t(i - 1)];
    }
  }
  double mean = 0.0;
  for (int c : counts) mean += c;
  mean /= 9.0;
  for (int c : counts) {
    CHECK(std::abs(c - mean) / mean < 0.05);
  }
}

TEST_CASE("texttiling finds a fully disjoint topic join") {
  std::vector<std::string> texts;
  for (int i = 0; i < 5; ++i) {
    texts.push_back("garden flowers roses tulips soil watering");
  }
  for (int i = 0; i < 5; ++i) {
    texts.push_back("compiler linker assembly register optimization bytecode");
  }
  corpus::Dialogue d = dialogue_from_texts("twotopic", texts);
  corpus::SegmentIds s = baselines::texttiling(d);
  CHECK(s.n_segments() == 2);
  CHECK(s.ids[4] != s.ids[5]);
  CHECK(s.ids[0] == s.ids[4]);
  CHECK(s.ids[5] == s.ids[9]);
}

TEST_CASE("texttiling leaves a single-topic dialogue whole") {
  std::vector<std::string> texts(8, "kitchen recipes cooking dinner pasta sauce");
  corpus::Dialogue d = dialogue_from_texts("flat", texts);
  corpus::SegmentIds s = baselines::texttiling(d);
  CHECK(s.n_segments() == 1);
}

TEST_CASE("texttiling survives stopword-only utterances") {
  corpus::Dialogue d = dialogue_from_texts(
      "stoppy", {"the and of", "garden flowers roses", "is it that",
                 "compiler linker assembly", "to do so"});
  CHECK_NOTHROW(baselines::texttiling(d));
}

TEST_CASE("texttiling degenerate and invalid inputs") {
  corpus::Dialogue one = dialogue_from_texts("one", {"hello"});
  CHECK_THROWS_AS(baselines::texttiling(one), DegenerateInputError);
  baselines::TextTilingParams bad;
  bad.block_size_k = 0;
  corpus::Dialogue two = dialogue_from_texts("two", {"a b", "c d"});
  CHECK_THROWS_AS(baselines::texttiling(two, bad), ConfigError);
}

TEST_CASE("texttiling is deterministic and id-independent") {
  std::vector<std::string> texts = {"alpha beta gamma", "alpha beta delta",
                                    "omega psi chi",    "omega psi phi"};
  corpus::Dialogue a = dialogue_from_texts("ida", texts);
  corpus::Dialogue b = dialogue_from_texts("idb", texts);
  CHECK(baselines::texttiling(a).ids == baselines::texttiling(b).ids);
}
