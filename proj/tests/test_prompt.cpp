#include <doctest.h>

#include <filesystem>

#include "defdts/errors.hpp"
#include "defdts/prompt.hpp"

using namespace defdts;
namespace fs = std::filesystem;

namespace {

corpus::Dialogue sample_dialogue(int n) {
  corpus::Dialogue d;
  d.id = "sample";
  for (int i = 0; i < n; ++i) {
    corpus::Utterance u;
    u.index = i;
    u.speaker = i % 2 == 0 ? "speaker1" : "speaker2";
    u.text = "line number " + std::to_string(i);
    u.gold_segment_id = i / 2;
    d.utterances.push_back(std::move(u));
  }
  return d;
}

int count_substr(const std::string& hay, const std::string& needle) {
  int c = 0;
  for (size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + 1)) {
    ++c;
  }
  return c;
}

}  // namespace

TEST_CASE("builtin pools match their datasets") {
  prompt::IntentPool tiage = prompt::builtin_pool("tiage");
  REQUIRE(tiage.intents.size() == 5);
  CHECK(tiage.find("INTRODUCE_TOPIC")->implies_shift);
  CHECK(tiage.find("CHANGE_TOPIC")->implies_shift);
  CHECK_FALSE(tiage.find("JUST_COMMENT")->implies_shift);
  CHECK_FALSE(tiage.find("JUST_ANSWER")->implies_shift);
  CHECK_FALSE(tiage.find("DEVELOP_TOPIC")->implies_shift);

  prompt::IntentPool super = prompt::builtin_pool("superdialseg");
  REQUIRE(super.intents.size() == 4);
  CHECK(super.find("DIFFERENT_QUESTION")->implies_shift);
  CHECK_FALSE(super.find("RELEVANT_QUESTION")->implies_shift);
  CHECK_FALSE(super.find("ANSWERING")->implies_shift);
  CHECK_FALSE(super.find("ADDITIONAL_COMMENT")->implies_shift);

  prompt::IntentPool d711 = prompt::builtin_pool("dialseg711");
  REQUIRE(d711.intents.size() == 4);
  CHECK(d711.find("INTRODUCE_TOPIC") == nullptr);
  CHECK(d711.find("CHANGE_TOPIC")->implies_shift);

  CHECK_THROWS_AS(prompt::builtin_pool("nope"), UnknownTagError);

  for (const char* tag : {"tiage", "superdialseg", "dialseg711"}) {
    CHECK_NOTHROW(prompt::builtin_pool(tag).validate());
  }
}

TEST_CASE("pool validation rules") {
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  pool.intents[0].name = pool.intents[1].name;
  CHECK_THROWS_AS(pool.validate(), InvariantError);

  pool = prompt::builtin_pool("tiage");
  for (auto& i : pool.intents) i.implies_shift = false;
  CHECK_THROWS_AS(pool.validate(), InvariantError);
}

TEST_CASE("structure_dialogue emits one block per utterance") {
  corpus::Dialogue d = sample_dialogue(2);
  std::string s = prompt::structure_dialogue(d);
  CHECK(count_substr(s, "<U0>") == 1);
  CHECK(count_substr(s, "<U1>") == 1);
  CHECK(count_substr(s, "</U1>") == 1);
  CHECK(s.find("speaker1") != std::string::npos);
}

TEST_CASE("xml escaping round-trips") {
  std::string raw = "a < b & c > d \"quoted\" 'single'";
  CHECK(prompt::xml_unescape(prompt::xml_escape(raw)) == raw);
  CHECK(prompt::xml_escape("<").find('<') == std::string::npos);
}

TEST_CASE("full prompt contains every template section") {
  corpus::Dialogue d = sample_dialogue(4);
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  prompt::PromptText p = prompt::build_prompt(d, pool, {});
  CHECK(p.expected_block_count == 4);
  CHECK(p.text.find("valid_utterance_intent") != std::string::npos);
  for (const auto& intent : pool.intents) {
    CHECK(p.text.find(intent.name) != std::string::npos);
  }
  CHECK(p.text.find("valid_topic_shift_label") != std::string::npos);
  CHECK(p.text.find("weak OR no topical") != std::string::npos);
  CHECK(p.text.find("## OUTPUT ##") != std::string::npos);
  CHECK(p.text.find("<U0>") != std::string::npos);
  CHECK(p.pool_name == "tiage");
}

TEST_CASE("variant modes drop the right sections") {
  corpus::Dialogue d = sample_dialogue(4);
  prompt::IntentPool pool = prompt::builtin_pool("tiage");

  prompt::PromptText full = prompt::build_prompt(d, pool, {});
  CHECK(count_substr(full.text, "<example>") > 0);

  prompt::PromptText noex =
      prompt::build_prompt(d, pool, {prompt::Mode::NoExamples, prompt::Format::Xml});
  CHECK(count_substr(noex.text, "<example>") == 0);
  CHECK(noex.text.find("JUST_COMMENT") != std::string::npos);

  prompt::PromptText noint =
      prompt::build_prompt(d, pool, {prompt::Mode::NoIntent, prompt::Format::Xml});
  CHECK(noint.text.find("valid_utterance_intent") == std::string::npos);

  prompt::PromptText noall =
      prompt::build_prompt(d, pool, {prompt::Mode::NoAll, prompt::Format::Xml});
  CHECK(noall.text.find("valid_utterance_intent") == std::string::npos);
  CHECK(noall.text.find(prompt::tags::kPrecedingContext) == std::string::npos);
  CHECK(noall.text.find("valid_topic_shift_label") != std::string::npos);
}

TEST_CASE("prompt hash is deterministic and content-addressed") {
  corpus::Dialogue d = sample_dialogue(3);
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  prompt::PromptText a = prompt::build_prompt(d, pool, {});
  prompt::PromptText b = prompt::build_prompt(d, pool, {});
  CHECK(a.text == b.text);
  CHECK(a.prompt_hash == b.prompt_hash);

  d.utterances[0].text += "!";
  prompt::PromptText c = prompt::build_prompt(d, pool, {});
  CHECK(c.prompt_hash != a.prompt_hash);
}

TEST_CASE("formats carry the same semantic content") {
  corpus::Dialogue d = sample_dialogue(3);
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  for (prompt::Format f : {prompt::Format::Xml, prompt::Format::Json, prompt::Format::Nl}) {
    prompt::PromptText p = prompt::build_prompt(d, pool, {prompt::Mode::Full, f});
    for (const auto& intent : pool.intents) {
      CHECK(p.text.find(intent.name) != std::string::npos);
    }
    // The NL format uses plain headings; XML and JSON keep the marked one.
    CHECK(p.text.find("OUTPUT") != std::string::npos);
    if (f != prompt::Format::Nl) {
      CHECK(p.text.find("## OUTPUT ##") != std::string::npos);
    }
  }
}

TEST_CASE("expected context ranges") {
  auto r = prompt::expected_context_ranges(2, 16);
  REQUIRE(r.preceding.has_value());
  REQUIRE(r.subsequent.has_value());
  CHECK(prompt::range_to_string(*r.preceding) == "0-1");
  CHECK(prompt::range_to_string(*r.subsequent) == "3-5");

  auto first = prompt::expected_context_ranges(0, 16);
  CHECK_FALSE(first.preceding.has_value());
  CHECK(prompt::range_to_string(*first.subsequent) == "1-3");

  auto last = prompt::expected_context_ranges(15, 16);
  CHECK(prompt::range_to_string(*last.preceding) == "13-14");
  CHECK_FALSE(last.subsequent.has_value());

  CHECK_THROWS_AS(prompt::expected_context_ranges(16, 16), IndexOutOfRangeError);
}

TEST_CASE("context windows never exceed 2 preceding / 3 subsequent") {
  for (int n = 1; n <= 12; ++n) {
    for (int i = 0; i < n; ++i) {
      auto r = prompt::expected_context_ranges(i, n);
      if (r.preceding) {
        CHECK(r.preceding->second - r.preceding->first + 1 <= 2);
        CHECK(r.preceding->second == i - 1);
      }
      if (r.subsequent) {
        CHECK(r.subsequent->second - r.subsequent->first + 1 <= 3);
        CHECK(r.subsequent->first == i + 1);
      }
    }
  }
}

TEST_CASE("pool file round-trip") {
  prompt::IntentPool pool = prompt::builtin_pool("superdialseg");
  fs::path p = fs::temp_directory_path() / "defdts_test_pool.json";
  prompt::write_pool(pool, p);
  prompt::IntentPool back = prompt::load_pool(p);
  REQUIRE(back.intents.size() == pool.intents.size());
  for (size_t i = 0; i < pool.intents.size(); ++i) {
    CHECK(back.intents[i].name == pool.intents[i].name);
    CHECK(back.intents[i].implies_shift == pool.intents[i].implies_shift);
    CHECK(back.intents[i].description == pool.intents[i].description);
    CHECK(back.intents[i].examples.size() == pool.intents[i].examples.size());
  }
  fs::remove(p);
}
