#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "defdts/corpus.hpp"

namespace defdts::prompt {

// One mini-dialogue illustrating an intent; speaker-tagged lines, the final
// line gets the "(a topic shift)" / "(not a topic shift)" annotation when
// rendered.
struct IntentExample {
  std::vector<std::pair<std::string, std::string>> lines;  // (speaker, text)
};

struct IntentDef {
  std::string name;  // uppercase identifier, e.g. JUST_COMMENT
  std::string description;
  bool implies_shift = false;
  std::vector<IntentExample> examples;
};

struct IntentPool {
  std::string name;
  std::vector<IntentDef> intents;

  const IntentDef* find(const std::string& intent_name) const;
  void validate() const;
};

enum class Mode { Full, NoAll, NoIntent, NoExamples, NoContext, NoBidirectional };
enum class Format { Xml, Json, Nl };

struct PromptVariant {
  Mode mode = Mode::Full;
  Format format = Format::Xml;
};

std::string mode_name(Mode m);
std::string format_name(Format f);
Mode parse_mode(const std::string& s);
Format parse_format(const std::string& s);

struct PromptText {
  std::string text;
  int expected_block_count = 0;
  PromptVariant variant;
  std::string pool_name;
  std::string prompt_hash;  // sha256 of text
};

// Built-in pools: tiage (5 intents), superdialseg (4), dialseg711 (tiage
// minus INTRODUCE_TOPIC).
IntentPool builtin_pool(const std::string& dataset_tag);
IntentPool load_pool(const std::filesystem::path& path);
void write_pool(const IntentPool& pool, const std::filesystem::path& path);

// XML entity escaping for utterance text; the parser unescapes symmetrically.
std::string xml_escape(const std::string& s);
std::string xml_unescape(const std::string& s);

// <Ux><speaker>...</speaker><text>...</text></Ux> per utterance, in order.
std::string structure_dialogue(const corpus::Dialogue& d);

PromptText build_prompt(const corpus::Dialogue& d, const IntentPool& pool,
                        const PromptVariant& variant);

struct ContextRanges {
  std::optional<std::pair<int, int>> preceding;   // inclusive, 0-based
  std::optional<std::pair<int, int>> subsequent;  // inclusive, 0-based
};

// Up to 2 preceding / 3 subsequent utterances around index i.
ContextRanges expected_context_ranges(int i, int n);

std::string range_to_string(const std::pair<int, int>& r);  // "a-b"

// Tag names shared with the parser (single source of truth for the output
// format the prompt announces and the parser accepts).
namespace tags {
inline constexpr const char* kPrecedingContext = "preceding_context";
inline constexpr const char* kSubsequentContext = "subsequent_context";
inline constexpr const char* kRange = "range";
inline constexpr const char* kContext = "context";
inline constexpr const char* kUtteranceIntent = "utterance_intent";
inline constexpr const char* kTopicShiftLabel = "topic_shift_label";
}  // namespace tags

}  // namespace defdts::prompt
