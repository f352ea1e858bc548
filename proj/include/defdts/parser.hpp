#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "defdts/corpus.hpp"
#include "defdts/prompt.hpp"

namespace defdts::parser {

struct ContextSpan {
  std::pair<int, int> range;  // inclusive utterance indices, low <= high
  std::string summary;
};

struct UtteranceAnalysis {
  int index = 0;
  std::optional<ContextSpan> preceding;
  std::optional<ContextSpan> subsequent;
  std::optional<std::string> intent;  // absent under intent-free variants
  std::string shift_label;            // "YES" | "NO"
};

enum class ErrorKind {
  MissingBlock,
  MalformedTag,
  UnknownIntent,
  UnknownLabel,
  IndexMismatch,
  CountMismatch,
};

std::string error_kind_name(ErrorKind k);

struct ParseError {
  std::string dialogue_id;
  ErrorKind kind;
  long location = -1;  // character offset, or block index when offsets don't apply
  std::string detail;
};

struct DeductionViolation {
  int index;
  std::string intent;
  std::string emitted_label;
  std::string expected_label;
};

struct ParsedDialogue {
  std::vector<UtteranceAnalysis> analyses;  // complete, ordered
  std::vector<DeductionViolation> deduction_violations;
};

struct ParseResult {
  std::optional<ParsedDialogue> parsed;  // present iff errors is empty
  std::vector<ParseError> errors;
  std::vector<std::string> warnings;  // e.g. context ranges off the expected window

  bool scoreable() const { return parsed.has_value() && errors.empty(); }
};

// Which blocks the active prompt variant asks the model to emit.
struct ParseOptions {
  bool expect_context = true;
  bool expect_subsequent = true;
  bool expect_intent = true;
};

ParseOptions options_for(const prompt::PromptVariant& variant);

// YES iff the pool marks the intent as shift-implying.
std::string deduce_shift(const std::string& intent, const prompt::IntentPool& pool);

// Lenient parse of model output: tolerates chatter outside blocks,
// case-insensitive tags, and whitespace inside them. Collects every error it
// finds; a dialogue with any error is unscoreable.
ParseResult parse_output(const std::string& text, int expected_n,
                         const prompt::IntentPool& pool, prompt::Format format,
                         const ParseOptions& opts = {},
                         const std::string& dialogue_id = "");

enum class SegmentationPolicy { Emitted, Deduced };

// Utterance 0 always opens segment 0; a YES label (emitted or re-deduced
// from the intent) opens a new segment.
corpus::SegmentIds to_segmentation(const ParsedDialogue& p,
                                   const prompt::IntentPool& pool,
                                   SegmentationPolicy policy = SegmentationPolicy::Emitted);

// Template-conforming rendering of a ParsedDialogue; parse_output on the
// result reproduces the input (round-trip for XML and JSON).
std::string serialize(const ParsedDialogue& p, prompt::Format format);

// JSON sidecar (<dialogue_id>.parsed.json) encode/decode.
std::string parsed_to_json(const ParsedDialogue& p);
ParsedDialogue parsed_from_json(const std::string& text);

}  // namespace defdts::parser
