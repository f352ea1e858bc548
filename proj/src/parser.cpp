#include "defdts/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "defdts/errors.hpp"
#include "json.hpp"

namespace defdts::parser {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using prompt::Format;
namespace tags = prompt::tags;

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::toupper(c)); });
  return s;
}

size_t find_icase(const std::string& hay, const std::string& needle, size_t from) {
  if (needle.empty() || hay.size() < needle.size()) return std::string::npos;
  auto lc = [](char c) { return char(std::tolower(static_cast<unsigned char>(c))); };
  for (size_t i = from; i + needle.size() <= hay.size(); ++i) {
    size_t j = 0;
    while (j < needle.size() && lc(hay[i + j]) == lc(needle[j])) ++j;
    if (j == needle.size()) return i;
  }
  return std::string::npos;
}

struct TagSlice {
  bool open_found = false;
  bool close_found = false;
  size_t open_pos = std::string::npos;
  std::string inner;
};

TagSlice extract_tag(const std::string& content, const std::string& tag) {
  TagSlice out;
  std::string open = "<" + tag + ">";
  std::string close = "</" + tag + ">";
  out.open_pos = find_icase(content, open, 0);
  if (out.open_pos == std::string::npos) return out;
  out.open_found = true;
  size_t start = out.open_pos + open.size();
  size_t end = find_icase(content, close, start);
  if (end == std::string::npos) return out;
  out.close_found = true;
  out.inner = content.substr(start, end - start);
  return out;
}

std::optional<std::pair<int, int>> parse_range(const std::string& raw) {
  std::string t = trim(raw);
  if (t.empty()) return std::nullopt;
  std::string lower = t;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (lower == "none" || lower == "n/a" || lower == "-") return std::nullopt;
  size_t dash = t.find('-', 1);  // skip a possible leading minus
  int lo = 0, hi = 0;
  if (dash == std::string::npos) {
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), lo);
    if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
    return std::make_pair(lo, lo);
  }
  std::string a = trim(t.substr(0, dash)), b = trim(t.substr(dash + 1));
  auto [pa, ea] = std::from_chars(a.data(), a.data() + a.size(), lo);
  auto [pb, eb] = std::from_chars(b.data(), b.data() + b.size(), hi);
  if (ea != std::errc() || eb != std::errc() || pa != a.data() + a.size() ||
      pb != b.data() + b.size() || lo > hi) {
    return std::nullopt;
  }
  return std::make_pair(lo, hi);
}

struct BlockContext {
  std::vector<ParseError>& errors;
  std::vector<std::string>& warnings;
  const std::string& dialogue_id;
  const prompt::IntentPool& pool;
  const ParseOptions& opts;
  int expected_n;
};

void check_range_warning(BlockContext& ctx, int index, bool preceding,
                         const std::optional<std::pair<int, int>>& got) {
  if (!got) return;
  auto expected = prompt::expected_context_ranges(index, ctx.expected_n);
  const auto& want = preceding ? expected.preceding : expected.subsequent;
  if (!want || *want != *got) {
    ctx.warnings.push_back("U" + std::to_string(index) + ": " +
                           (preceding ? "preceding" : "subsequent") +
                           " range " + std::to_string(got->first) + "-" +
                           std::to_string(got->second) +
                           " differs from the expected window");
  }
}

// Shared post-extraction handling: intent/label vocabulary checks.
void finish_analysis(BlockContext& ctx, UtteranceAnalysis& ua,
                     const std::optional<std::string>& intent_raw,
                     const std::optional<std::string>& label_raw, long location) {
  if (ctx.opts.expect_intent) {
    if (!intent_raw) {
      ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MissingBlock, location,
                            "U" + std::to_string(ua.index) + ": no utterance_intent"});
    } else {
      std::string intent = upper(trim(*intent_raw));
      if (!ctx.pool.find(intent)) {
        ctx.errors.push_back({ctx.dialogue_id, ErrorKind::UnknownIntent, location,
                              "U" + std::to_string(ua.index) + ": intent '" +
                                  intent + "' not in pool " + ctx.pool.name});
      } else {
        ua.intent = intent;
      }
    }
  } else if (intent_raw) {
    std::string intent = upper(trim(*intent_raw));
    if (ctx.pool.find(intent)) ua.intent = intent;
  }
  if (!label_raw) {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MissingBlock, location,
                          "U" + std::to_string(ua.index) + ": no topic_shift_label"});
    return;
  }
  std::string label = upper(trim(*label_raw));
  if (label != "YES" && label != "NO") {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::UnknownLabel, location,
                          "U" + std::to_string(ua.index) + ": label '" + label +
                              "' is not YES/NO"});
    return;
  }
  ua.shift_label = label;
}

std::optional<ContextSpan> parse_context_xml(BlockContext& ctx, int index,
                                             const std::string& block,
                                             const char* tag, bool preceding,
                                             long base) {
  TagSlice outer = extract_tag(block, tag);
  if (!outer.open_found) return std::nullopt;
  if (!outer.close_found) {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MalformedTag,
                          base + long(outer.open_pos),
                          "U" + std::to_string(index) + ": unterminated <" +
                              std::string(tag) + ">"});
    return std::nullopt;
  }
  TagSlice range = extract_tag(outer.inner, tags::kRange);
  TagSlice context = extract_tag(outer.inner, tags::kContext);
  auto r = range.close_found ? parse_range(range.inner) : std::nullopt;
  check_range_warning(ctx, index, preceding, r);
  if (!r) return std::nullopt;
  ContextSpan span;
  span.range = *r;
  span.summary = context.close_found ? prompt::xml_unescape(trim(context.inner)) : "";
  return span;
}

void parse_block_xml(BlockContext& ctx, int index, const std::string& block,
                     long base, std::vector<UtteranceAnalysis>& analyses) {
  UtteranceAnalysis ua;
  ua.index = index;
  if (ctx.opts.expect_context) {
    ua.preceding =
        parse_context_xml(ctx, index, block, tags::kPrecedingContext, true, base);
    if (ctx.opts.expect_subsequent) {
      ua.subsequent = parse_context_xml(ctx, index, block,
                                        tags::kSubsequentContext, false, base);
    }
  }
  std::optional<std::string> intent_raw, label_raw;
  TagSlice intent = extract_tag(block, tags::kUtteranceIntent);
  if (intent.open_found && !intent.close_found) {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MalformedTag,
                          base + long(intent.open_pos),
                          "U" + std::to_string(index) + ": unterminated intent tag"});
  } else if (intent.close_found) {
    intent_raw = intent.inner;
  }
  TagSlice label = extract_tag(block, tags::kTopicShiftLabel);
  if (label.open_found && !label.close_found) {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MalformedTag,
                          base + long(label.open_pos),
                          "U" + std::to_string(index) + ": unterminated label tag"});
  } else if (label.close_found) {
    label_raw = label.inner;
  }
  finish_analysis(ctx, ua, intent_raw, label_raw, base);
  analyses.push_back(std::move(ua));
}

void parse_xml(BlockContext& ctx, const std::string& text,
               std::vector<UtteranceAnalysis>& analyses) {
  for (int i = 0; i < ctx.expected_n; ++i) {
    std::string open = "<u" + std::to_string(i) + ">";
    std::string close = "</u" + std::to_string(i) + ">";
    size_t pos = find_icase(text, open, 0);
    if (pos == std::string::npos) {
      ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MissingBlock, i,
                            "no <U" + std::to_string(i) + "> block"});
      continue;
    }
    size_t end = find_icase(text, close, pos + open.size());
    if (end == std::string::npos) {
      ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MalformedTag, long(pos),
                            "unterminated <U" + std::to_string(i) + "> block"});
      continue;
    }
    size_t dup = find_icase(text, open, end + close.size());
    if (dup != std::string::npos) {
      ctx.errors.push_back({ctx.dialogue_id, ErrorKind::IndexMismatch, long(dup),
                            "duplicate <U" + std::to_string(i) + "> block"});
      continue;
    }
    std::string block = text.substr(pos + open.size(), end - pos - open.size());
    parse_block_xml(ctx, i, block, long(pos + open.size()), analyses);
  }
  // Blocks the prompt did not ask for.
  size_t scan = 0;
  while ((scan = find_icase(text, "<u", scan)) != std::string::npos) {
    size_t p = scan + 2;
    size_t q = p;
    while (q < text.size() && std::isdigit(static_cast<unsigned char>(text[q]))) ++q;
    if (q > p && q < text.size() && text[q] == '>') {
      int idx = std::stoi(text.substr(p, q - p));
      if (idx >= ctx.expected_n) {
        ctx.errors.push_back({ctx.dialogue_id, ErrorKind::CountMismatch, long(scan),
                              "unexpected block <U" + std::to_string(idx) + ">"});
      }
    }
    scan = q > p ? q : scan + 1;
  }
}

std::optional<ContextSpan> context_from_json(BlockContext& ctx, int index,
                                             const json& jb, const char* key,
                                             bool preceding) {
  if (!jb.contains(key) || !jb.at(key).is_object()) return std::nullopt;
  const json& jc = jb.at(key);
  std::optional<std::pair<int, int>> r;
  if (jc.contains(tags::kRange) && jc.at(tags::kRange).is_string()) {
    r = parse_range(jc.at(tags::kRange).get<std::string>());
  }
  check_range_warning(ctx, index, preceding, r);
  if (!r) return std::nullopt;
  ContextSpan span;
  span.range = *r;
  if (jc.contains(tags::kContext) && jc.at(tags::kContext).is_string()) {
    span.summary = jc.at(tags::kContext).get<std::string>();
  }
  return span;
}

void parse_block_json(BlockContext& ctx, int index, const json& jb,
                      std::vector<UtteranceAnalysis>& analyses) {
  if (!jb.is_object()) {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MalformedTag, index,
                          "U" + std::to_string(index) + ": block is not an object"});
    return;
  }
  UtteranceAnalysis ua;
  ua.index = index;
  if (ctx.opts.expect_context) {
    ua.preceding = context_from_json(ctx, index, jb, tags::kPrecedingContext, true);
    if (ctx.opts.expect_subsequent) {
      ua.subsequent = context_from_json(ctx, index, jb, tags::kSubsequentContext, false);
    }
  }
  std::optional<std::string> intent_raw, label_raw;
  if (jb.contains(tags::kUtteranceIntent) && jb.at(tags::kUtteranceIntent).is_string()) {
    intent_raw = jb.at(tags::kUtteranceIntent).get<std::string>();
  }
  if (jb.contains(tags::kTopicShiftLabel) && jb.at(tags::kTopicShiftLabel).is_string()) {
    label_raw = jb.at(tags::kTopicShiftLabel).get<std::string>();
  }
  finish_analysis(ctx, ua, intent_raw, label_raw, index);
  analyses.push_back(std::move(ua));
}

void parse_json_format(BlockContext& ctx, const std::string& text,
                       std::vector<UtteranceAnalysis>& analyses) {
  size_t first = text.find_first_of("{[");
  size_t last = text.find_last_of("}]");
  if (first == std::string::npos || last == std::string::npos || last < first) {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MissingBlock, 0,
                          "no JSON payload found"});
    return;
  }
  json j;
  try {
    j = json::parse(text.substr(first, last - first + 1));
  } catch (const json::exception& e) {
    ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MalformedTag, long(first),
                          std::string("invalid JSON: ") + e.what()});
    return;
  }
  // Accept one object keyed by U0..Un-1, or an array of single-key objects.
  json merged = json::object();
  if (j.is_object()) {
    merged = j;
  } else if (j.is_array()) {
    for (const json& el : j) {
      if (el.is_object()) {
        for (const auto& [k, v] : el.items()) merged[k] = v;
      }
    }
  }
  for (int i = 0; i < ctx.expected_n; ++i) {
    std::string key = "U" + std::to_string(i);
    const json* jb = nullptr;
    if (merged.contains(key)) {
      jb = &merged.at(key);
    } else if (merged.contains("u" + std::to_string(i))) {
      jb = &merged.at("u" + std::to_string(i));
    }
    if (!jb) {
      ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MissingBlock, i,
                            "no '" + key + "' entry"});
      continue;
    }
    parse_block_json(ctx, i, *jb, analyses);
  }
  for (const auto& [k, v] : merged.items()) {
    (void)v;
    if ((k.size() > 1) && (k[0] == 'U' || k[0] == 'u') &&
        std::all_of(k.begin() + 1, k.end(),
                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      int idx = std::stoi(k.substr(1));
      if (idx >= ctx.expected_n) {
        ctx.errors.push_back({ctx.dialogue_id, ErrorKind::CountMismatch, idx,
                              "unexpected entry '" + k + "'"});
      }
    }
  }
}

std::optional<std::string> nl_field(const std::vector<std::string>& lines,
                                    size_t begin, size_t end, const char* key) {
  std::string prefix = std::string(key) + ":";
  for (size_t i = begin; i < end; ++i) {
    if (find_icase(lines[i], prefix, 0) == 0 ||
        (lines[i].size() > prefix.size() &&
         find_icase(trim(lines[i]), prefix, 0) == 0)) {
      std::string t = trim(lines[i]);
      size_t colon = t.find(':');
      return trim(t.substr(colon + 1));
    }
  }
  return std::nullopt;
}

void parse_nl(BlockContext& ctx, const std::string& text,
              std::vector<UtteranceAnalysis>& analyses) {
  std::vector<std::string> lines;
  {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
  }
  // Heading line per block: "Utterance {i}:".
  std::vector<std::pair<int, size_t>> headings;
  for (size_t li = 0; li < lines.size(); ++li) {
    std::string t = trim(lines[li]);
    if (find_icase(t, "utterance ", 0) != 0) continue;
    std::string rest = trim(t.substr(10));
    size_t q = 0;
    while (q < rest.size() && std::isdigit(static_cast<unsigned char>(rest[q]))) ++q;
    if (q == 0 || q >= rest.size() || rest[q] != ':') continue;
    headings.push_back({std::stoi(rest.substr(0, q)), li});
  }
  for (int i = 0; i < ctx.expected_n; ++i) {
    bool found = false;
    size_t begin = 0, end = 0;
    for (size_t h = 0; h < headings.size(); ++h) {
      if (headings[h].first == i) {
        begin = headings[h].second + 1;
        end = (h + 1 < headings.size()) ? headings[h + 1].second : lines.size();
        found = true;
        break;
      }
    }
    if (!found) {
      ctx.errors.push_back({ctx.dialogue_id, ErrorKind::MissingBlock, i,
                            "no 'Utterance " + std::to_string(i) + ":' block"});
      continue;
    }
    UtteranceAnalysis ua;
    ua.index = i;
    if (ctx.opts.expect_context) {
      auto pr = nl_field(lines, begin, end, "Preceding range");
      auto pc = nl_field(lines, begin, end, "Preceding context");
      auto r = pr ? parse_range(*pr) : std::nullopt;
      check_range_warning(ctx, i, true, r);
      if (r) ua.preceding = ContextSpan{*r, pc ? *pc : ""};
      if (ctx.opts.expect_subsequent) {
        auto sr = nl_field(lines, begin, end, "Subsequent range");
        auto sc = nl_field(lines, begin, end, "Subsequent context");
        auto r2 = sr ? parse_range(*sr) : std::nullopt;
        check_range_warning(ctx, i, false, r2);
        if (r2) ua.subsequent = ContextSpan{*r2, sc ? *sc : ""};
      }
    }
    auto intent_raw = nl_field(lines, begin, end, "Intent");
    auto label_raw = nl_field(lines, begin, end, "Topic shift");
    finish_analysis(ctx, ua, intent_raw, label_raw, long(begin));
    analyses.push_back(std::move(ua));
  }
  for (const auto& [idx, li] : headings) {
    if (idx >= ctx.expected_n) {
      ctx.errors.push_back({ctx.dialogue_id, ErrorKind::CountMismatch, long(li),
                            "unexpected 'Utterance " + std::to_string(idx) + ":' block"});
    }
  }
}

}  // namespace

std::string error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingBlock: return "MissingBlock";
    case ErrorKind::MalformedTag: return "MalformedTag";
    case ErrorKind::UnknownIntent: return "UnknownIntent";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::IndexMismatch: return "IndexMismatch";
    case ErrorKind::CountMismatch: return "CountMismatch";
  }
  return "MalformedTag";
}

ParseOptions options_for(const prompt::PromptVariant& variant) {
  ParseOptions o;
  switch (variant.mode) {
    case prompt::Mode::Full:
    case prompt::Mode::NoExamples:
      break;
    case prompt::Mode::NoAll:
      o.expect_context = o.expect_subsequent = o.expect_intent = false;
      break;
    case prompt::Mode::NoIntent:
      o.expect_intent = false;
      break;
    case prompt::Mode::NoContext:
      o.expect_context = o.expect_subsequent = false;
      break;
    case prompt::Mode::NoBidirectional:
      o.expect_subsequent = false;
      break;
  }
  return o;
}

std::string deduce_shift(const std::string& intent, const prompt::IntentPool& pool) {
  const prompt::IntentDef* def = pool.find(intent);
  if (!def) throw UnknownIntentError("intent '" + intent + "' not in pool " + pool.name);
  return def->implies_shift ? "YES" : "NO";
}

ParseResult parse_output(const std::string& text, int expected_n,
                         const prompt::IntentPool& pool, prompt::Format format,
                         const ParseOptions& opts, const std::string& dialogue_id) {
  if (expected_n < 1) throw ConfigError("expected_n must be >= 1");
  ParseResult result;
  std::vector<UtteranceAnalysis> analyses;
  BlockContext ctx{result.errors, result.warnings, dialogue_id, pool, opts, expected_n};
  switch (format) {
    case Format::Xml: parse_xml(ctx, text, analyses); break;
    case Format::Json: parse_json_format(ctx, text, analyses); break;
    case Format::Nl: parse_nl(ctx, text, analyses); break;
  }
  if (!result.errors.empty()) return result;
  if (int(analyses.size()) != expected_n) {
    result.errors.push_back({dialogue_id, ErrorKind::CountMismatch, -1,
                             "parsed " + std::to_string(analyses.size()) +
                                 " blocks, expected " + std::to_string(expected_n)});
    return result;
  }
  ParsedDialogue parsed;
  parsed.analyses = std::move(analyses);
  for (const UtteranceAnalysis& ua : parsed.analyses) {
    if (!ua.intent) continue;
    std::string expected = deduce_shift(*ua.intent, pool);
    if (ua.shift_label != expected) {
      parsed.deduction_violations.push_back(
          {ua.index, *ua.intent, ua.shift_label, expected});
    }
  }
  result.parsed = std::move(parsed);
  return result;
}

corpus::SegmentIds to_segmentation(const ParsedDialogue& p,
                                   const prompt::IntentPool& pool,
                                   SegmentationPolicy policy) {
  corpus::SegmentIds s;
  s.ids.reserve(p.analyses.size());
  int seg = 0;
  for (size_t i = 0; i < p.analyses.size(); ++i) {
    if (i > 0) {
      std::string label;
      if (policy == SegmentationPolicy::Emitted) {
        label = p.analyses[i].shift_label;
      } else {
        if (!p.analyses[i].intent) {
          throw VariantConflictError(
              "deduced scoring needs intents; analysis at index " +
              std::to_string(i) + " has none");
        }
        label = deduce_shift(*p.analyses[i].intent, pool);
      }
      if (label == "YES") ++seg;
    }
    s.ids.push_back(seg);
  }
  return s;
}

namespace {

void serialize_context_xml(std::ostringstream& os, const char* tag,
                           const std::optional<ContextSpan>& span) {
  if (!span) return;
  os << "<" << tag << ">\n<" << tags::kRange << ">"
     << prompt::range_to_string(span->range) << "</" << tags::kRange << ">\n<"
     << tags::kContext << ">" << prompt::xml_escape(span->summary) << "</"
     << tags::kContext << ">\n</" << tag << ">\n";
}

}  // namespace

std::string serialize(const ParsedDialogue& p, prompt::Format format) {
  if (format == Format::Xml) {
    std::ostringstream os;
    for (const UtteranceAnalysis& ua : p.analyses) {
      os << "<U" << ua.index << ">\n";
      serialize_context_xml(os, tags::kPrecedingContext, ua.preceding);
      serialize_context_xml(os, tags::kSubsequentContext, ua.subsequent);
      if (ua.intent) {
        os << "<" << tags::kUtteranceIntent << ">" << *ua.intent << "</"
           << tags::kUtteranceIntent << ">\n";
      }
      os << "<" << tags::kTopicShiftLabel << ">" << ua.shift_label << "</"
         << tags::kTopicShiftLabel << ">\n";
      os << "</U" << ua.index << ">\n";
    }
    return os.str();
  }
  if (format == Format::Json) {
    ordered_json j;
    for (const UtteranceAnalysis& ua : p.analyses) {
      ordered_json jb;
      auto put_ctx = [&](const char* tag, const std::optional<ContextSpan>& span) {
        if (!span) return;
        jb[tag] = {{tags::kRange, prompt::range_to_string(span->range)},
                   {tags::kContext, span->summary}};
      };
      put_ctx(tags::kPrecedingContext, ua.preceding);
      put_ctx(tags::kSubsequentContext, ua.subsequent);
      if (ua.intent) jb[tags::kUtteranceIntent] = *ua.intent;
      jb[tags::kTopicShiftLabel] = ua.shift_label;
      j["U" + std::to_string(ua.index)] = std::move(jb);
    }
    return j.dump(2) + "\n";
  }
  std::ostringstream os;
  for (const UtteranceAnalysis& ua : p.analyses) {
    os << "Utterance " << ua.index << ":\n";
    os << "Preceding range: "
       << (ua.preceding ? prompt::range_to_string(ua.preceding->range) : "none")
       << "\n";
    if (ua.preceding) os << "Preceding context: " << ua.preceding->summary << "\n";
    os << "Subsequent range: "
       << (ua.subsequent ? prompt::range_to_string(ua.subsequent->range) : "none")
       << "\n";
    if (ua.subsequent) os << "Subsequent context: " << ua.subsequent->summary << "\n";
    if (ua.intent) os << "Intent: " << *ua.intent << "\n";
    os << "Topic shift: " << ua.shift_label << "\n\n";
  }
  return os.str();
}

std::string parsed_to_json(const ParsedDialogue& p) {
  ordered_json j;
  j["analyses"] = ordered_json::array();
  for (const UtteranceAnalysis& ua : p.analyses) {
    ordered_json ja;
    ja["index"] = ua.index;
    auto put_ctx = [&](const char* key, const std::optional<ContextSpan>& span) {
      if (!span) {
        ja[key] = nullptr;
        return;
      }
      ja[key] = {{"range", {span->range.first, span->range.second}},
                 {"summary", span->summary}};
    };
    put_ctx("preceding", ua.preceding);
    put_ctx("subsequent", ua.subsequent);
    if (ua.intent) ja["intent"] = *ua.intent; else ja["intent"] = nullptr;
    ja["shift_label"] = ua.shift_label;
    j["analyses"].push_back(std::move(ja));
  }
  j["deduction_violations"] = ordered_json::array();
  for (const DeductionViolation& v : p.deduction_violations) {
    j["deduction_violations"].push_back({{"index", v.index},
                                         {"intent", v.intent},
                                         {"emitted", v.emitted_label},
                                         {"expected", v.expected_label}});
  }
  return j.dump(2) + "\n";
}

ParsedDialogue parsed_from_json(const std::string& text) {
  json j = json::parse(text);
  ParsedDialogue p;
  for (const json& ja : j.at("analyses")) {
    UtteranceAnalysis ua;
    ua.index = ja.at("index").get<int>();
    auto get_ctx = [&](const char* key) -> std::optional<ContextSpan> {
      if (!ja.contains(key) || ja.at(key).is_null()) return std::nullopt;
      const json& jc = ja.at(key);
      ContextSpan span;
      span.range = {jc.at("range")[0].get<int>(), jc.at("range")[1].get<int>()};
      span.summary = jc.at("summary").get<std::string>();
      return span;
    };
    ua.preceding = get_ctx("preceding");
    ua.subsequent = get_ctx("subsequent");
    if (ja.contains("intent") && !ja.at("intent").is_null()) {
      ua.intent = ja.at("intent").get<std::string>();
    }
    ua.shift_label = ja.at("shift_label").get<std::string>();
    p.analyses.push_back(std::move(ua));
  }
  for (const json& jv : j.at("deduction_violations")) {
    p.deduction_violations.push_back({jv.at("index").get<int>(),
                                      jv.at("intent").get<std::string>(),
                                      jv.at("emitted").get<std::string>(),
                                      jv.at("expected").get<std::string>()});
  }
  return p;
}

}  // namespace defdts::parser
