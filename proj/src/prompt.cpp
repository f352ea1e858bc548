#include "defdts/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "defdts/digest.hpp"
#include "defdts/errors.hpp"
#include "json.hpp"

namespace defdts::prompt {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

bool ends_with_icase(const std::string& s, const std::string& suffix) {
  std::string t = to_lower(s);
  while (!t.empty() && (t.back() == '.' || t.back() == ' ')) t.pop_back();
  return t.size() >= suffix.size() &&
         t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string annotation(bool implies_shift) {
  return implies_shift ? "(a topic shift)" : "(not a topic shift)";
}

}  // namespace

const IntentDef* IntentPool::find(const std::string& intent_name) const {
  for (const IntentDef& def : intents) {
    if (def.name == intent_name) return &def;
  }
  return nullptr;
}

void IntentPool::validate() const {
  if (intents.empty()) throw InvariantError("intent pool '" + name + "' is empty");
  std::set<std::string> names;
  std::set<std::string> descriptions;
  bool any_shift = false, any_non_shift = false;
  for (const IntentDef& def : intents) {
    if (!names.insert(def.name).second) {
      throw InvariantError("pool '" + name + "': duplicate intent " + def.name);
    }
    // A.5 mutual-exclusivity lint: identical descriptions cannot categorize
    // utterances exclusively.
    if (!descriptions.insert(to_lower(def.description)).second) {
      throw InvariantError("pool '" + name + "': duplicate description on " + def.name);
    }
    bool tail_shift = ends_with_icase(def.description, "a topic shift") &&
                      !ends_with_icase(def.description, "not a topic shift");
    if (tail_shift != def.implies_shift) {
      throw InvariantError("pool '" + name + "': description tail of " + def.name +
                           " contradicts implies_shift");
    }
    (def.implies_shift ? any_shift : any_non_shift) = true;
    for (const IntentExample& ex : def.examples) {
      if (ex.lines.size() < 2 || ex.lines.size() > 4) {
        throw InvariantError("pool '" + name + "': example for " + def.name +
                             " must have 2-4 lines");
      }
    }
  }
  if (!any_shift || !any_non_shift) {
    throw InvariantError("pool '" + name +
                         "' needs at least one shift and one non-shift intent");
  }
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Full: return "FULL";
    case Mode::NoAll: return "NO_ALL";
    case Mode::NoIntent: return "NO_INTENT";
    case Mode::NoExamples: return "NO_EXAMPLES";
    case Mode::NoContext: return "NO_CONTEXT";
    case Mode::NoBidirectional: return "NO_BIDIRECTIONAL";
  }
  return "FULL";
}

std::string format_name(Format f) {
  switch (f) {
    case Format::Xml: return "XML";
    case Format::Json: return "JSON";
    case Format::Nl: return "NL";
  }
  return "XML";
}

Mode parse_mode(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), ::toupper);
  if (u == "FULL") return Mode::Full;
  if (u == "NO_ALL") return Mode::NoAll;
  if (u == "NO_INTENT") return Mode::NoIntent;
  if (u == "NO_EXAMPLES") return Mode::NoExamples;
  if (u == "NO_CONTEXT") return Mode::NoContext;
  if (u == "NO_BIDIRECTIONAL") return Mode::NoBidirectional;
  throw ConfigError("unknown prompt mode: " + s);
}

Format parse_format(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), ::toupper);
  if (u == "XML") return Format::Xml;
  if (u == "JSON") return Format::Json;
  if (u == "NL") return Format::Nl;
  throw ConfigError("unknown prompt format: " + s);
}

namespace {

IntentExample ex(std::initializer_list<std::pair<const char*, const char*>> lines) {
  IntentExample e;
  for (const auto& [sp, tx] : lines) e.lines.push_back({sp, tx});
  return e;
}

std::vector<IntentDef> tiage_intents() {
  std::vector<IntentDef> v;
  v.push_back({"JUST_COMMENT",
               "Commenting on the preceding context without any asking. Not a topic shift",
               false,
               {ex({{"speaker1", "My dad works for the New York Times."},
                    {"speaker2", "Oh wow! You know, I dabble in photography; maybe you can introduce us sometime."},
                    {"speaker1", "Photography is the greatest art out there."}})}});
  v.push_back({"JUST_ANSWER",
               "Answering preceding utterance. Not a topic shift",
               false,
               {ex({{"speaker1", "Do you teach cooking?"},
                    {"speaker2", "No, since I'm a native of Mexico, I teach Spanish."}})}});
  v.push_back({"DEVELOP_TOPIC",
               "Developing the conversation to similar and inclusive sub-topics. Not a topic shift",
               false,
               {ex({{"speaker1", "Pets are cute!"},
                    {"speaker2", "I heard that Huskies are difficult dogs to take care of."}})}});
  v.push_back({"INTRODUCE_TOPIC",
               "Introducing a relevant but different topic. A topic shift",
               true,
               {ex({{"speaker1", "You are an artist? What kind of art, I do American Indian stuff."},
                    {"speaker2", "I love to eat too, sometimes too much."}})}});
  v.push_back({"CHANGE_TOPIC",
               "Completely changing the topic. A topic shift",
               true,
               {ex({{"speaker1", "What do you do for fun?"},
                    {"speaker2", "I drive trucks so me and my buds go truckin in the mud."},
                    {"speaker1", "Must be fun! My version of that's running around a library!"},
                    {"speaker2", "That's cool! I love that too. Do you have a favourite animal? Chickens are my favourite. I love them."}})}});
  return v;
}

std::vector<IntentDef> superdialseg_intents() {
  std::vector<IntentDef> v;
  v.push_back({"DIFFERENT_QUESTION",
               "Questioning about something that is not similar or topically different to preceding context. A topic shift",
               true,
               {ex({{"user", "How long will my benefits be paid for?"},
                    {"agent", "Benefits are paid for up to 26 weeks in a benefit year."},
                    {"user", "Can I apply for a student loan deferment online?"}})}});
  v.push_back({"RELEVANT_QUESTION",
               "Questioning about something that is similar or topically coherent to preceding context. Not a topic shift",
               false,
               {ex({{"user", "What documents do I need to file a claim?"},
                    {"agent", "You need your social security number and employment history."},
                    {"user", "Where do I send those documents?"}})}});
  v.push_back({"ANSWERING",
               "Answering preceding utterance. Not a topic shift",
               false,
               {ex({{"user", "Is there a fee for requesting a replacement card?"},
                    {"agent", "No, replacement cards are issued free of charge."}})}});
  v.push_back({"ADDITIONAL_COMMENT",
               "An additional comment from the same speaker in addition to a previous utterance. Not a topic shift",
               false,
               {ex({{"agent", "Your application has been received."},
                    {"agent", "You should hear back within ten business days."}})}});
  return v;
}

}  // namespace

IntentPool builtin_pool(const std::string& dataset_tag) {
  IntentPool pool;
  if (dataset_tag == "tiage") {
    pool.name = "tiage";
    pool.intents = tiage_intents();
  } else if (dataset_tag == "superdialseg") {
    pool.name = "superdialseg";
    pool.intents = superdialseg_intents();
  } else if (dataset_tag == "dialseg711") {
    pool.name = "dialseg711";
    for (IntentDef& def : tiage_intents()) {
      if (def.name != "INTRODUCE_TOPIC") pool.intents.push_back(std::move(def));
    }
  } else {
    throw UnknownTagError("unknown builtin pool tag: " + dataset_tag);
  }
  pool.validate();
  return pool;
}

IntentPool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pool file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("invalid pool JSON in " + path.string() + ": " + e.what());
  }
  IntentPool pool;
  pool.name = j.value("name", path.stem().string());
  if (!j.contains("intents") || !j.at("intents").is_array()) {
    throw SchemaError("pool file missing 'intents' array: " + path.string());
  }
  for (const json& ji : j.at("intents")) {
    IntentDef def;
    def.name = ji.at("name").get<std::string>();
    def.description = ji.at("description").get<std::string>();
    def.implies_shift = ji.at("implies_shift").get<bool>();
    if (ji.contains("examples")) {
      for (const json& je : ji.at("examples")) {
        IntentExample e;
        for (const json& jl : je) {
          e.lines.push_back({jl.at("speaker").get<std::string>(),
                             jl.at("text").get<std::string>()});
        }
        def.examples.push_back(std::move(e));
      }
    }
    pool.intents.push_back(std::move(def));
  }
  pool.validate();
  return pool;
}

void write_pool(const IntentPool& pool, const std::filesystem::path& path) {
  ordered_json j;
  j["name"] = pool.name;
  j["intents"] = ordered_json::array();
  for (const IntentDef& def : pool.intents) {
    ordered_json ji;
    ji["name"] = def.name;
    ji["description"] = def.description;
    ji["implies_shift"] = def.implies_shift;
    ji["examples"] = ordered_json::array();
    for (const IntentExample& e : def.examples) {
      ordered_json je = ordered_json::array();
      for (const auto& [sp, tx] : e.lines) {
        je.push_back({{"speaker", sp}, {"text", tx}});
      }
      ji["examples"].push_back(std::move(je));
    }
    j["intents"].push_back(std::move(ji));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pool file: " + path.string());
  out << j.dump(2) << '\n';
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string xml_unescape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      if (s.compare(i, 5, "&amp;") == 0) { out.push_back('&'); i += 5; continue; }
      if (s.compare(i, 4, "&lt;") == 0) { out.push_back('<'); i += 4; continue; }
      if (s.compare(i, 4, "&gt;") == 0) { out.push_back('>'); i += 4; continue; }
      if (s.compare(i, 6, "&quot;") == 0) { out.push_back('"'); i += 6; continue; }
      if (s.compare(i, 6, "&apos;") == 0) { out.push_back('\''); i += 6; continue; }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string structure_dialogue(const corpus::Dialogue& d) {
  std::ostringstream os;
  for (const corpus::Utterance& u : d.utterances) {
    os << "<U" << u.index << "><speaker>" << xml_escape(u.speaker)
       << "</speaker><text>" << xml_escape(u.text) << "</text></U" << u.index
       << ">\n";
  }
  return os.str();
}

ContextRanges expected_context_ranges(int i, int n) {
  if (i < 0 || i >= n) {
    throw IndexOutOfRangeError("utterance index " + std::to_string(i) +
                               " outside dialogue of length " + std::to_string(n));
  }
  ContextRanges r;
  if (i > 0) r.preceding = {std::max(0, i - 2), i - 1};
  if (i < n - 1) r.subsequent = {i + 1, std::min(i + 3, n - 1)};
  return r;
}

std::string range_to_string(const std::pair<int, int>& r) {
  return std::to_string(r.first) + "-" + std::to_string(r.second);
}

namespace {

struct VariantShape {
  bool intent_block = true;    // valid_utterance_intent section + subtask
  bool examples = true;        // per-intent example blocks
  bool context = true;         // context subtask + output blocks
  bool subsequent = true;      // subsequent side of the context subtask
};

VariantShape shape_for(Mode m) {
  VariantShape s;
  switch (m) {
    case Mode::Full: break;
    case Mode::NoAll: s.intent_block = s.context = s.subsequent = false; break;
    case Mode::NoIntent: s.intent_block = false; break;
    case Mode::NoExamples: s.examples = false; break;
    case Mode::NoContext: s.context = s.subsequent = false; break;
    case Mode::NoBidirectional: s.subsequent = false; break;
  }
  return s;
}

std::vector<std::string> task_lines(const VariantShape& s) {
  std::vector<std::string> lines;
  lines.push_back(
      "You are given a dialogue starting with U. From utterance number 0, you "
      "have to answer the following sub-tasks for each utterance.");
  int n = 0;
  if (s.context) {
    if (s.subsequent) {
      lines.push_back(std::to_string(++n) +
                      ". Summarize the preceding and subsequent context in <=3 "
                      "sentences seperately");
      lines.push_back(
          "The range of the context should be previous or next 1-3 utterances "
          "except for the case of the first or last utterance.");
      lines.push_back(
          "For example, given current utterance number is 2, preceding range "
          "is 0-1, subsequent range is 3-5.");
    } else {
      lines.push_back(std::to_string(++n) +
                      ". Summarize the preceding context in <=3 sentences");
      lines.push_back(
          "The range of the context should be the previous 1-2 utterances "
          "except for the case of the first utterance.");
      lines.push_back(
          "For example, given current utterance number is 2, preceding range "
          "is 0-1.");
    }
  }
  if (s.intent_block) {
    lines.push_back(std::to_string(++n) + ". Output the utterance_intent");
    lines.push_back(
        "Use the list <valid_utterance_intent> ... </valid_utterance_intent> "
        "to categorize utterance.");
    lines.push_back(
        "Consider topical difference between preceding and subsequent context.");
  }
  lines.push_back(std::to_string(++n) + ". Output the topic_shift_label");
  lines.push_back(
      "Use the list <valid_topic_shift_label> ... </valid_topic_shift_label>.");
  return lines;
}

const char* kYesDesc =
    "The current utterance has **weak OR no topical** relation to the "
    "preceding conversation context OR is the first utterance in the "
    "conversation, marking the beginning of a new dialogue segment.";
const char* kNoDesc =
    "The current utterance has **relevant OR equal** topic to the preceding "
    "conversation context.";

std::string render_xml(const corpus::Dialogue& d, const IntentPool& pool,
                       const VariantShape& s) {
  std::ostringstream os;
  if (s.intent_block) {
    os << "<valid_utterance_intent>\n";
    for (const IntentDef& def : pool.intents) {
      os << "<item>\n<name>" << def.name << "</name>\n<desc>"
         << def.description << "</desc>\n";
      if (s.examples) {
        for (const IntentExample& e : def.examples) {
          os << "<example>\n";
          for (size_t i = 0; i < e.lines.size(); ++i) {
            const auto& [sp, tx] = e.lines[i];
            os << "<" << sp << ">" << xml_escape(tx);
            if (i + 1 == e.lines.size()) os << " " << annotation(def.implies_shift);
            os << "</" << sp << ">\n";
          }
          os << "</example>\n";
        }
      }
      os << "</item>\n";
    }
    os << "</valid_utterance_intent>\n";
  }
  os << "<valid_topic_shift_label>\n"
     << "<item>\n<name>YES</name>\n<desc>" << kYesDesc << "</desc>\n</item>\n"
     << "<item>\n<name>NO</name>\n<desc>" << kNoDesc << "</desc>\n</item>\n"
     << "</valid_topic_shift_label>\n\n";

  os << "## TASK ##\n";
  for (const std::string& line : task_lines(s)) os << line << "\n";
  os << "\n## OUTPUT FORMAT ##\n";
  os << "<U{utterance number}>\n";
  if (s.context) {
    os << "<" << tags::kPrecedingContext << ">\n"
       << "<" << tags::kRange << ">{range of utterances referred in context}</"
       << tags::kRange << ">\n"
       << "<" << tags::kContext << ">{context of the previous 1-"
       << (s.subsequent ? 3 : 2) << " utterances}</" << tags::kContext << ">\n"
       << "</" << tags::kPrecedingContext << ">\n";
    if (s.subsequent) {
      os << "<" << tags::kSubsequentContext << ">\n"
         << "<" << tags::kRange
         << ">{range of utterances referred in context}</" << tags::kRange
         << ">\n"
         << "<" << tags::kContext << ">{context of the next 1-3 utterances}</"
         << tags::kContext << ">\n"
         << "</" << tags::kSubsequentContext << ">\n";
    }
  }
  if (s.intent_block) {
    os << "<" << tags::kUtteranceIntent << ">{valid utterance intent}</"
       << tags::kUtteranceIntent << ">\n";
  }
  os << "<" << tags::kTopicShiftLabel << ">{valid topic shift label}</"
     << tags::kTopicShiftLabel << ">\n";
  os << "</U{utterance number}>\n";

  os << "\n## INPUT ##\n" << structure_dialogue(d);
  os << "\n## OUTPUT ##\n";
  return os.str();
}

std::string render_json(const corpus::Dialogue& d, const IntentPool& pool,
                        const VariantShape& s) {
  ordered_json j;
  if (s.intent_block) {
    ordered_json arr = ordered_json::array();
    for (const IntentDef& def : pool.intents) {
      ordered_json ji;
      ji["name"] = def.name;
      ji["desc"] = def.description;
      if (s.examples) {
        ordered_json exs = ordered_json::array();
        for (const IntentExample& e : def.examples) {
          ordered_json lines = ordered_json::array();
          for (size_t i = 0; i < e.lines.size(); ++i) {
            std::string line = e.lines[i].first + ": " + e.lines[i].second;
            if (i + 1 == e.lines.size()) line += " " + annotation(def.implies_shift);
            lines.push_back(line);
          }
          exs.push_back(std::move(lines));
        }
        ji["example"] = std::move(exs);
      }
      arr.push_back(std::move(ji));
    }
    j["valid_utterance_intent"] = std::move(arr);
  }
  j["valid_topic_shift_label"] = ordered_json::array(
      {{{"name", "YES"}, {"desc", kYesDesc}}, {{"name", "NO"}, {"desc", kNoDesc}}});
  j["task"] = task_lines(s);
  ordered_json fmt;
  if (s.context) {
    fmt[tags::kPrecedingContext] = {
        {tags::kRange, "{range of utterances referred in context}"},
        {tags::kContext, "{summary of the preceding utterances}"}};
    if (s.subsequent) {
      fmt[tags::kSubsequentContext] = {
          {tags::kRange, "{range of utterances referred in context}"},
          {tags::kContext, "{summary of the subsequent utterances}"}};
    }
  }
  if (s.intent_block) fmt[tags::kUtteranceIntent] = "{valid utterance intent}";
  fmt[tags::kTopicShiftLabel] = "{valid topic shift label}";
  ordered_json fmt_outer;
  fmt_outer["U{utterance number}"] = std::move(fmt);
  j["output_format"] =
      "Respond with one JSON object whose keys are U0..U{N-1}, each mapping "
      "to an object shaped like:";
  j["output_format_example"] = std::move(fmt_outer);
  ordered_json input = ordered_json::array();
  for (const corpus::Utterance& u : d.utterances) {
    ordered_json ju;
    ju["U" + std::to_string(u.index)] = {{"speaker", u.speaker}, {"text", u.text}};
    input.push_back(std::move(ju));
  }
  j["input"] = std::move(input);
  return j.dump(2) + "\n\n## OUTPUT ##\n";
}

std::string render_nl(const corpus::Dialogue& d, const IntentPool& pool,
                      const VariantShape& s) {
  std::ostringstream os;
  if (s.intent_block) {
    os << "VALID UTTERANCE INTENTS\n";
    int n = 0;
    for (const IntentDef& def : pool.intents) {
      os << ++n << ". " << def.name << ": " << def.description << "\n";
      if (s.examples) {
        for (const IntentExample& e : def.examples) {
          os << "   Example:\n";
          for (size_t i = 0; i < e.lines.size(); ++i) {
            os << "   " << e.lines[i].first << ": " << e.lines[i].second;
            if (i + 1 == e.lines.size()) os << " " << annotation(def.implies_shift);
            os << "\n";
          }
        }
      }
    }
    os << "\n";
  }
  os << "VALID TOPIC SHIFT LABELS\n"
     << "1. YES: " << kYesDesc << "\n"
     << "2. NO: " << kNoDesc << "\n\n";
  os << "TASK\n";
  for (const std::string& line : task_lines(s)) os << line << "\n";
  os << "\nOUTPUT FORMAT\n"
     << "For each utterance, write a block of the following lines:\n"
     << "Utterance {number}:\n";
  if (s.context) {
    os << "Preceding range: {range or none}\n"
       << "Preceding context: {summary}\n";
    if (s.subsequent) {
      os << "Subsequent range: {range or none}\n"
         << "Subsequent context: {summary}\n";
    }
  }
  if (s.intent_block) os << "Intent: {valid utterance intent}\n";
  os << "Topic shift: {valid topic shift label}\n";
  os << "\nINPUT\n";
  for (const corpus::Utterance& u : d.utterances) {
    os << u.index << " (" << u.speaker << "): " << u.text << "\n";
  }
  os << "\nOUTPUT\n";
  return os.str();
}

}  // namespace

PromptText build_prompt(const corpus::Dialogue& d, const IntentPool& pool,
                        const PromptVariant& variant) {
  pool.validate();
  d.validate();
  VariantShape s = shape_for(variant.mode);
  PromptText p;
  switch (variant.format) {
    case Format::Xml: p.text = render_xml(d, pool, s); break;
    case Format::Json: p.text = render_json(d, pool, s); break;
    case Format::Nl: p.text = render_nl(d, pool, s); break;
  }
  p.expected_block_count = d.size();
  p.variant = variant;
  p.pool_name = pool.name;
  p.prompt_hash = sha256_hex(p.text);
  return p;
}

}  // namespace defdts::prompt
