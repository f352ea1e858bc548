#include "defdts/llm_client.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "defdts/digest.hpp"
#include "defdts/errors.hpp"
#include "defdts/parser.hpp"
#include "defdts/rng.hpp"
#include "json.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace defdts::llm {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

std::filesystem::path cache_path(const ProviderConfig& cfg, const std::string& key) {
  return cfg.cache_dir / cfg.model_name / key.substr(0, 2) / (key + ".json");
}

void write_record_atomic(const std::filesystem::path& path,
                         const CompletionRecord& rec) {
  std::filesystem::create_directories(path.parent_path());
  ordered_json j;
  j["cache_key"] = rec.cache_key;
  j["prompt_hash"] = rec.prompt_hash;
  j["response_text"] = rec.response_text;
  j["usage"] = {{"prompt_tokens", rec.usage.prompt_tokens},
                {"completion_tokens", rec.usage.completion_tokens}};
  j["latency_ms"] = rec.latency_ms;
  j["attempts"] = rec.attempts;
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write cache file: " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);  // last writer wins, idempotent payload
}

std::optional<CompletionRecord> read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;  // partial write from a killed run; refetch
  }
  CompletionRecord rec;
  rec.cache_key = j.value("cache_key", "");
  rec.prompt_hash = j.value("prompt_hash", "");
  rec.response_text = j.value("response_text", "");
  if (j.contains("usage")) {
    rec.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
    rec.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
  }
  rec.latency_ms = j.value("latency_ms", 0.0);
  rec.attempts = 0;  // cache hit: zero network calls this run
  return rec;
}

class HttpTransport : public Transport {
 public:
  HttpResponse post(const std::string& endpoint, const std::string& body,
                    const std::map<std::string, std::string>& headers,
                    double timeout_s) override {
    HttpResponse out;
    auto split = split_endpoint(endpoint);
    if (!split) {
      out.transport_failed = true;
      out.error = "unparseable endpoint: " + endpoint;
      return out;
    }
    httplib::Client client(split->first);
    client.set_connection_timeout(std::chrono::milliseconds(long(timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(long(timeout_s * 1000)));
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(split->second, h, body, "application/json");
    if (!res) {
      out.transport_failed = true;
      out.timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                      res.error() == httplib::Error::Read;
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }

 private:
  static std::optional<std::pair<std::string, std::string>> split_endpoint(
      const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) return std::nullopt;
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return std::make_pair(endpoint, "/");
    return std::make_pair(endpoint.substr(0, path_start), endpoint.substr(path_start));
  }
};

bool retryable(const HttpResponse& r) {
  if (r.transport_failed) return true;
  return r.status == 429 || r.status == 408 || r.status >= 500;
}

}  // namespace

void ProviderConfig::validate() const {
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
  if (model_name.empty()) throw ConfigError("model_name is required");
}

std::string compute_cache_key(const ProviderConfig& cfg, const std::string& prompt_hash) {
  return sha256_hex(cfg.model_name + "\n" + prompt_hash + "\n" +
                    format_double(cfg.temperature) + "\n" +
                    std::to_string(cfg.max_output_tokens));
}

std::shared_ptr<Transport> make_http_transport() {
  return std::make_shared<HttpTransport>();
}

// Counting gate bounding concurrent transport calls.
struct Client::Gate {
  explicit Gate(int capacity) : available(capacity) {}
  std::mutex mu;
  std::condition_variable cv;
  int available;

  void acquire() {
    std::unique_lock lk(mu);
    cv.wait(lk, [&] { return available > 0; });
    --available;
  }
  void release() {
    {
      std::lock_guard lk(mu);
      ++available;
    }
    cv.notify_one();
  }
};

Client::Client(ProviderConfig cfg, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      transport_(transport ? std::move(transport) : make_http_transport()),
      sleeper_(sleeper ? std::move(sleeper) : [](double s) {
        std::this_thread::sleep_for(std::chrono::duration<double>(s));
      }),
      gate_(std::make_unique<Gate>(std::max(1, cfg_.max_in_flight))) {
  cfg_.validate();
}

Client::~Client() = default;

CompletionRecord Client::complete(const prompt::PromptText& prompt) {
  std::string key = compute_cache_key(cfg_, prompt.prompt_hash);
  std::filesystem::path path = cache_path(cfg_, key);
  if (auto cached = read_record(path)) return *cached;

  ordered_json body;
  body["model"] = cfg_.model_name;
  body["messages"] = ordered_json::array({{{"role", "user"}, {"content", prompt.text}}});
  body["temperature"] = cfg_.temperature;
  body["max_tokens"] = cfg_.max_output_tokens;
  std::map<std::string, std::string> headers;
  if (const char* api_key = std::getenv(cfg_.api_key_env.c_str())) {
    headers["Authorization"] = std::string("Bearer ") + api_key;
  }

  // Backoff: base * 2^(attempt-1) plus up to 25% jitter.
  Rng jitter(fnv1a64(key));
  HttpResponse last;
  auto start = std::chrono::steady_clock::now();
  for (int attempt = 1; attempt <= cfg_.max_retries; ++attempt) {
    gate_->acquire();
    HttpResponse res;
    try {
      res = transport_->post(cfg_.endpoint, body.dump(), headers, cfg_.request_timeout_s);
    } catch (...) {
      gate_->release();
      throw;
    }
    gate_->release();
    if (!res.transport_failed && res.status == 200) {
      json parsed;
      try {
        parsed = json::parse(res.body);
      } catch (const json::exception& e) {
        throw ProviderError(std::string("unparseable provider response: ") + e.what());
      }
      CompletionRecord rec;
      rec.cache_key = key;
      rec.prompt_hash = prompt.prompt_hash;
      try {
        rec.response_text =
            parsed.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception&) {
        throw ProviderError("provider response lacks choices[0].message.content: " +
                            res.body.substr(0, 512));
      }
      if (parsed.contains("usage")) {
        rec.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0L);
        rec.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0L);
      }
      rec.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      rec.attempts = attempt;
      write_record_atomic(path, rec);
      return rec;
    }
    last = res;
    if (!retryable(res)) {
      throw ProviderError("provider returned status " + std::to_string(res.status) +
                          ": " + res.body.substr(0, 512));
    }
    if (attempt < cfg_.max_retries) {
      double delay = cfg_.backoff_base_s * double(1 << (attempt - 1));
      delay *= 1.0 + 0.25 * jitter.uniform01();
      sleeper_(delay);
    }
  }
  if (last.timed_out) {
    throw TimeoutError("request timed out after " + std::to_string(cfg_.max_retries) +
                       " attempts");
  }
  throw TransportError("request failed after " + std::to_string(cfg_.max_retries) +
                       " attempts: " +
                       (last.error.empty() ? std::to_string(last.status) : last.error));
}

void MockPolicy::validate() const {
  if (label_flip_prob < 0.0 || label_flip_prob > 1.0 || malform_prob < 0.0 ||
      malform_prob > 1.0) {
    throw ConfigError("mock probabilities must be in [0, 1]");
  }
  if (mode == Mode::GoldEcho && (label_flip_prob != 0.0 || malform_prob != 0.0)) {
    throw ConfigError("gold_echo mock must have zero flip/malform probabilities");
  }
}

std::string mock_complete(const MockPolicy& policy, const corpus::Dialogue& d,
                          const prompt::IntentPool& pool,
                          const prompt::PromptVariant& variant) {
  policy.validate();
  if (!d.has_gold()) {
    throw MissingGoldError("mock backend needs gold segment ids (dialogue '" +
                           d.id + "')");
  }
  std::vector<const prompt::IntentDef*> shift_intents, keep_intents;
  for (const prompt::IntentDef& def : pool.intents) {
    (def.implies_shift ? shift_intents : keep_intents).push_back(&def);
  }
  parser::ParseOptions opts = parser::options_for(variant);
  Rng rng(derive_seed(policy.seed, fnv1a64(d.id)));

  parser::ParsedDialogue parsed;
  int n = d.size();
  for (int i = 0; i < n; ++i) {
    parser::UtteranceAnalysis ua;
    ua.index = i;
    bool shift = i == 0 || *d.utterances[size_t(i)].gold_segment_id !=
                               *d.utterances[size_t(i - 1)].gold_segment_id;
    std::string label = shift ? "YES" : "NO";
    if (policy.mode == MockPolicy::Mode::Noisy && rng.bernoulli(policy.label_flip_prob)) {
      label = (label == "YES") ? "NO" : "YES";
      // keep intent consistent with the flipped label so the corruption
      // shows up in segmentation, not as a deduction violation
      shift = !shift;
    }
    if (opts.expect_intent) {
      const auto& candidates = shift ? shift_intents : keep_intents;
      ua.intent = candidates[size_t(i) % candidates.size()]->name;
    }
    if (opts.expect_context) {
      auto ranges = prompt::expected_context_ranges(i, n);
      if (ranges.preceding) {
        ua.preceding = parser::ContextSpan{
            *ranges.preceding, "Summary of utterances " +
                                   prompt::range_to_string(*ranges.preceding) + "."};
      }
      if (opts.expect_subsequent && ranges.subsequent) {
        ua.subsequent = parser::ContextSpan{
            *ranges.subsequent, "Summary of utterances " +
                                    prompt::range_to_string(*ranges.subsequent) + "."};
      }
    }
    ua.shift_label = label;
    parsed.analyses.push_back(std::move(ua));
  }
  std::string text = parser::serialize(parsed, variant.format);
  if (policy.mode == MockPolicy::Mode::Noisy && policy.malform_prob > 0.0) {
    for (int i = 0; i < n; ++i) {
      if (!rng.bernoulli(policy.malform_prob)) continue;
      switch (variant.format) {
        case prompt::Format::Xml: {
          std::string close = "</U" + std::to_string(i) + ">";
          size_t pos = text.find(close);
          if (pos != std::string::npos) text.erase(pos + close.size() - 1, 1);
          break;
        }
        case prompt::Format::Json:
        case prompt::Format::Nl: {
          // Drop the block's label line/field; parses as MissingBlock.
          std::string needle = variant.format == prompt::Format::Json
                                   ? "\"topic_shift_label\""
                                   : "Topic shift:";
          size_t block = variant.format == prompt::Format::Json
                             ? text.find("\"U" + std::to_string(i) + "\"")
                             : text.find("Utterance " + std::to_string(i) + ":");
          if (block == std::string::npos) break;
          size_t pos = text.find(needle, block);
          if (pos == std::string::npos) break;
          size_t eol = text.find('\n', pos);
          if (eol != std::string::npos) text.erase(pos, eol - pos + 1);
          break;
        }
      }
    }
  }
  return text;
}

}  // namespace defdts::llm
