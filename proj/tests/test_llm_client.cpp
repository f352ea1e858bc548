#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <thread>
#include <vector>

#include "defdts/digest.hpp"

#include <json.hpp>

#include "defdts/errors.hpp"
#include "defdts/llm_client.hpp"
#include "defdts/parser.hpp"
#include "defdts/prompt.hpp"

using namespace defdts;
namespace fs = std::filesystem;

namespace {

class FakeTransport : public llm::Transport {
 public:
  // Responses served in order; the last one repeats.
  std::vector<llm::HttpResponse> script;
  std::atomic<int> calls{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight_seen{0};

  llm::HttpResponse post(const std::string&, const std::string&,
                         const std::map<std::string, std::string>&,
                         double) override {
    int now = ++in_flight;
    int prev = max_in_flight_seen.load();
    while (now > prev && !max_in_flight_seen.compare_exchange_weak(prev, now)) {
    }
    int idx = calls++;
    // Simulate some wire time so concurrency overlaps are observable.
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    if (script.empty()) return {};
    return script[std::min(size_t(idx), script.size() - 1)];
  }
};

llm::HttpResponse ok_response(const std::string& content) {
  nlohmann::json j;
  j["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
  j["usage"] = {{"prompt_tokens", 10}, {"completion_tokens", 20}};
  return {200, j.dump(), false, false, ""};
}

llm::ProviderConfig test_config(const fs::path& cache_dir) {
  llm::ProviderConfig cfg;
  cfg.endpoint = "https://example.invalid/v1/chat/completions";
  cfg.model_name = "test-model";
  cfg.cache_dir = cache_dir;
  cfg.backoff_base_s = 0.0;
  return cfg;
}

prompt::PromptText test_prompt(const std::string& text) {
  prompt::PromptText p;
  p.text = text;
  p.prompt_hash = sha256_hex(text);
  return p;
}

corpus::Dialogue gold_dialogue(const std::string& id, const std::vector<int>& gold) {
  corpus::Dialogue d;
  d.id = id;
  for (size_t i = 0; i < gold.size(); ++i) {
    corpus::Utterance u;
    u.index = int(i);
    u.speaker = i % 2 == 0 ? "A" : "B";
    u.text = "turn " + std::to_string(i);
    u.gold_segment_id = gold[i];
    d.utterances.push_back(std::move(u));
  }
  return d;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("defdts_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cache hit returns stored record with zero attempts") {
  TempDir dir("cache_hit");
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {ok_response("hello world")};
  llm::Client client(test_config(dir.path), transport, [](double) {});
  prompt::PromptText p = test_prompt("the prompt");

  llm::CompletionRecord first = client.complete(p);
  CHECK(first.attempts == 1);
  CHECK(first.response_text == "hello world");
  CHECK(transport->calls == 1);

  llm::CompletionRecord second = client.complete(p);
  CHECK(second.attempts == 0);
  CHECK(second.response_text == "hello world");
  CHECK(transport->calls == 1);
  CHECK(second.cache_key == first.cache_key);
}

TEST_CASE("cache keys separate on any parameter change") {
  llm::ProviderConfig cfg = test_config("cache");
  std::string key = llm::compute_cache_key(cfg, "aaaa");
  CHECK(llm::compute_cache_key(cfg, "aaab") != key);
  llm::ProviderConfig cfg2 = cfg;
  cfg2.temperature = 0.5;
  CHECK(llm::compute_cache_key(cfg2, "aaaa") != key);
  llm::ProviderConfig cfg3 = cfg;
  cfg3.max_output_tokens = 1;
  CHECK(llm::compute_cache_key(cfg3, "aaaa") != key);
}

TEST_CASE("transient failures retry then succeed; attempts counts requests") {
  TempDir dir("retry");
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {{500, "boom", false, false, ""},
                       {0, "", true, false, "connection reset"},
                       ok_response("eventually")};
  double slept = 0.0;
  llm::Client client(test_config(dir.path), transport,
                     [&](double s) { slept += s; });
  llm::CompletionRecord rec = client.complete(test_prompt("p1"));
  CHECK(rec.attempts == 3);
  CHECK(rec.response_text == "eventually");
  CHECK(transport->calls == 3);
}

TEST_CASE("retry budget exhaustion raises transport error") {
  TempDir dir("exhaust");
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {{0, "", true, false, "down"}};
  llm::Client client(test_config(dir.path), transport, [](double) {});
  CHECK_THROWS_AS(client.complete(test_prompt("p2")), TransportError);
  CHECK(transport->calls == 3);  // default max_retries
}

TEST_CASE("timeouts surface as TimeoutError") {
  TempDir dir("timeout");
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {{0, "", true, true, "timed out"}};
  llm::Client client(test_config(dir.path), transport, [](double) {});
  CHECK_THROWS_AS(client.complete(test_prompt("p3")), TimeoutError);
}

TEST_CASE("non-retryable status fails immediately") {
  TempDir dir("auth");
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {{401, "unauthorized", false, false, ""}};
  llm::Client client(test_config(dir.path), transport, [](double) {});
  CHECK_THROWS_AS(client.complete(test_prompt("p4")), ProviderError);
  CHECK(transport->calls == 1);
}

TEST_CASE("backoff grows exponentially") {
  TempDir dir("backoff");
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {{500, "", false, false, ""}};
  llm::ProviderConfig cfg = test_config(dir.path);
  cfg.backoff_base_s = 1.0;
  cfg.max_retries = 3;
  std::vector<double> delays;
  llm::Client client(cfg, transport, [&](double s) { delays.push_back(s); });
  CHECK_THROWS_AS(client.complete(test_prompt("p5")), TransportError);
  REQUIRE(delays.size() == 2);  // no sleep after the final attempt
  CHECK(delays[0] >= 1.0);
  CHECK(delays[0] <= 1.25);
  CHECK(delays[1] >= 2.0);
  CHECK(delays[1] <= 2.5);
}

TEST_CASE("max_in_flight bounds concurrent requests") {
  TempDir dir("gate");
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {ok_response("r")};
  llm::ProviderConfig cfg = test_config(dir.path);
  cfg.max_in_flight = 2;
  llm::Client client(cfg, transport, [](double) {});
  std::vector<std::thread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&, i] {
      client.complete(test_prompt("concurrent " + std::to_string(i)));
    });
  }
  for (auto& w : workers) w.join();
  CHECK(transport->calls == 8);
  CHECK(transport->max_in_flight_seen <= 2);
}

TEST_CASE("mock gold_echo parses clean and reproduces gold") {
  corpus::Dialogue d = gold_dialogue("g1", {0, 0, 1, 1, 2});
  for (const char* tag : {"tiage", "superdialseg", "dialseg711"}) {
    prompt::IntentPool pool = prompt::builtin_pool(tag);
    for (prompt::Format f :
         {prompt::Format::Xml, prompt::Format::Json, prompt::Format::Nl}) {
      for (prompt::Mode m : {prompt::Mode::Full, prompt::Mode::NoAll,
                             prompt::Mode::NoIntent, prompt::Mode::NoContext}) {
        prompt::PromptVariant variant{m, f};
        std::string text = llm::mock_complete({}, d, pool, variant);
        parser::ParseResult res = parser::parse_output(
            text, d.size(), pool, f, parser::options_for(variant), d.id);
        REQUIRE_MESSAGE(res.scoreable(), tag << "/" << prompt::mode_name(m) << "/"
                                             << prompt::format_name(f));
        CHECK(parser::to_segmentation(*res.parsed, pool).ids ==
              std::vector<int>{0, 0, 1, 1, 2});
        CHECK(res.parsed->deduction_violations.empty());
      }
    }
  }
}

TEST_CASE("mock requires gold ids and validates policy") {
  corpus::Dialogue d = gold_dialogue("g2", {0, 1});
  for (auto& u : d.utterances) u.gold_segment_id.reset();
  CHECK_THROWS_AS(llm::mock_complete({}, d, prompt::builtin_pool("tiage"), {}),
                  MissingGoldError);

  llm::MockPolicy bad;
  bad.mode = llm::MockPolicy::Mode::GoldEcho;
  bad.malform_prob = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("noisy mock is deterministic per seed and dialogue") {
  corpus::Dialogue d = gold_dialogue("n1", {0, 0, 1, 1, 2, 2});
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  llm::MockPolicy noisy;
  noisy.mode = llm::MockPolicy::Mode::Noisy;
  noisy.label_flip_prob = 0.3;
  noisy.malform_prob = 0.3;
  noisy.seed = 5;
  CHECK(llm::mock_complete(noisy, d, pool, {}) ==
        llm::mock_complete(noisy, d, pool, {}));
  llm::MockPolicy other = noisy;
  other.seed = 6;
  CHECK(llm::mock_complete(noisy, d, pool, {}) !=
        llm::mock_complete(other, d, pool, {}));
}

TEST_CASE("malform_prob=1 corrupts every block") {
  corpus::Dialogue d = gold_dialogue("n2", {0, 0, 1, 1});
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  llm::MockPolicy noisy;
  noisy.mode = llm::MockPolicy::Mode::Noisy;
  noisy.malform_prob = 1.0;
  noisy.seed = 1;
  std::string text = llm::mock_complete(noisy, d, pool, {});
  parser::ParseResult res = parser::parse_output(text, d.size(), pool,
                                                 prompt::Format::Xml);
  CHECK_FALSE(res.scoreable());
  CHECK(res.errors.size() == size_t(d.size()));
  for (const auto& e : res.errors) {
    CHECK(e.kind == parser::ErrorKind::MalformedTag);
  }
}

TEST_CASE("label flips change segmentation, not wellformedness") {
  corpus::Dialogue d = gold_dialogue("n3", {0, 0, 0, 1, 1, 2, 2, 2});
  prompt::IntentPool pool = prompt::builtin_pool("tiage");
  llm::MockPolicy noisy;
  noisy.mode = llm::MockPolicy::Mode::Noisy;
  noisy.label_flip_prob = 1.0;
  noisy.seed = 2;
  std::string text = llm::mock_complete(noisy, d, pool, {});
  parser::ParseResult res = parser::parse_output(text, d.size(), pool,
                                                 prompt::Format::Xml);
  REQUIRE(res.scoreable());
  CHECK(res.parsed->deduction_violations.empty());
  CHECK(parser::to_segmentation(*res.parsed, pool).ids !=
        corpus::segmentation_of(d).ids);
}
