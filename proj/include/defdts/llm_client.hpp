#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "defdts/corpus.hpp"
#include "defdts/prompt.hpp"

namespace defdts::llm {

struct ProviderConfig {
  std::string endpoint;  // chat-completions URL
  std::string model_name;
  double temperature = 0.0;
  int max_output_tokens = 8192;
  double request_timeout_s = 120.0;
  int max_retries = 3;  // total request budget per completion
  int max_in_flight = 1;
  double backoff_base_s = 1.0;
  std::string api_key_env = "DEFDTS_API_KEY";
  std::filesystem::path cache_dir = "cache";

  void validate() const;
};

struct Usage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct CompletionRecord {
  std::string cache_key;  // digest of (model, prompt_hash, temperature, max tokens)
  std::string prompt_hash;
  std::string response_text;
  Usage usage;
  double latency_ms = 0.0;
  int attempts = 0;  // 0 means served from cache
};

struct HttpResponse {
  int status = 0;
  std::string body;
  bool transport_failed = false;
  bool timed_out = false;
  std::string error;
};

// Injectable wire layer; tests substitute a fault-injecting double.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& endpoint, const std::string& body,
                            const std::map<std::string, std::string>& headers,
                            double timeout_s) = 0;
};

std::shared_ptr<Transport> make_http_transport();

std::string compute_cache_key(const ProviderConfig& cfg, const std::string& prompt_hash);

class Client {
 public:
  using Sleeper = std::function<void(double seconds)>;

  explicit Client(ProviderConfig cfg,
                  std::shared_ptr<Transport> transport = nullptr,
                  Sleeper sleeper = nullptr);
  ~Client();

  // Cache hit returns the stored record with attempts = 0 and no network
  // traffic; otherwise issues the request with exponential backoff and
  // persists the record before returning it.
  CompletionRecord complete(const prompt::PromptText& prompt);

  const ProviderConfig& config() const { return cfg_; }

 private:
  ProviderConfig cfg_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  struct Gate;
  std::unique_ptr<Gate> gate_;  // bounds in-flight requests to max_in_flight
};

struct MockPolicy {
  enum class Mode { GoldEcho, Noisy };
  Mode mode = Mode::GoldEcho;
  double label_flip_prob = 0.0;
  double malform_prob = 0.0;
  uint64_t seed = 0;

  void validate() const;  // gold_echo forces both probabilities to 0
};

// Offline oracle: emits a template-conforming response whose labels agree
// with the dialogue's gold boundaries. Noisy mode flips labels and corrupts
// blocks deterministically per (seed, dialogue id).
std::string mock_complete(const MockPolicy& policy, const corpus::Dialogue& d,
                          const prompt::IntentPool& pool,
                          const prompt::PromptVariant& variant);

}  // namespace defdts::llm
