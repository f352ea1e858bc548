#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "defdts/analysis.hpp"
#include "defdts/corpus.hpp"
#include "defdts/llm_client.hpp"
#include "defdts/metrics.hpp"
#include "defdts/prompt.hpp"

namespace defdts::pipeline {

enum class ScoringPolicy { Emitted, Deduced };

std::string scoring_policy_name(ScoringPolicy p);
ScoringPolicy parse_scoring_policy(const std::string& s);

struct ExperimentConfig {
  std::filesystem::path corpus_path;
  std::string corpus_format = "canonical";

  // Exactly one of the two pool selectors.
  std::optional<std::string> pool_builtin;
  std::optional<std::filesystem::path> pool_file;

  prompt::PromptVariant variant;

  // Exactly one backend.
  std::optional<llm::MockPolicy> mock;
  std::optional<llm::ProviderConfig> provider;

  int concurrency = 1;
  uint64_t seed = 0;
  std::filesystem::path output_dir = "runs";
  ScoringPolicy scoring_policy = ScoringPolicy::Emitted;
  std::optional<int> sample;  // deterministic subsample of the corpus

  void validate() const;

  std::string to_json() const;  // canonical form, also the run id source
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  // First 12 hex digits of the digest of the canonical config JSON; stable
  // across re-invocations so interrupted runs resume into the same directory.
  std::string run_id() const;
  std::filesystem::path run_dir() const { return output_dir / run_id(); }
};

struct PredictionRecord {
  std::string id;
  corpus::SegmentIds segments;
  std::string source = "defdts";  // defdts | random | texttiling
  bool error = false;
};

struct PredictionFile {
  std::vector<PredictionRecord> records;
};

PredictionFile load_predictions(const std::filesystem::path& path);
void write_predictions(const PredictionFile& f, const std::filesystem::path& path);

struct RunOptions {
  bool dry_run = false;     // write prompts only, zero backend calls
  int stop_after_n = -1;    // test hook: stop after persisting n new dialogues
  std::function<void(const std::string& dialogue_id)> on_backend_call;
};

// Orchestrates prompt -> completion -> parse -> segmentation per dialogue,
// persisting progress after every dialogue so a re-invocation resumes where
// the previous one stopped. Per-dialogue failures are recorded, not fatal.
analysis::RunArtifacts run(const ExperimentConfig& cfg, const RunOptions& opts = {});

metrics::MetricReport score(const PredictionFile& predictions,
                            const corpus::Corpus& corpus);

// Prediction files for the non-LLM segmenters.
PredictionFile random_baseline(const corpus::Corpus& corpus, uint64_t seed);
PredictionFile texttiling_baseline(const corpus::Corpus& corpus);

// Six runs sharing corpus and cache, emitted in fixed row order:
// NO_ALL, NO_INTENT, NO_EXAMPLES, NO_CONTEXT, NO_BIDIRECTIONAL, FULL.
std::vector<analysis::RunArtifacts> ablation_suite(const ExperimentConfig& base,
                                                   const RunOptions& opts = {});

// Three runs over the NL, JSON, XML output formats, in that order.
std::vector<analysis::RunArtifacts> format_suite(const ExperimentConfig& base,
                                                 const RunOptions& opts = {});

std::string ablation_markdown(const std::vector<analysis::RunArtifacts>& runs);
std::string ablation_csv(const std::vector<analysis::RunArtifacts>& runs);

// Rebuilds RunArtifacts from a completed (or partial) run directory.
analysis::RunArtifacts load_run(const ExperimentConfig& cfg);

}  // namespace defdts::pipeline
