#include "defdts/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "defdts/baselines.hpp"
#include "defdts/digest.hpp"
#include "defdts/errors.hpp"
#include "defdts/parser.hpp"
#include "defdts/rng.hpp"

namespace defdts::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string scoring_policy_name(ScoringPolicy p) {
  return p == ScoringPolicy::Emitted ? "emitted" : "deduced";
}

ScoringPolicy parse_scoring_policy(const std::string& s) {
  if (s == "emitted") return ScoringPolicy::Emitted;
  if (s == "deduced") return ScoringPolicy::Deduced;
  throw ConfigError("unknown scoring policy: " + s);
}

namespace {

std::string mock_mode_name(llm::MockPolicy::Mode m) {
  return m == llm::MockPolicy::Mode::GoldEcho ? "gold_echo" : "noisy";
}

llm::MockPolicy::Mode parse_mock_mode(const std::string& s) {
  if (s == "gold_echo") return llm::MockPolicy::Mode::GoldEcho;
  if (s == "noisy") return llm::MockPolicy::Mode::Noisy;
  throw ConfigError("unknown mock mode: " + s);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& content) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, p);
}

ordered_json record_to_json(const PredictionRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["segments"] = r.segments.ids;
  j["source"] = r.source;
  j["error"] = r.error;
  return j;
}

PredictionRecord record_from_json(const json& j) {
  PredictionRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.segments.ids = j.at("segments").get<std::vector<int>>();
    r.source = j.at("source").get<std::string>();
    r.error = j.at("error").get<bool>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad prediction record: ") + e.what());
  }
  return r;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (corpus_path.empty()) throw ConfigError("corpus path is required");
  if (pool_builtin.has_value() == pool_file.has_value()) {
    throw ConfigError("exactly one of pool.builtin / pool.file is required");
  }
  if (mock.has_value() == provider.has_value()) {
    throw ConfigError("exactly one of backend.mock / backend.provider is required");
  }
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (output_dir.empty()) throw ConfigError("output directory is required");
  if (sample && *sample < 1) throw ConfigError("sample must be >= 1");
  if (mock) mock->validate();
  if (provider) provider->validate();
  if (scoring_policy == ScoringPolicy::Deduced &&
      (variant.mode == prompt::Mode::NoIntent || variant.mode == prompt::Mode::NoAll)) {
    throw ConfigError("deduced scoring needs a variant that emits intents");
  }
}

std::string ExperimentConfig::to_json() const {
  ordered_json j;
  j["corpus"] = {{"path", corpus_path.string()}, {"format", corpus_format}};
  if (pool_builtin) {
    j["pool"] = {{"builtin", *pool_builtin}};
  } else {
    j["pool"] = {{"file", pool_file->string()}};
  }
  j["variant"] = {{"mode", prompt::mode_name(variant.mode)},
                  {"format", prompt::format_name(variant.format)}};
  if (mock) {
    j["backend"] = {{"mock",
                     {{"mode", mock_mode_name(mock->mode)},
                      {"label_flip_prob", mock->label_flip_prob},
                      {"malform_prob", mock->malform_prob},
                      {"seed", mock->seed}}}};
  } else {
    j["backend"] = {{"provider",
                     {{"endpoint", provider->endpoint},
                      {"model_name", provider->model_name},
                      {"temperature", provider->temperature},
                      {"max_output_tokens", provider->max_output_tokens},
                      {"request_timeout_s", provider->request_timeout_s},
                      {"max_retries", provider->max_retries},
                      {"backoff_base_s", provider->backoff_base_s},
                      {"api_key_env", provider->api_key_env},
                      {"cache_dir", provider->cache_dir.string()}}}};
  }
  j["concurrency"] = concurrency;
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["scoring_policy"] = scoring_policy_name(scoring_policy);
  if (sample) j["sample"] = *sample;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.corpus_path = j.at("corpus").at("path").get<std::string>();
    cfg.corpus_format = j.at("corpus").value("format", std::string("canonical"));
    const json& pool = j.at("pool");
    if (pool.contains("builtin")) cfg.pool_builtin = pool.at("builtin").get<std::string>();
    if (pool.contains("file")) cfg.pool_file = pool.at("file").get<std::string>();
    if (j.contains("variant")) {
      cfg.variant.mode = prompt::parse_mode(j["variant"].value("mode", "FULL"));
      cfg.variant.format = prompt::parse_format(j["variant"].value("format", "XML"));
    }
    const json& backend = j.at("backend");
    if (backend.contains("mock")) {
      const json& m = backend["mock"];
      llm::MockPolicy policy;
      policy.mode = parse_mock_mode(m.value("mode", "gold_echo"));
      policy.label_flip_prob = m.value("label_flip_prob", 0.0);
      policy.malform_prob = m.value("malform_prob", 0.0);
      policy.seed = m.value("seed", uint64_t(0));
      cfg.mock = policy;
    }
    if (backend.contains("provider")) {
      const json& p = backend["provider"];
      llm::ProviderConfig pc;
      pc.endpoint = p.at("endpoint").get<std::string>();
      pc.model_name = p.at("model_name").get<std::string>();
      pc.temperature = p.value("temperature", 0.0);
      pc.max_output_tokens = p.value("max_output_tokens", 8192);
      pc.request_timeout_s = p.value("request_timeout_s", 120.0);
      pc.max_retries = p.value("max_retries", 3);
      pc.backoff_base_s = p.value("backoff_base_s", 1.0);
      pc.api_key_env = p.value("api_key_env", std::string("DEFDTS_API_KEY"));
      pc.cache_dir = p.value("cache_dir", std::string("cache"));
      cfg.provider = pc;
    }
    cfg.concurrency = j.value("concurrency", 1);
    cfg.seed = j.value("seed", uint64_t(0));
    cfg.output_dir = j.value("output_dir", std::string("runs"));
    cfg.scoring_policy = parse_scoring_policy(j.value("scoring_policy", "emitted"));
    if (j.contains("sample")) cfg.sample = j["sample"].get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  return from_json(read_file(path));
}

std::string ExperimentConfig::run_id() const {
  return sha256_hex(to_json()).substr(0, 12);
}

PredictionFile load_predictions(const fs::path& path) {
  PredictionFile f;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError(std::string("bad prediction line: ") + e.what());
    }
    f.records.push_back(record_from_json(j));
  }
  return f;
}

void write_predictions(const PredictionFile& f, const fs::path& path) {
  std::ostringstream os;
  for (const PredictionRecord& r : f.records) os << record_to_json(r).dump() << "\n";
  write_file(path, os.str());
}

namespace {

struct Resolved {
  corpus::Corpus corpus;  // already subsampled
  prompt::IntentPool pool;
};

Resolved resolve(const ExperimentConfig& cfg) {
  cfg.validate();
  Resolved r;
  r.corpus = corpus::load_corpus(cfg.corpus_path, cfg.corpus_format);
  r.pool = cfg.pool_builtin ? prompt::builtin_pool(*cfg.pool_builtin)
                            : prompt::load_pool(*cfg.pool_file);
  if (cfg.sample && *cfg.sample < int(r.corpus.dialogues.size())) {
    int n = int(r.corpus.dialogues.size());
    int m = *cfg.sample;
    Rng rng(derive_seed(cfg.seed, fnv1a64("sample")));
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
    for (int pick = 0; pick < m; ++pick) {
      int j = rng.uniform_int(pick, n - 1);
      std::swap(idx[size_t(pick)], idx[size_t(j)]);
    }
    idx.resize(size_t(m));
    std::sort(idx.begin(), idx.end());
    std::vector<corpus::Dialogue> kept;
    kept.reserve(size_t(m));
    for (int i : idx) kept.push_back(std::move(r.corpus.dialogues[size_t(i)]));
    r.corpus.dialogues = std::move(kept);
    r.corpus.stats = corpus::compute_stats(r.corpus.dialogues);
  }
  return r;
}

std::string errors_to_json(const parser::ParseResult& res) {
  ordered_json j;
  j["errors"] = ordered_json::array();
  for (const parser::ParseError& e : res.errors) {
    j["errors"].push_back({{"kind", parser::error_kind_name(e.kind)},
                           {"location", e.location},
                           {"detail", e.detail}});
  }
  j["warnings"] = res.warnings;
  return j.dump(2) + "\n";
}

std::vector<parser::ParseError> errors_from_json(const std::string& text,
                                                 const std::string& dialogue_id) {
  json j = json::parse(text);
  std::vector<parser::ParseError> out;
  for (const json& e : j.at("errors")) {
    parser::ParseError pe;
    pe.dialogue_id = dialogue_id;
    std::string kind = e.at("kind").get<std::string>();
    pe.kind = parser::ErrorKind::MissingBlock;
    for (parser::ErrorKind k :
         {parser::ErrorKind::MissingBlock, parser::ErrorKind::MalformedTag,
          parser::ErrorKind::UnknownIntent, parser::ErrorKind::UnknownLabel,
          parser::ErrorKind::IndexMismatch, parser::ErrorKind::CountMismatch}) {
      if (parser::error_kind_name(k) == kind) pe.kind = k;
    }
    pe.location = e.at("location").get<long>();
    pe.detail = e.at("detail").get<std::string>();
    out.push_back(std::move(pe));
  }
  return out;
}

metrics::MetricReport report_over(const analysis::RunArtifacts& arts,
                                  const corpus::Corpus& corpus) {
  std::vector<std::pair<corpus::SegmentIds, corpus::SegmentIds>> pairs;
  int errored = 0;
  for (const analysis::DialogueArtifact& a : arts.dialogues) {
    if (!a.predicted) {
      ++errored;
      continue;
    }
    const corpus::Dialogue* d = nullptr;
    for (const corpus::Dialogue& cand : corpus.dialogues) {
      if (cand.id == a.dialogue_id) {
        d = &cand;
        break;
      }
    }
    if (!d) throw IdMismatchError("artifact id not in corpus: " + a.dialogue_id);
    pairs.emplace_back(corpus::segmentation_of(*d), *a.predicted);
  }
  metrics::MetricReport rep;
  if (!pairs.empty()) rep = metrics::corpus_metrics(pairs);
  rep.n_dialogues_scored = int(pairs.size());
  rep.n_dialogues_errored = errored;
  return rep;
}

// Reconstructs the artifact for a dialogue already persisted by an earlier
// invocation.
analysis::DialogueArtifact reload_artifact(const fs::path& run_dir,
                                           const corpus::Dialogue& d,
                                           const std::string& prompt_hash,
                                           const PredictionRecord& rec) {
  analysis::DialogueArtifact art;
  art.dialogue_id = d.id;
  art.prompt_hash = prompt_hash;
  fs::path parsed_path = run_dir / "parsed" / (d.id + ".parsed.json");
  if (fs::exists(parsed_path)) {
    art.parsed = parser::parsed_from_json(read_file(parsed_path));
  }
  fs::path errors_path = run_dir / "errors" / (d.id + ".errors.json");
  if (fs::exists(errors_path)) {
    art.errors = errors_from_json(read_file(errors_path), d.id);
  }
  if (!rec.error) art.predicted = rec.segments;
  return art;
}

}  // namespace

analysis::RunArtifacts run(const ExperimentConfig& cfg, const RunOptions& opts) {
  Resolved res = resolve(cfg);
  const fs::path dir = cfg.run_dir();
  fs::create_directories(dir / "raw");
  fs::create_directories(dir / "parsed");
  fs::create_directories(dir / "errors");
  if (!fs::exists(dir / "config.json")) {
    write_file(dir / "config.json", cfg.to_json());
  }

  analysis::RunArtifacts arts;
  arts.run_id = cfg.run_id();
  arts.corpus_name = res.corpus.name;
  arts.pool_name = res.pool.name;
  arts.variant = cfg.variant;

  // Prompts are deterministic, so build them up front; they double as the
  // dry-run output and the resume-time hash source.
  std::vector<prompt::PromptText> prompts;
  prompts.reserve(res.corpus.dialogues.size());
  for (const corpus::Dialogue& d : res.corpus.dialogues) {
    prompts.push_back(prompt::build_prompt(d, res.pool, cfg.variant));
  }

  if (opts.dry_run) {
    std::string tag = prompt::mode_name(cfg.variant.mode) + "." +
                      prompt::format_name(cfg.variant.format);
    for (size_t i = 0; i < prompts.size(); ++i) {
      write_file(dir / (res.corpus.dialogues[i].id + "." + tag + ".prompt.txt"),
                 prompts[i].text);
    }
    return arts;
  }

  // Resume: records already in predictions.jsonl must be a prefix of the
  // dialogue sequence in corpus order.
  const fs::path pred_path = dir / "predictions.jsonl";
  size_t done = 0;
  if (fs::exists(pred_path)) {
    PredictionFile prior = load_predictions(pred_path);
    if (prior.records.size() > res.corpus.dialogues.size()) {
      throw IdMismatchError("prediction file has more records than the corpus");
    }
    for (size_t i = 0; i < prior.records.size(); ++i) {
      if (prior.records[i].id != res.corpus.dialogues[i].id) {
        throw IdMismatchError("prediction record " + std::to_string(i) +
                              " is '" + prior.records[i].id + "', corpus has '" +
                              res.corpus.dialogues[i].id + "'");
      }
      arts.dialogues.push_back(reload_artifact(dir, res.corpus.dialogues[i],
                                               prompts[i].prompt_hash,
                                               prior.records[i]));
    }
    done = prior.records.size();
  }

  std::unique_ptr<llm::Client> client;
  if (cfg.provider) {
    llm::ProviderConfig pc = *cfg.provider;
    pc.max_in_flight = cfg.concurrency;
    client = std::make_unique<llm::Client>(pc);
  }

  auto complete_text = [&](size_t i) {
    const corpus::Dialogue& d = res.corpus.dialogues[i];
    if (opts.on_backend_call) opts.on_backend_call(d.id);
    if (cfg.mock) return llm::mock_complete(*cfg.mock, d, res.pool, cfg.variant);
    return client->complete(prompts[i]).response_text;
  };

  std::ofstream pred_out(pred_path, std::ios::binary | std::ios::app);
  if (!pred_out) throw IoError("cannot append to " + pred_path.string());

  parser::ParseOptions popts = parser::options_for(cfg.variant);
  int newly_done = 0;
  size_t i = done;
  while (i < res.corpus.dialogues.size()) {
    if (opts.stop_after_n >= 0 && newly_done >= opts.stop_after_n) break;
    // Fan out one bounded batch of completions, then persist them in order.
    size_t batch_end = std::min(res.corpus.dialogues.size(), i + size_t(cfg.concurrency));
    if (opts.stop_after_n >= 0) {
      size_t budget = size_t(opts.stop_after_n - newly_done);
      batch_end = std::min(batch_end, i + budget);
    }
    std::vector<std::future<std::string>> batch;
    for (size_t b = i; b < batch_end; ++b) {
      batch.push_back(std::async(cfg.concurrency > 1 ? std::launch::async
                                                     : std::launch::deferred,
                                 complete_text, b));
    }
    for (size_t b = i; b < batch_end; ++b) {
      const corpus::Dialogue& d = res.corpus.dialogues[b];
      std::string raw = batch[b - i].get();
      write_file(dir / "raw" / (d.id + ".raw.txt"), raw);

      parser::ParseResult pr = parser::parse_output(
          raw, d.size(), res.pool, cfg.variant.format, popts, d.id);

      analysis::DialogueArtifact art;
      art.dialogue_id = d.id;
      art.prompt_hash = prompts[b].prompt_hash;
      art.errors = pr.errors;

      PredictionRecord rec;
      rec.id = d.id;
      rec.source = "defdts";
      if (pr.scoreable()) {
        art.parsed = pr.parsed;
        write_file(dir / "parsed" / (d.id + ".parsed.json"),
                   parser::parsed_to_json(*pr.parsed));
        parser::SegmentationPolicy sp =
            cfg.scoring_policy == ScoringPolicy::Emitted
                ? parser::SegmentationPolicy::Emitted
                : parser::SegmentationPolicy::Deduced;
        art.predicted = parser::to_segmentation(*pr.parsed, res.pool, sp);
        rec.segments = *art.predicted;
      } else {
        rec.error = true;
      }
      if (!pr.errors.empty() || !pr.warnings.empty()) {
        write_file(dir / "errors" / (d.id + ".errors.json"), errors_to_json(pr));
      }
      pred_out << record_to_json(rec).dump() << "\n";
      pred_out.flush();
      arts.dialogues.push_back(std::move(art));
      ++newly_done;
    }
    i = batch_end;
  }

  arts.report = report_over(arts, res.corpus);
  write_file(dir / "report.json", arts.report.to_json() + "\n");
  write_file(dir / "report.md",
             arts.report.to_markdown(prompt::mode_name(cfg.variant.mode)));
  return arts;
}

analysis::RunArtifacts load_run(const ExperimentConfig& cfg) {
  Resolved res = resolve(cfg);
  const fs::path dir = cfg.run_dir();
  const fs::path pred_path = dir / "predictions.jsonl";
  if (!fs::exists(pred_path)) {
    throw IoError("no predictions at " + pred_path.string() + "; run first");
  }
  analysis::RunArtifacts arts;
  arts.run_id = cfg.run_id();
  arts.corpus_name = res.corpus.name;
  arts.pool_name = res.pool.name;
  arts.variant = cfg.variant;
  PredictionFile prior = load_predictions(pred_path);
  if (prior.records.size() != res.corpus.dialogues.size()) {
    throw IdMismatchError("run is incomplete: " + std::to_string(prior.records.size()) +
                          " of " + std::to_string(res.corpus.dialogues.size()) +
                          " dialogues");
  }
  for (size_t i = 0; i < prior.records.size(); ++i) {
    const corpus::Dialogue& d = res.corpus.dialogues[i];
    if (prior.records[i].id != d.id) {
      throw IdMismatchError("prediction record " + std::to_string(i) + " is '" +
                            prior.records[i].id + "', corpus has '" + d.id + "'");
    }
    prompt::PromptText pt = prompt::build_prompt(d, res.pool, cfg.variant);
    arts.dialogues.push_back(reload_artifact(dir, d, pt.prompt_hash, prior.records[i]));
  }
  arts.report = report_over(arts, res.corpus);
  return arts;
}

metrics::MetricReport score(const PredictionFile& predictions,
                            const corpus::Corpus& corpus) {
  if (predictions.records.size() != corpus.dialogues.size()) {
    throw IdMismatchError("prediction count " +
                          std::to_string(predictions.records.size()) +
                          " != corpus size " +
                          std::to_string(corpus.dialogues.size()));
  }
  std::map<std::string, const PredictionRecord*> by_id;
  for (const PredictionRecord& r : predictions.records) {
    if (!by_id.emplace(r.id, &r).second) {
      throw IdMismatchError("duplicate prediction id: " + r.id);
    }
  }
  std::vector<std::pair<corpus::SegmentIds, corpus::SegmentIds>> pairs;
  int errored = 0;
  for (const corpus::Dialogue& d : corpus.dialogues) {
    auto it = by_id.find(d.id);
    if (it == by_id.end()) throw IdMismatchError("no prediction for dialogue " + d.id);
    const PredictionRecord& r = *it->second;
    if (r.error) {
      ++errored;
      continue;
    }
    if (r.segments.size() != d.size()) {
      throw IdMismatchError("prediction for " + d.id + " has " +
                            std::to_string(r.segments.size()) + " ids, dialogue has " +
                            std::to_string(d.size()) + " utterances");
    }
    pairs.emplace_back(corpus::segmentation_of(d), r.segments);
  }
  metrics::MetricReport rep;
  if (!pairs.empty()) rep = metrics::corpus_metrics(pairs);
  rep.n_dialogues_scored = int(pairs.size());
  rep.n_dialogues_errored = errored;
  return rep;
}

PredictionFile random_baseline(const corpus::Corpus& corpus, uint64_t seed) {
  PredictionFile f;
  for (const corpus::Dialogue& d : corpus.dialogues) {
    PredictionRecord r;
    r.id = d.id;
    r.source = "random";
    r.segments = baselines::random_segmenter(d, seed);
    f.records.push_back(std::move(r));
  }
  return f;
}

PredictionFile texttiling_baseline(const corpus::Corpus& corpus) {
  PredictionFile f;
  for (const corpus::Dialogue& d : corpus.dialogues) {
    PredictionRecord r;
    r.id = d.id;
    r.source = "texttiling";
    try {
      r.segments = baselines::texttiling(d);
    } catch (const DegenerateInputError&) {
      r.error = true;
    }
    f.records.push_back(std::move(r));
  }
  return f;
}

std::vector<analysis::RunArtifacts> ablation_suite(const ExperimentConfig& base,
                                                   const RunOptions& opts) {
  static const prompt::Mode kOrder[] = {
      prompt::Mode::NoAll,     prompt::Mode::NoIntent,
      prompt::Mode::NoExamples, prompt::Mode::NoContext,
      prompt::Mode::NoBidirectional, prompt::Mode::Full};
  std::vector<analysis::RunArtifacts> out;
  for (prompt::Mode m : kOrder) {
    ExperimentConfig cfg = base;
    cfg.variant.mode = m;
    out.push_back(run(cfg, opts));
  }
  return out;
}

std::vector<analysis::RunArtifacts> format_suite(const ExperimentConfig& base,
                                                 const RunOptions& opts) {
  static const prompt::Format kOrder[] = {prompt::Format::Nl, prompt::Format::Json,
                                          prompt::Format::Xml};
  std::vector<analysis::RunArtifacts> out;
  for (prompt::Format f : kOrder) {
    ExperimentConfig cfg = base;
    cfg.variant.format = f;
    out.push_back(run(cfg, opts));
  }
  return out;
}

std::string ablation_markdown(const std::vector<analysis::RunArtifacts>& runs) {
  std::ostringstream os;
  os << "| Variant | Pk | WD | F1 | Errors |\n|---|---|---|---|---|\n";
  for (const analysis::RunArtifacts& r : runs) {
    os << "| " << prompt::mode_name(r.variant.mode) << "/"
       << prompt::format_name(r.variant.format) << " | " << r.report.pk << " | "
       << r.report.wd << " | " << r.report.f1 << " | "
       << r.report.n_dialogues_errored << " |\n";
  }
  return os.str();
}

std::string ablation_csv(const std::vector<analysis::RunArtifacts>& runs) {
  std::ostringstream os;
  os << "variant,format,pk,wd,f1,errors\n";
  for (const analysis::RunArtifacts& r : runs) {
    os << prompt::mode_name(r.variant.mode) << ','
       << prompt::format_name(r.variant.format) << ',' << r.report.pk << ','
       << r.report.wd << ',' << r.report.f1 << ','
       << r.report.n_dialogues_errored << '\n';
  }
  return os.str();
}

}  // namespace defdts::pipeline
