#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slic/builder.hpp"
#include "slic/corpus.hpp"
#include "slic/factorization.hpp"
#include "slic/graph.hpp"
#include "slic/llm.hpp"
#include "slic/pruning.hpp"
#include "slic/text.hpp"
#include "slic/vector_store.hpp"

namespace slic::pipeline {

struct SourcesConfig {
  std::string mode = "fixture";  // fixture | http
  std::filesystem::path fixtures;
  std::map<std::string, std::string> urls;  // source name -> base URL (http mode)
  double max_rps = 3.0;
};

struct EmbeddingConfig {
  std::string provider = "hash";  // hash | http
  std::size_t dimension = 256;
  std::string url;
  std::string model;
};

struct LlmConfig {
  std::string provider = "mock";  // mock | http
  std::filesystem::path script;
  std::string url;
  std::string model;
};

// Loaded from a single JSON document; relative paths resolve against the
// config file's directory.
struct PipelineConfig {
  SourcesConfig sources;
  std::filesystem::path core;  // one DOI per line
  std::filesystem::path output;
  std::filesystem::path ner_gazetteer;  // optional
  std::filesystem::path sme_terms;      // optional, one term per line
  std::filesystem::path sme_rules;      // optional, TSV substitutions
  std::filesystem::path templates;      // optional, query templates
  builder::ExpansionConfig expansion;
  text::CleaningConfig cleaning;
  double tau = 0.35;
  int review_clusters = 4;
  factorization::BleedConfig bleed;
  std::size_t chunk_chars = 1000;
  EmbeddingConfig embedding;
  LlmConfig llm;
  std::string host = "127.0.0.1";
  int port = 8080;

  // Throws ConfigError naming the offending field or path.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
  void validate() const;
  // Settings that shape the artifacts, without any filesystem paths.
  nlohmann::json fingerprint() const;
};

std::shared_ptr<const builder::ScholarlySource> make_source(const PipelineConfig& cfg);
std::unique_ptr<vs::EmbeddingProvider> make_provider(const PipelineConfig& cfg);
std::unique_ptr<llm::LlmClient> make_llm(const PipelineConfig& cfg);

// ---- stages --------------------------------------------------------------

// Core lookup, expansion, bigram search, cleaning, then entity, acronym and
// SME-term annotation.
Corpus ingest(const PipelineConfig& cfg);

struct Review {
  std::vector<pruning::ProjectedPoint> points;
  std::vector<pruning::ReviewCluster> clusters;
};

Review review(const Corpus& corpus, const PipelineConfig& cfg);

// Applies the decisions, then drops documents below tau against the anchors.
Corpus prune(const Corpus& corpus, const Review& rv, const std::vector<pruning::PruneDecision>& decisions,
             const PipelineConfig& cfg, const vs::EmbeddingProvider& provider);

struct Factors {
  factorization::FactorPair pair;
  factorization::KSelection selection;
  std::vector<factorization::TopicSummary> topics;
  std::vector<std::string> doc_keys;
  std::vector<int> labels;
};

// Throws DimensionError when no k in range clears the threshold.
Factors factorize(const Corpus& pruned, const PipelineConfig& cfg);
// Copy of `corpus` with topic_id set from the factor assignments.
Corpus with_topics(const Corpus& corpus, const std::vector<std::string>& doc_keys, const std::vector<int>& labels);

graph::GraphStore build_graph(const Corpus& corpus_with_topics, const std::vector<factorization::TopicSummary>& topics);

// ---- artifacts -----------------------------------------------------------

namespace files {
inline constexpr const char* corpus = "corpus.jsonl";
inline constexpr const char* review = "review.json";
inline constexpr const char* decisions = "decisions.jsonl";
inline constexpr const char* pruned = "pruned.jsonl";
inline constexpr const char* graph = "graph.jsonl";
inline constexpr const char* vectors = "vectors.store";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* state = "state.json";
}  // namespace files

nlohmann::json review_json(const Review& rv);
Review review_from_json(const nlohmann::json& j);

// The single factors_k<k> directory under `out`; ConfigError when absent.
std::filesystem::path factors_dir(const std::filesystem::path& out);
struct LoadedTopics {
  std::vector<factorization::TopicSummary> topics;
  std::map<std::string, int> assignments;
};
LoadedTopics load_topics(const std::filesystem::path& factors);

// ---- driver --------------------------------------------------------------

struct RunOptions {
  bool auto_keep = false;
  bool force = false;
};

// The review stage has no decisions yet; state.json records the pause.
class AwaitingDecisions : public Error {
public:
  explicit AwaitingDecisions(const std::string& what) : Error("AwaitingDecisions", what) {}
};

// Outputs from an earlier complete run exist and --force was not given.
class OutputExists : public Error {
public:
  explicit OutputExists(const std::string& what) : Error("OutputExists", what) {}
};

class StageFailed : public Error {
public:
  StageFailed(std::string stage, const std::string& what, nlohmann::json partial)
      : Error("StageFailed", stage + ": " + what), stage_(std::move(stage)), partial_(std::move(partial)) {}
  const std::string& stage() const noexcept { return stage_; }
  const nlohmann::json& partial_manifest() const noexcept { return partial_; }

private:
  std::string stage_;
  nlohmann::json partial_;
};

// Runs every stage and writes manifest.json listing the seven artifacts with
// their SHA-256. Without auto_keep the run pauses (AwaitingDecisions) until
// decisions.jsonl exists in the output directory.
nlohmann::json run_pipeline(const PipelineConfig& cfg, const RunOptions& opts);

// sha256 of a file, or for a directory of the sorted "name sha256" lines of
// its files.
std::string artifact_hash(const std::filesystem::path& path);

// Exit codes shared by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRefused = 3;
inline constexpr int kExitAwaiting = 4;

}  // namespace slic::pipeline
