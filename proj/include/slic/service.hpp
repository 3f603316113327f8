#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slic/factorization.hpp"
#include "slic/graph.hpp"
#include "slic/llm.hpp"
#include "slic/pipeline.hpp"
#include "slic/rag.hpp"
#include "slic/vector_store.hpp"

namespace slic::service {

struct Artifacts {
  Corpus corpus;  // pruned corpus, topic ids filled in
  graph::GraphStore graph;
  vs::VectorStore vectors;
  std::vector<factorization::TopicSummary> topics;
  std::vector<rag::QueryTemplate> templates;
  std::optional<pipeline::Review> review;
  std::optional<Corpus> review_corpus;  // corpus.jsonl, the set under review
  std::vector<pruning::PruneDecision> decisions;
};

// Reads whatever the pipeline has produced so far in cfg.output; a run
// paused for review still serves the review endpoints.
Artifacts load_artifacts(const pipeline::PipelineConfig& cfg, const vs::EmbeddingProvider& provider);

struct Response {
  int status = 200;
  nlohmann::json body;
};

class Service {
public:
  // `output` receives decisions.jsonl and state.json; empty keeps review
  // submissions in memory only.
  Service(Artifacts artifacts, std::unique_ptr<vs::EmbeddingProvider> provider, std::unique_ptr<llm::LlmClient> llm,
          std::filesystem::path output = {});

  // Transport-independent dispatch; `path` is already URL-decoded.
  Response handle(const std::string& method, const std::string& path, const std::string& body);

  const rag::System& system() const { return system_; }
  const Artifacts& artifacts() const { return a_; }

private:
  Response review_clusters() const;
  Response submit_decisions(const std::string& body);
  Response chat(const std::string& body) const;
  Response query(const std::string& body) const;
  Response document(const std::string& doi) const;

  Artifacts a_;
  std::unique_ptr<vs::EmbeddingProvider> provider_;
  std::unique_ptr<llm::LlmClient> llm_;
  std::filesystem::path output_;
  rag::System system_;
  mutable std::mutex review_mu_;
};

nlohmann::json error_json(const std::exception& e);

// Blocks serving HTTP until the process is interrupted. Throws ConfigError
// when the address cannot be bound.
void serve(Service& service, const std::string& host, int port);

// The same HTTP bridge on a background thread; port 0 picks a free port.
class BackgroundServer {
public:
  BackgroundServer(Service& service, const std::string& host, int port = 0);
  ~BackgroundServer();
  BackgroundServer(const BackgroundServer&) = delete;
  BackgroundServer& operator=(const BackgroundServer&) = delete;

  int port() const { return port_; }
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace slic::service
