#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slic/corpus.hpp"
#include "slic/cypher.hpp"
#include "slic/factorization.hpp"
#include "slic/graph.hpp"
#include "slic/llm.hpp"
#include "slic/rag.hpp"
#include "slic/vector_store.hpp"

namespace slic::testing {

std::filesystem::path source_dir();
std::filesystem::path bundled_config();

// Removed on destruction.
class TempDir {
public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

// ---- planted corpora -----------------------------------------------------

struct PlantedCorpus {
  Corpus corpus;               // clean_* fields filled, ready for build_tfidf
  std::vector<int> labels;     // planted topic per document, corpus order
  std::vector<std::string> heads;  // most frequent word of each topic
};

// k topics with disjoint vocabularies; each document draws its words from
// its own topic only. Topic t's head word appears in every one of its docs.
PlantedCorpus planted_corpus(int k, int docs, std::uint64_t seed, int words_per_doc = 24, int vocab_per_topic = 12);

// Fraction of documents whose predicted label maps to the planted one under
// the best one-to-one relabelling.
double label_agreement(const std::vector<int>& planted, const std::vector<int>& predicted);

Eigen::MatrixXd random_nonnegative(int rows, int cols, std::uint64_t seed);

// ---- QA fixture ----------------------------------------------------------

// 60 documents in 10 planted topics with full bibliographic metadata, the
// graph emitted from them and a vector store.
struct QaFixture {
  Corpus corpus;
  std::vector<factorization::TopicSummary> topics;
  graph::GraphStore graph;
  vs::VectorStore vectors;
  std::unique_ptr<vs::HashEmbedder> provider;
  std::vector<rag::QueryTemplate> templates;
  std::unique_ptr<llm::MockLlm> llm;

  rag::System system(bool retrieval = true) const;
};

std::unique_ptr<QaFixture> make_qa_fixture();

struct QaQuestion {
  std::string text;
  std::string expected;
  std::string kind;                          // "document" or "topic"
  std::vector<std::string> acceptable_dois;  // any one of these is a correct citation
};

// 7 metadata templates x 20 DOIs, then 2 topic templates x 10 topics.
std::vector<QaQuestion> qa_questions(const QaFixture& f);

struct QaScore {
  int total = 0;
  int correct = 0;
  int abstained = 0;
  int cited_correctly = 0;
  std::vector<std::string> failures;
};

QaScore run_qa(const QaFixture& f, bool retrieval);

// ---- graph oracle --------------------------------------------------------

graph::GraphStore random_graph(std::uint64_t seed, int max_nodes = 30, int max_edges = 30);
std::string random_query(const graph::GraphStore& g, std::uint64_t seed);

// Nested-loop join over every (edge, orientation) tuple, no planning. Two
// node slots bind the same node exactly when they share a variable.
cypher::Table oracle_execute(const graph::GraphStore& g, const cypher::QueryAst& ast);

// Rows as sorted, comparable strings.
std::vector<std::string> row_multiset(const graph::GraphStore& g, const cypher::Table& t);
// engine == oracle as multisets; with LIMIT, the engine rows must be a
// sub-multiset of the oracle's of size min(limit, oracle rows).
bool tables_agree(const graph::GraphStore& g, const cypher::QueryAst& ast, const cypher::Table& engine,
                  const cypher::Table& oracle);

// ---- misc ----------------------------------------------------------------

std::string fuzz_string(std::uint64_t seed);
graph::GraphBatch fixture_batch();

}  // namespace slic::testing
