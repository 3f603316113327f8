#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "slic/corpus.hpp"

namespace slic::vs {

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  // Unit-L2 vector of dimension(); equal inputs give equal outputs.
  virtual std::vector<double> embed(const std::string& text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
};

// FNV-1a hashed bag of cleaned tokens, L2-normalised. A text without tokens
// maps to the first basis vector so every output stays unit length.
class HashEmbedder final : public EmbeddingProvider {
public:
  explicit HashEmbedder(std::size_t d = 256);
  std::vector<double> embed(const std::string& text) const override;
  std::size_t dimension() const override { return d_; }
  std::string name() const override { return "hash-" + std::to_string(d_); }

private:
  std::size_t d_;
};

// OpenAI-compatible embeddings endpoint: POST <base>/v1/embeddings with
// {"model", "input"}; bearer token from SLIC_EMBEDDING_TOKEN if set.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
  HttpEmbeddingProvider(std::string base_url, std::string model, std::size_t d);
  std::vector<double> embed(const std::string& text) const override;
  std::size_t dimension() const override { return d_; }
  std::string name() const override { return "http:" + model_; }

private:
  std::string base_url_;
  std::string model_;
  std::size_t d_;
};

struct VectorRecord {
  std::string doi;
  int chunk_id = -1;  // -1: title + abstract; >= 0: full-text paragraph
  std::string text;
  std::vector<float> vector;
  std::string norm_title;
};

struct Hit {
  std::string doi;
  int chunk_id = -1;
  double score = 0;
  std::string text;
};

enum class LevenshteinField { title, text };

// Splits on blank lines; paragraphs longer than max_chars are cut at the last
// sentence end (". ", "! ", "? ") before the limit, or hard-cut when none.
std::vector<std::pair<int, std::string>> chunk_fulltext(const std::string& text, std::size_t max_chars = 1000);

// Edit distance over code points.
std::size_t levenshtein(const std::string& a, const std::string& b);
// levenshtein / max(length); 0 for two empty strings.
double normalized_levenshtein(const std::string& a, const std::string& b);

class VectorStore {
public:
  explicit VectorStore(std::size_t dimension = 0) : d_(dimension) {}

  std::size_t dimension() const { return d_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<VectorRecord>& records() const { return records_; }
  const VectorRecord* find(const std::string& doi, int chunk_id) const;

  // Throws EmbeddingDimensionMismatch when the vector length differs from
  // the store dimension and FormatError on a duplicate (doi, chunk_id).
  void add(VectorRecord r);

  std::vector<Hit> knn_cosine(const std::vector<double>& query, std::size_t k) const;
  std::vector<Hit> knn_levenshtein(const std::string& query, std::size_t k,
                                   LevenshteinField field = LevenshteinField::title) const;

  // Header line {"d","count"} then one JSON record per line, vectors as
  // base64 little-endian float32.
  std::string serialize() const;
  static VectorStore deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static VectorStore load(const std::filesystem::path& path);

private:
  std::size_t d_;
  std::vector<VectorRecord> records_;
  std::map<std::pair<std::string, int>, std::size_t> index_;
};

struct IndexStats {
  std::size_t documents = 0;
  std::size_t chunks = 0;
};

VectorStore index_documents(const Corpus& corpus, const EmbeddingProvider& provider, std::size_t max_chars = 1000,
                            IndexStats* stats = nullptr);

std::string document_text(const Document& d);

}  // namespace slic::vs
