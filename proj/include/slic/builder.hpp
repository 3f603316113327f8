#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "slic/corpus.hpp"
#include "slic/error.hpp"
#include "slic/text.hpp"

namespace slic::builder {

// Behaviour contract for one scholarly API. Implementations must be
// deterministic for a fixed backing data set and return stable orderings.
class ScholarlySource {
public:
  virtual ~ScholarlySource() = default;
  virtual std::optional<SourceRecord> lookup(const std::string& doi) const = 0;
  virtual std::vector<SourceRecord> cited_by(const std::string& doi) const = 0;
  virtual std::vector<SourceRecord> references(const std::string& doi) const = 0;
  virtual std::vector<SourceRecord> search(const std::string& query, int limit) const = 0;
  virtual std::string name() const = 0;
};

// Raised when a source cannot be reached. Carries whatever the caller had
// assembled before the failure.
class SourceUnavailable : public Error {
public:
  explicit SourceUnavailable(const std::string& what) : Error("SourceUnavailable", what) {}
  SourceUnavailable(const std::string& what, Corpus partial)
      : Error("SourceUnavailable", what), partial_(std::make_shared<Corpus>(std::move(partial))) {}

  const Corpus* partial() const noexcept { return partial_.get(); }

private:
  std::shared_ptr<const Corpus> partial_;
};

// Reads recorded responses laid out as
//   <root>/<source>/{lookup,cited_by,references,search}/<key>.json
// where <key> is the percent-encoded DOI or query. Lookup files hold one
// record, the others an array. Missing files mean "no result".
class FixtureSource final : public ScholarlySource {
public:
  FixtureSource(std::filesystem::path root, Source source);

  std::optional<SourceRecord> lookup(const std::string& doi) const override;
  std::vector<SourceRecord> cited_by(const std::string& doi) const override;
  std::vector<SourceRecord> references(const std::string& doi) const override;
  std::vector<SourceRecord> search(const std::string& query, int limit) const override;
  std::string name() const override { return to_string(source_); }

private:
  std::vector<SourceRecord> read_list(const char* method, const std::string& key) const;

  std::filesystem::path dir_;
  Source source_;
};

// Queries several sources and concatenates their answers in member order.
// `lookup` returns the first hit.
class FederatedSource final : public ScholarlySource {
public:
  explicit FederatedSource(std::vector<std::shared_ptr<const ScholarlySource>> members);

  std::optional<SourceRecord> lookup(const std::string& doi) const override;
  std::vector<SourceRecord> cited_by(const std::string& doi) const override;
  std::vector<SourceRecord> references(const std::string& doi) const override;
  std::vector<SourceRecord> search(const std::string& query, int limit) const override;
  std::string name() const override;

private:
  std::vector<std::shared_ptr<const ScholarlySource>> members_;
};

// One FixtureSource per source directory present under `root`, in the order
// scopus, s2, osti.
std::shared_ptr<FederatedSource> open_fixture_sources(const std::filesystem::path& root);

// Live client speaking the fixture layout over HTTP:
//   GET <base_url>/<method>/<key>.json  with  Authorization: Bearer $SLIC_<SOURCE>_TOKEN
// Requests are spaced to at most `max_rps` per second.
class HttpSource final : public ScholarlySource {
public:
  HttpSource(std::string base_url, Source source, double max_rps = 3.0);

  std::optional<SourceRecord> lookup(const std::string& doi) const override;
  std::vector<SourceRecord> cited_by(const std::string& doi) const override;
  std::vector<SourceRecord> references(const std::string& doi) const override;
  std::vector<SourceRecord> search(const std::string& query, int limit) const override;
  std::string name() const override { return to_string(source_) + "@" + base_url_; }

private:
  std::optional<std::string> get(const std::string& method, const std::string& key) const;
  std::vector<SourceRecord> get_list(const std::string& method, const std::string& key) const;

  std::string base_url_;
  Source source_;
  std::chrono::nanoseconds min_interval_;
  mutable std::mutex mu_;
  mutable std::chrono::steady_clock::time_point next_slot_{};
};

struct ExpansionConfig {
  int hops = 2;
  int per_hop_limit = 0;  // 0: unlimited
  int bigram_query_count = 3;
  int bigram_result_limit = 10;
  int max_parallel_fetches = 4;

  void validate() const;
};

// Breadth-first expansion over citations and references. Core documents are
// flagged is_core; every fetched identity is merged from all records seen
// for it in that hop.
Corpus expand_citations(const std::vector<Document>& core, const ScholarlySource& src,
                        const ExpansionConfig& cfg);

// Issues the top bigrams of the (cleaned) core as quoted two-word queries and
// returns the previously unseen documents, merged per identity.
std::vector<Document> search_by_bigrams(const std::vector<Document>& core, const ScholarlySource& src,
                                        const ExpansionConfig& cfg, const Corpus& existing);

// expand_citations, then search_by_bigrams, then cleaning of every title and
// abstract. Records one provenance event per stage.
Corpus assemble_corpus(const std::vector<Document>& core, const ScholarlySource& src,
                       const ExpansionConfig& cfg, const text::CleaningConfig& cleaning = {});

}  // namespace slic::builder
